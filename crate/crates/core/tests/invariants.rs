use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use schrodinger_conv::convergence::{sequence_applicable, Theorem, TimeSequence, Verdict};
use schrodinger_conv::multiplier::{numeric_sup, MultiplierSpec, ScanPolicy};
use schrodinger_conv::phase::{PhaseLaw, BRACKET_HI};
use schrodinger_conv::propagator::{apply_phase, propagate, ShiftSpec};
use schrodinger_conv::spectral::{make_grid, SobolevIndex, SpectralField};
use schrodinger_conv::Error;

fn law_strategy() -> impl Strategy<Value = PhaseLaw> {
    prop_oneof![
        (0.1f64..2.0).prop_map(|a| PhaseLaw::power(a).unwrap()),
        Just(PhaseLaw::Linear),
        Just(PhaseLaw::Boussinesq),
        Just(PhaseLaw::Quartic),
    ]
}

fn field(n: usize, seed: u64) -> SpectralField {
    let grid = make_grid(n, 2.0, 0.25).unwrap();
    SpectralField::random(grid, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn gap(a: &SpectralField, b: &SpectralField) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagation_is_linear(
        law in law_strategy(), n in 1usize..=2, seed in any::<u64>(),
        t in 0.0f64..2.0, ar in -2.0f64..2.0, ai in -2.0f64..2.0,
    ) {
        let f = field(n, seed);
        let g = field(n, seed.wrapping_add(1));
        let alpha = Complex64::new(ar, ai);
        let one = Complex64::new(1.0, 0.0);
        let lhs = apply_phase(&f.combine(alpha, &g, one).unwrap(), &law, t).unwrap();
        let rhs = apply_phase(&f, &law, t).unwrap()
            .combine(alpha, &apply_phase(&g, &law, t).unwrap(), one)
            .unwrap();
        prop_assert!(gap(&lhs, &rhs) < 1e-13);
    }

    #[test]
    fn propagation_preserves_norms(
        law in law_strategy(), n in 1usize..=2, seed in any::<u64>(),
        t in 0.0f64..5.0, s in 0.0f64..3.0, beta in 0.1f64..3.0,
    ) {
        let f = field(n, seed);
        let sh = ShiftSpec::along_first_axis(beta, n).unwrap();
        let g = propagate(&f, &law, t, Some(&sh)).unwrap();
        let s = SobolevIndex::new(s).unwrap();
        prop_assert!((g.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-13);
        prop_assert!((g.sobolev_norm(s) / f.sobolev_norm(s) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn group_law(law in law_strategy(), seed in any::<u64>(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let f = field(1, seed);
        let two_steps = apply_phase(&apply_phase(&f, &law, t1).unwrap(), &law, t2).unwrap();
        let one_step = apply_phase(&f, &law, t1 + t2).unwrap();
        prop_assert!(gap(&two_steps, &one_step) < 1e-13);
    }

    #[test]
    fn sobolev_norm_is_monotone_in_s(seed in any::<u64>(), s1 in 0.0f64..3.0, ds in 0.0f64..2.0) {
        let f = field(2, seed);
        let lo = f.sobolev_norm(SobolevIndex::new(s1).unwrap());
        let hi = f.sobolev_norm(SobolevIndex::new(s1 + ds).unwrap());
        prop_assert!(lo <= hi * (1.0 + 1e-15));
    }

    #[test]
    fn multiplier_sup_decreases_in_s(s1 in 0.05f64..0.5, ds in 0.0f64..0.5, log_delta in -6.0f64..-1.0) {
        let delta = 10f64.powf(log_delta);
        let sup = |s: f64| {
            let spec = MultiplierSpec::gamma(s, PhaseLaw::Boussinesq, delta).unwrap();
            numeric_sup(&spec, &ScanPolicy::default().scan_for(&spec).unwrap()).unwrap().sup
        };
        prop_assert!(sup(s1 + ds) <= sup(s1) * (1.0 + 1e-12));
    }

    #[test]
    fn envelope_shrinks_with_delta(s in 0.05f64..1.0, a in 0.05f64..1.0, d in -9.0f64..-1.0) {
        let (s, a) = (s.min(a), s.max(a));
        let env = |delta: f64| MultiplierSpec::power(s, a, delta).unwrap().envelope().unwrap();
        prop_assert!(env(10f64.powf(d)) < env(10f64.powf(d + 0.5)));
    }

    #[test]
    fn p_series_rule(p in 0.01f64..10.0, a in 0.05f64..=1.0, frac in 0.01f64..=1.0) {
        let s = frac * a;
        let q = 2.0 * s / a;
        let d = sequence_applicable(&TimeSequence::power(p).unwrap(), &Theorem::Power { s, a });
        prop_assert_eq!(d.decision == Verdict::Yes, p * q > 1.0);
        prop_assert!(matches!(d.decision, Verdict::Yes | Verdict::No));
    }

    #[test]
    fn geometric_sequences_always_qualify(r in 0.01f64..0.99, s in 0.05f64..=1.0) {
        for sel in [
            Theorem::Boussinesq { s },
            Theorem::FourthOrder { s },
            Theorem::Gamma { s, law: PhaseLaw::Linear },
            Theorem::Power { s: 0.5 * s, a: 0.5 },
        ] {
            let d = sequence_applicable(&TimeSequence::geometric(r).unwrap(), &sel);
            prop_assert_eq!(d.decision, Verdict::Yes);
        }
    }

    #[test]
    fn catalog_inverse_round_trips(law in law_strategy(), log_y in -8.0f64..8.0) {
        let y = 10f64.powf(log_y);
        if y <= law.eval(BRACKET_HI) {
            let r = law.invert(y).unwrap();
            prop_assert!((law.eval(r) / y - 1.0).abs() < 1e-9);
        } else {
            prop_assert!(matches!(law.invert(y), Err(Error::OutOfRange { .. })), "{}", y);
        }
    }
}
