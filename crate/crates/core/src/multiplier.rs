//! The four error multipliers
//!
//! ```text
//! m(ξ) = (e^{i(δ^β μ·ξ + δ γ(|ξ|))} − 1) / (1 + |ξ|²)^{s/2}
//! ```
//!
//! with `γ(r) = r^a` (power families) or a general phase law (gamma
//! families), with or without the shift term. For each family this module
//! gives the analytic sup-envelope in `δ`, a numeric estimate of
//! `sup_ξ |m(ξ)|`, certificates that the ratio of the two stays bounded
//! over several decades of `δ`, and single-mode fields that realize the
//! sup on a grid.
//!
//! `μ` is always the first coordinate axis. The shift term satisfies
//! `|δ^β μ·ξ| ≤ δ^β |ξ|` with equality for `ξ ∥ ±μ`, so shift families are
//! scanned along `±μ` only.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::PhaseLaw;
use crate::propagator::ShiftSpec;
use crate::spectral::{norm, FrequencyGrid, SobolevIndex, SpectralField};
use crate::summation::expm1_i;

/// Smallest admissible `δ`; below this `δ γ(|ξ|)` loses phase resolution.
pub const MIN_DELTA: f64 = 1e-10;
/// Certificate threshold on `sup / envelope`.
pub const MAX_RATIO: f64 = 2.5;
/// Certificate threshold on `max ratio / min ratio` across the sweep.
pub const MAX_DRIFT: f64 = 3.0;
/// Linear refinement points placed around the radius where `|θ| = π`.
pub const REFINE_POINTS: usize = 2000;
const SCAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Power,
    PowerShift,
    Gamma,
    GammaShift,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Power => "power",
            Family::PowerShift => "power_shift",
            Family::Gamma => "gamma",
            Family::GammaShift => "gamma_shift",
        })
    }
}

#[derive(Debug, Clone)]
pub enum Dispersion {
    /// `γ(r) = r^a`
    Power(f64),
    Gamma(PhaseLaw),
}

#[derive(Debug, Clone)]
pub struct MultiplierSpec {
    pub dispersion: Dispersion,
    pub s: f64,
    /// `Some(β)` for the shift families.
    pub beta: Option<f64>,
    pub delta: f64,
    /// Skip the parameter-range checks of the envelopes (formulas unchanged).
    pub unsafe_params: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

fn check_delta(delta: f64) -> Result<()> {
    if (MIN_DELTA..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "delta must lie in [{MIN_DELTA:e}, 1), got {delta}"
        )))
    }
}

impl MultiplierSpec {
    fn build(dispersion: Dispersion, s: f64, beta: Option<f64>, delta: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::invalid(format!("s must be finite, got {s}")));
        }
        if let Dispersion::Power(a) = dispersion {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::invalid(format!("a must be > 0, got {a}")));
            }
        }
        if let Some(b) = beta {
            if !b.is_finite() {
                return Err(Error::invalid(format!("beta must be finite, got {b}")));
            }
        }
        check_delta(delta)?;
        Ok(Self {
            dispersion,
            s,
            beta,
            delta,
            unsafe_params: false,
        })
    }

    pub fn power(s: f64, a: f64, delta: f64) -> Result<Self> {
        Self::build(Dispersion::Power(a), s, None, delta)
    }

    pub fn power_shift(s: f64, a: f64, beta: f64, delta: f64) -> Result<Self> {
        Self::build(Dispersion::Power(a), s, Some(beta), delta)
    }

    pub fn gamma(s: f64, law: PhaseLaw, delta: f64) -> Result<Self> {
        Self::build(Dispersion::Gamma(law), s, None, delta)
    }

    pub fn gamma_shift(s: f64, law: PhaseLaw, beta: f64, delta: f64) -> Result<Self> {
        Self::build(Dispersion::Gamma(law), s, Some(beta), delta)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            delta,
            ..self.clone()
        })
    }

    pub fn with_unsafe_params(mut self, on: bool) -> Self {
        self.unsafe_params = on;
        self
    }

    pub fn family(&self) -> Family {
        match (&self.dispersion, self.beta.is_some()) {
            (Dispersion::Power(_), false) => Family::Power,
            (Dispersion::Power(_), true) => Family::PowerShift,
            (Dispersion::Gamma(_), false) => Family::Gamma,
            (Dispersion::Gamma(_), true) => Family::GammaShift,
        }
    }

    pub fn phase_law(&self) -> PhaseLaw {
        match &self.dispersion {
            Dispersion::Power(a) => PhaseLaw::Power(*a),
            Dispersion::Gamma(law) => law.clone(),
        }
    }

    pub fn sobolev(&self) -> SobolevIndex {
        SobolevIndex::new(self.s).expect("validated at construction")
    }

    /// The curve `x + t^β e_1` in dimension `n`, for shift families.
    pub fn shift_spec(&self, n: usize) -> Option<ShiftSpec> {
        self.beta
            .map(|b| ShiftSpec::along_first_axis(b, n).expect("finite beta"))
    }

    pub fn params(&self) -> Params {
        let (a, gamma) = match &self.dispersion {
            Dispersion::Power(a) => (Some(*a), None),
            Dispersion::Gamma(law) => (None, Some(law.to_string())),
        };
        Params {
            s: self.s,
            a,
            gamma,
            beta: self.beta,
        }
    }

    #[inline]
    fn gamma_at(&self, r: f64) -> f64 {
        match &self.dispersion {
            Dispersion::Power(a) => r.powf(*a),
            Dispersion::Gamma(law) => law.eval(r),
        }
    }

    /// Phase `δ^β ξ_1 + δ γ(|ξ|)`.
    #[inline]
    pub fn phase(&self, xi: &[f64]) -> f64 {
        let dispersive = self.delta * self.gamma_at(norm(xi));
        match self.beta {
            Some(b) => self.delta.powf(b) * xi.first().copied().unwrap_or(0.0) + dispersive,
            None => dispersive,
        }
    }

    /// `m(ξ)`.
    pub fn value(&self, xi: &[f64]) -> Complex64 {
        expm1_i(self.phase(xi)) / (1.0 + norm(xi).powi(2)).powf(0.5 * self.s)
    }

    /// Radius separating the "linearized" and "oscillating" regimes:
    /// `δ^{-1/a}` for power families, `γ^{-1}(γ(1)/δ)` for gamma families.
    pub fn critical_radius(&self) -> Result<f64> {
        match &self.dispersion {
            Dispersion::Power(a) => Ok(self.delta.powf(-1.0 / a)),
            Dispersion::Gamma(law) => law.invert(law.eval(1.0) / self.delta),
        }
    }

    fn require(&self, ok: bool, regime: &str, condition: &str) -> Result<()> {
        if ok || self.unsafe_params {
            Ok(())
        } else {
            Err(Error::hypothesis(regime, condition))
        }
    }

    /// Analytic envelope of `sup |m|` without its constant.
    pub fn envelope(&self) -> Result<f64> {
        let (s, d) = (self.s, self.delta);
        let env = match (&self.dispersion, self.beta) {
            (Dispersion::Power(a), None) => {
                let a = *a;
                if a < 1.0 && s > a {
                    // high regularity: |m| ≤ δ|ξ|^a/(1+|ξ|²)^{s/2} ≤ δ
                    self.require(s > 0.0, "power envelope", "s > 0")?;
                    d
                } else {
                    self.require(
                        0.0 < s && s <= a && a <= 1.0,
                        "power envelope",
                        "0 < s <= a <= 1",
                    )?;
                    d.powf(s / a)
                }
            }
            (Dispersion::Power(a), Some(beta)) if *a < 1.0 => {
                let a = *a;
                let name = "power-shift envelope (0 < a < 1)";
                self.require(0.0 < s && s <= 1.0, name, "0 < s <= 1")?;
                if beta > 1.0 {
                    self.require(s > 1.0 - a, name, "s > 1 - a when beta > 1")?;
                    d.powf(1.0 + (s - 1.0) / a)
                } else {
                    self.require(s > 1.0 - a * beta, name, "s > 1 - a*beta when beta <= 1")?;
                    d.powf(beta + (s - 1.0) / a)
                }
            }
            (Dispersion::Power(a), Some(beta)) => {
                let a = *a;
                let name = "power-shift envelope (a >= 1)";
                self.require(0.0 < s && s <= a, name, "0 < s <= a")?;
                if beta > 1.0 {
                    d.powf(s / a)
                } else {
                    self.require(s > a * (1.0 - beta), name, "s > a(1 - beta) when beta <= 1")?;
                    d.powf(beta - 1.0 + s / a)
                }
            }
            (Dispersion::Gamma(law), beta) => {
                let name = if beta.is_some() {
                    "gamma-shift envelope"
                } else {
                    "gamma envelope"
                };
                self.require(0.0 < s && s <= 1.0, name, "0 < s <= 1")?;
                self.require(
                    law.hypotheses().eligible(),
                    name,
                    "gamma >= 0 with gamma and gamma(r)/r increasing",
                )?;
                let base = self.critical_radius()?.powf(-s);
                match beta {
                    Some(b) if b <= 1.0 => d.powf(b - 1.0) * base,
                    _ => base,
                }
            }
        };
        if env.is_finite() && env > 0.0 {
            Ok(env)
        } else {
            Err(Error::invalid(format!("envelope evaluated to {env}")))
        }
    }
}

/// Free function form of [`MultiplierSpec::value`].
pub fn multiplier_value(spec: &MultiplierSpec, xi: &[f64]) -> Complex64 {
    spec.value(xi)
}

/// Free function form of [`MultiplierSpec::envelope`].
pub fn analytic_envelope(spec: &MultiplierSpec) -> Result<f64> {
    spec.envelope()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub xi_max: f64,
    pub per_decade: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupEstimate {
    pub sup: f64,
    /// Signed coordinate along `μ = e_1` of the maximizing frequency.
    pub argmax: f64,
}

impl SupEstimate {
    pub fn argmax_vector(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n.max(1)];
        v[0] = self.argmax;
        v
    }
}

/// Smallest `r > 0` with `δ^β r + δγ(r) = π` (phase along `+μ`), or
/// `xi_max` if the phase stays below `π` on the scan.
fn first_pi_crossing(spec: &MultiplierSpec, xi_max: f64) -> f64 {
    let theta = |r: f64| spec.phase(&[r]);
    if theta(xi_max) < std::f64::consts::PI {
        return xi_max;
    }
    let (mut lo, mut hi) = (0.0, xi_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if theta(mid) < std::f64::consts::PI {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Radii scanned by [`numeric_sup`]: a geometric grid on `[1e-6, xi_max]`
/// with `per_decade` points per decade, plus [`REFINE_POINTS`] linear points
/// on `[r_π/4, min(2 r_π, xi_max)]`. Doubling `per_decade` yields a superset.
fn scan_radii(spec: &MultiplierSpec, scan: &ScanConfig) -> Vec<f64> {
    let ppd = scan.per_decade as f64;
    let top = scan.xi_max.log10();
    let mut radii: Vec<f64> = (0..)
        .map(|i| SCAN_FLOOR.log10() + i as f64 / ppd)
        .take_while(|e| *e < top)
        .map(|e| 10f64.powf(e))
        .collect();
    radii.push(scan.xi_max);
    let r_pi = first_pi_crossing(spec, scan.xi_max);
    let (lo, hi) = (0.25 * r_pi, (2.0 * r_pi).min(scan.xi_max));
    radii
        .extend((0..REFINE_POINTS).map(|i| lo + (hi - lo) * i as f64 / (REFINE_POINTS - 1) as f64));
    radii
}

/// Numeric `sup_ξ |m(ξ)|` over the scan described in [`scan_radii`].
pub fn numeric_sup(spec: &MultiplierSpec, scan: &ScanConfig) -> Result<SupEstimate> {
    if scan.per_decade == 0 || !(scan.xi_max.is_finite() && scan.xi_max > SCAN_FLOOR) {
        return Err(Error::invalid(
            "scan needs per_decade >= 1 and xi_max > 1e-6",
        ));
    }
    let required = 4.0 * spec.critical_radius()?;
    if scan.xi_max < required {
        return Err(Error::ScanTooSmall {
            xi_max: scan.xi_max,
            required,
        });
    }
    let radii = scan_radii(spec, scan);
    let signs: &[f64] = if spec.beta.is_some() {
        &[1.0, -1.0]
    } else {
        &[1.0]
    };
    let samples: Vec<(f64, f64)> = radii
        .par_iter()
        .flat_map_iter(|&r| signs.iter().map(move |sg| sg * r))
        .map(|x| (x, spec.value(&[x]).norm()))
        .collect();
    let mut best = SupEstimate {
        sup: 0.0,
        argmax: 0.0,
    };
    for (x, v) in samples {
        // ties: smaller |ξ| wins, then +μ before −μ
        let better = v > best.sup
            || (v == best.sup
                && (x.abs() < best.argmax.abs()
                    || (x.abs() == best.argmax.abs() && x > best.argmax)));
        if better {
            best = SupEstimate { sup: v, argmax: x };
        }
    }
    Ok(best)
}

/// How [`certify`] and rate fits size their scans for each `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPolicy {
    pub per_decade: usize,
    /// Scan out to `xi_max_factor · critical_radius`.
    pub xi_max_factor: f64,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        Self {
            per_decade: 64,
            xi_max_factor: 16.0,
        }
    }
}

impl ScanPolicy {
    pub fn scan_for(&self, spec: &MultiplierSpec) -> Result<ScanConfig> {
        Ok(ScanConfig {
            xi_max: self.xi_max_factor * spec.critical_radius()?,
            per_decade: self.per_decade,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub delta: f64,
    pub sup: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub argmax: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub family: Family,
    pub params: Params,
    pub delta_sweep: Vec<SweepEntry>,
    pub pass: bool,
}

impl BoundCertificate {
    pub fn max_ratio(&self) -> f64 {
        self.delta_sweep.iter().map(|e| e.ratio).fold(0.0, f64::max)
    }

    pub fn min_ratio(&self) -> f64 {
        self.delta_sweep
            .iter()
            .map(|e| e.ratio)
            .fold(f64::INFINITY, f64::min)
    }

    /// `max ratio / min ratio` over the sweep.
    pub fn drift(&self) -> f64 {
        self.max_ratio() / self.min_ratio()
    }

    /// Entry with the largest ratio.
    pub fn worst(&self) -> &SweepEntry {
        self.delta_sweep.iter().fold(
            &self.delta_sweep[0],
            |w, e| if e.ratio > w.ratio { e } else { w },
        )
    }
}

/// Checks that `deltas` are admissible and span at least `decades` decades.
pub fn check_delta_span(deltas: &[f64], decades: f64) -> Result<()> {
    for &d in deltas {
        check_delta(d)?;
    }
    let lo = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().copied().fold(0.0, f64::max);
    if deltas.is_empty() || (hi / lo).log10() < decades - 1e-9 {
        return Err(Error::invalid(format!(
            "delta list must span at least {decades} decades"
        )));
    }
    Ok(())
}

/// Evaluates `sup / envelope` at every `δ` and applies the
/// [`MAX_RATIO`] / [`MAX_DRIFT`] thresholds.
pub fn certify(
    template: &MultiplierSpec,
    deltas: &[f64],
    policy: &ScanPolicy,
) -> Result<BoundCertificate> {
    check_delta_span(deltas, 4.0)?;
    let delta_sweep = deltas
        .iter()
        .map(|&d| {
            let spec = template.with_delta(d)?;
            let envelope = spec.envelope()?;
            let est = numeric_sup(&spec, &policy.scan_for(&spec)?)?;
            Ok(SweepEntry {
                delta: d,
                sup: est.sup,
                envelope,
                ratio: est.sup / envelope,
                argmax: est.argmax_vector(1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cert = BoundCertificate {
        family: template.family(),
        params: template.params(),
        delta_sweep,
        pass: false,
    };
    cert.pass = cert.max_ratio() <= MAX_RATIO && cert.drift() <= MAX_DRIFT;
    Ok(cert)
}

/// Unit-`H^s` single-mode field at the grid mode nearest the numeric argmax.
pub fn extremal_witness(
    spec: &MultiplierSpec,
    grid: &FrequencyGrid,
    scan: &ScanConfig,
) -> Result<SpectralField> {
    let est = numeric_sup(spec, scan)?;
    let target = est.argmax_vector(grid.dim());
    let (j, distance) = grid.nearest(&target);
    if distance > grid.dxi() {
        return Err(Error::GridMismatch {
            distance,
            dxi: grid.dxi(),
        });
    }
    let xi = grid.mode(j);
    let amplitude = 1.0 / (spec.sobolev().weight(norm(xi)) * grid.weight().sqrt());
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    coeffs[j] = Complex64::new(amplitude, 0.0);
    SpectralField::new(grid.clone(), coeffs)
}
