//! Time sequences `t_k → 0`, the summability conditions that guarantee
//! a.e. convergence along them, operator-norm rate fits, and pointwise
//! traces of `Σ_k |h_k(x)|²`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multiplier::{
    check_delta_span, numeric_sup, Dispersion, Family, MultiplierSpec, Params, ScanPolicy,
    SweepEntry,
};
use crate::phase::PhaseLaw;
use crate::propagator::ShiftSpec;
use crate::spectral::{dot, inverse_fourier_factor, norm, SobolevIndex, SpectralField};
use crate::summation::{self, expm1_i, CompensatedSum};

pub const DEFAULT_TRACE_TERMS: usize = 2048;
pub const DEFAULT_TRACE_POINTS: usize = 32;
pub const DEFAULT_SEED: u64 = 0x5eed;
/// Mass of the second half of the computed terms below this counts as converged.
pub const NUMERIC_TAIL_TOLERANCE: f64 = 1e-6;
/// Allowed gap between fitted and theoretical slopes.
pub const SLOPE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum TimeSequence {
    /// `t_k = k^{-p}`
    Power { p: f64 },
    /// `t_k = r^k`
    Geometric { r: f64 },
    /// Finite decreasing list in (0, 1).
    Explicit(Vec<f64>),
}

impl TimeSequence {
    pub fn power(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 {
            Ok(Self::Power { p })
        } else {
            Err(Error::invalid(format!(
                "power sequence needs p > 0, got {p}"
            )))
        }
    }

    pub fn geometric(r: f64) -> Result<Self> {
        if r > 0.0 && r < 1.0 {
            Ok(Self::Geometric { r })
        } else {
            Err(Error::invalid(format!(
                "geometric sequence needs 0 < r < 1, got {r}"
            )))
        }
    }

    pub fn explicit(terms: Vec<f64>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("explicit sequence is empty"));
        }
        if terms.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::invalid("explicit terms must lie in (0, 1)"));
        }
        if terms.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("explicit terms must be strictly decreasing"));
        }
        Ok(Self::Explicit(terms))
    }

    /// `t_k` for `k ≥ 1`; `None` past the end of an explicit list.
    pub fn term(&self, k: usize) -> Option<f64> {
        assert!(k >= 1, "sequences are indexed from 1");
        match self {
            Self::Power { p } => Some((k as f64).powf(-p)),
            Self::Geometric { r } => Some(r.powi(k as i32)),
            Self::Explicit(v) => v.get(k - 1).copied(),
        }
    }

    /// First `count` terms.
    pub fn terms(&self, count: usize) -> Result<Vec<f64>> {
        (1..=count)
            .map(|k| {
                self.term(k).ok_or_else(|| {
                    Error::invalid(format!("explicit sequence has fewer than {count} terms"))
                })
            })
            .collect()
    }

    /// Upper bound on `Σ_{k > count} t_k^q` (integral test for power
    /// sequences); infinite when the series diverges. Explicit lists end
    /// at their last entry.
    pub fn tail_power_sum(&self, count: usize, q: f64) -> f64 {
        match self {
            Self::Power { p } => {
                let e = p * q;
                if e > 1.0 {
                    (count.max(1) as f64).powf(1.0 - e) / (e - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::Geometric { r } => {
                let rq = r.powf(q);
                if rq < 1.0 {
                    rq.powi(count as i32 + 1) / (1.0 - rq)
                } else {
                    f64::INFINITY
                }
            }
            Self::Explicit(v) => summation::sum(v.iter().skip(count).map(|t| t.powf(q))),
        }
    }
}

impl fmt::Display for TimeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power { p } => write!(f, "power:p={p}"),
            Self::Geometric { r } => write!(f, "geometric:r={r}"),
            Self::Explicit(v) => {
                f.write_str("explicit:")?;
                let parts: Vec<String> = v.iter().map(f64::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for TimeSequence {
    type Err = Error;

    /// `power:p=2`, `geometric:r=0.5`, `explicit:0.5,0.25,0.1`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {v:?} in sequence {s:?}")))
        };
        if let Some(p) = s.strip_prefix("power:p=") {
            Self::power(num(p)?)
        } else if let Some(r) = s.strip_prefix("geometric:r=") {
            Self::geometric(num(r)?)
        } else if let Some(list) = s.strip_prefix("explicit:") {
            Self::explicit(list.split(',').map(num).collect::<Result<_>>()?)
        } else {
            Err(Error::invalid(format!("unknown sequence {s:?}")))
        }
    }
}

/// Which convergence result's hypotheses and summability condition to use.
#[derive(Debug, Clone)]
pub enum Theorem {
    /// `e^{it|ξ|^a}`, `0 < a < 1`, `s ≥ a`: `Σ t_k² < ∞`.
    PowerSmooth { s: f64, a: f64 },
    /// `e^{it|ξ|^a}`, `0 < s ≤ a ≤ 1`: `Σ t_k^{2s/a} < ∞`.
    Power { s: f64, a: f64 },
    /// Along `x + t^β μ` with `0 < a < 1`.
    PowerShiftSub { s: f64, a: f64, beta: f64 },
    /// Along `x + t^β μ` with `a ≥ 1`.
    PowerShiftSuper { s: f64, a: f64, beta: f64 },
    /// General `γ`: `Σ [γ^{-1}(γ(1)/t_k)]^{-2s} < ∞`.
    Gamma { s: f64, law: PhaseLaw },
    /// General `γ` along `x + t^β μ`; extra factor `t_k^{β-1}` when `β ≤ 1`.
    GammaShift { s: f64, law: PhaseLaw, beta: f64 },
    /// `γ(r) = r·sqrt(1+r²)`: `Σ t_k^s < ∞`.
    Boussinesq { s: f64 },
    /// `γ(r) = r² + r⁴`: `Σ t_k^{s/2} < ∞`.
    FourthOrder { s: f64 },
}

impl Theorem {
    pub fn name(&self) -> &'static str {
        match self {
            Theorem::PowerSmooth { .. } => "power-smooth",
            Theorem::Power { .. } => "power",
            Theorem::PowerShiftSub { .. } => "power-shift-sub",
            Theorem::PowerShiftSuper { .. } => "power-shift-super",
            Theorem::Gamma { .. } => "gamma",
            Theorem::GammaShift { .. } => "gamma-shift",
            Theorem::Boussinesq { .. } => "boussinesq",
            Theorem::FourthOrder { .. } => "fourth-order",
        }
    }

    /// Builds a selector from its CLI name and the optional parameters.
    pub fn from_parts(
        name: &str,
        s: f64,
        a: Option<f64>,
        beta: Option<f64>,
        law: Option<PhaseLaw>,
    ) -> Result<Self> {
        let need_a = || a.ok_or_else(|| Error::invalid(format!("{name} needs --a")));
        let need_beta = || beta.ok_or_else(|| Error::invalid(format!("{name} needs --beta")));
        let need_law = || {
            law.clone()
                .ok_or_else(|| Error::invalid(format!("{name} needs --gamma")))
        };
        Ok(match name {
            "power-smooth" => Theorem::PowerSmooth { s, a: need_a()? },
            "power" => Theorem::Power { s, a: need_a()? },
            "power-shift-sub" => Theorem::PowerShiftSub {
                s,
                a: need_a()?,
                beta: need_beta()?,
            },
            "power-shift-super" => Theorem::PowerShiftSuper {
                s,
                a: need_a()?,
                beta: need_beta()?,
            },
            "gamma" => Theorem::Gamma {
                s,
                law: need_law()?,
            },
            "gamma-shift" => Theorem::GammaShift {
                s,
                law: need_law()?,
                beta: need_beta()?,
            },
            "boussinesq" => Theorem::Boussinesq { s },
            "fourth-order" => Theorem::FourthOrder { s },
            other => return Err(Error::invalid(format!("unknown theorem {other:?}"))),
        })
    }
}

/// `t^{β-1}·[γ^{-1}(γ(1)/t)]^{-2s}` (the power factor only when `β ≤ 1`).
#[derive(Debug, Clone)]
pub struct GammaSummand {
    pub law: PhaseLaw,
    pub s: f64,
    pub beta: Option<f64>,
}

impl GammaSummand {
    pub fn eval(&self, t: f64) -> Result<f64> {
        let radius = self.law.invert(self.law.eval(1.0) / t)?;
        let shift = match self.beta {
            Some(b) if b <= 1.0 => t.powf(b - 1.0),
            _ => 1.0,
        };
        Ok(shift * radius.powf(-2.0 * self.s))
    }

    /// `q` with summand `~ C·t^q` as `t → 0`, from the law's growth exponent.
    pub fn asymptotic_exponent(&self) -> Option<f64> {
        let alpha = self.law.growth_exponent()?;
        let shift = match self.beta {
            Some(b) if b <= 1.0 => b - 1.0,
            _ => 0.0,
        };
        Some(2.0 * self.s / alpha + shift)
    }
}

#[derive(Debug, Clone)]
pub enum Requirement {
    /// `Σ t_k^q < ∞`
    PowerSum { q: f64 },
    /// `Σ summand(t_k) < ∞`
    GammaSum(GammaSummand),
}

impl Requirement {
    /// Exponent used for p-series comparisons, when one is known.
    pub fn effective_exponent(&self) -> Option<f64> {
        match self {
            Requirement::PowerSum { q } => Some(*q),
            Requirement::GammaSum(g) => g.asymptotic_exponent(),
        }
    }

    pub fn summand(&self, t: f64) -> Result<f64> {
        match self {
            Requirement::PowerSum { q } => Ok(t.powf(*q)),
            Requirement::GammaSum(g) => g.eval(t),
        }
    }
}

fn require(ok: bool, theorem: &Theorem, condition: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::hypothesis(theorem.name(), condition))
    }
}

/// Summability condition of `sel`, after checking its hypotheses.
pub fn required_exponent(sel: &Theorem) -> Result<Requirement> {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    let req = match sel {
        Theorem::PowerSmooth { s, a } => {
            require(finite(&[*s, *a]), sel, "finite parameters")?;
            require(*a > 0.0 && *a < 1.0, sel, "0 < a < 1")?;
            require(s >= a, sel, "s >= a")?;
            Requirement::PowerSum { q: 2.0 }
        }
        Theorem::Power { s, a } => {
            require(finite(&[*s, *a]), sel, "finite parameters")?;
            require(*s > 0.0 && s <= a && *a <= 1.0, sel, "0 < s <= a <= 1")?;
            Requirement::PowerSum { q: 2.0 * s / a }
        }
        Theorem::PowerShiftSub { s, a, beta } => {
            let (s, a, beta) = (*s, *a, *beta);
            require(finite(&[s, a, beta]), sel, "finite parameters")?;
            require(a > 0.0 && a < 1.0, sel, "0 < a < 1")?;
            require(s > 0.0 && s <= 1.0, sel, "0 < s <= 1")?;
            if beta > 1.0 {
                require(s > 1.0 - a, sel, "s > 1 - a when beta > 1")?;
                Requirement::PowerSum {
                    q: 2.0 * (1.0 + (s - 1.0) / a),
                }
            } else {
                require(s > 1.0 - a * beta, sel, "s > 1 - a*beta when beta <= 1")?;
                Requirement::PowerSum {
                    q: 2.0 * (beta + (s - 1.0) / a),
                }
            }
        }
        Theorem::PowerShiftSuper { s, a, beta } => {
            let (s, a, beta) = (*s, *a, *beta);
            require(finite(&[s, a, beta]), sel, "finite parameters")?;
            require(a >= 1.0, sel, "a >= 1")?;
            require(s > 0.0 && s <= a, sel, "0 < s <= a")?;
            if beta > 1.0 {
                Requirement::PowerSum { q: 2.0 * s / a }
            } else {
                require(s > a * (1.0 - beta), sel, "s > a(1 - beta) when beta <= 1")?;
                Requirement::PowerSum {
                    q: 2.0 * (beta - 1.0 + s / a),
                }
            }
        }
        Theorem::Gamma { s, law } | Theorem::GammaShift { s, law, .. } => {
            let beta = match sel {
                Theorem::GammaShift { beta, .. } => Some(*beta),
                _ => None,
            };
            require(
                s.is_finite() && beta.is_none_or(f64::is_finite),
                sel,
                "finite parameters",
            )?;
            require(*s > 0.0 && *s <= 1.0, sel, "0 < s <= 1")?;
            require(
                law.hypotheses().eligible(),
                sel,
                "gamma >= 0 with gamma and gamma(r)/r increasing",
            )?;
            Requirement::GammaSum(GammaSummand {
                law: law.clone(),
                s: *s,
                beta,
            })
        }
        Theorem::Boussinesq { s } => {
            require(*s > 0.0 && *s <= 1.0, sel, "0 < s <= 1")?;
            Requirement::PowerSum { q: *s }
        }
        Theorem::FourthOrder { s } => {
            require(*s > 0.0 && *s <= 1.0, sel, "0 < s <= 1")?;
            Requirement::PowerSum { q: 0.5 * s }
        }
    };
    if let Requirement::PowerSum { q } = req {
        // q = 0 asks for Σ 1 < ∞, which no sequence satisfies
        require(q > 0.0, sel, "a positive summability exponent")?;
    }
    Ok(req)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Yes,
    YesNumeric,
    /// The hypotheses are not satisfied. Divergence is never claimed.
    No,
    Unknown,
}

impl Verdict {
    pub fn is_yes(self) -> bool {
        matches!(self, Verdict::Yes | Verdict::YesNumeric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub decision: Verdict,
    pub reason: String,
}

fn decide(decision: Verdict, reason: impl Into<String>) -> Decision {
    Decision {
        decision,
        reason: reason.into(),
    }
}

/// Whether `seq` satisfies the summability condition of `sel`.
pub fn sequence_applicable(seq: &TimeSequence, sel: &Theorem) -> Decision {
    let req = match required_exponent(sel) {
        Ok(r) => r,
        Err(e) => return decide(Verdict::No, e.to_string()),
    };
    match (seq, req.effective_exponent()) {
        (TimeSequence::Power { p }, Some(q)) => {
            if p * q > 1.0 {
                decide(
                    Verdict::Yes,
                    format!("sum of k^-{} converges (p*q = {} > 1)", p * q, p * q),
                )
            } else {
                decide(
                    Verdict::No,
                    format!("sum of k^-{} diverges (p*q = {} <= 1)", p * q, p * q),
                )
            }
        }
        (TimeSequence::Geometric { r }, Some(q)) => {
            if q > 0.0 {
                decide(
                    Verdict::Yes,
                    format!("geometric series with ratio {} < 1", r.powf(q)),
                )
            } else {
                decide(
                    Verdict::No,
                    format!("summand exponent {q} <= 0 does not decay"),
                )
            }
        }
        _ => numeric_decision(seq, &req),
    }
}

fn numeric_decision(seq: &TimeSequence, req: &Requirement) -> Decision {
    let count = match seq {
        TimeSequence::Explicit(v) => v.len(),
        _ => DEFAULT_TRACE_TERMS,
    };
    let times = match seq.terms(count) {
        Ok(v) => v,
        Err(e) => return decide(Verdict::Unknown, e.to_string()),
    };
    // stop at the first t whose critical radius the inverter cannot reach
    let mut terms = Vec::with_capacity(count);
    for t in times {
        match req.summand(t) {
            Ok(v) => terms.push(v),
            Err(Error::OutOfRange { .. }) => break,
            Err(e) => return decide(Verdict::Unknown, e.to_string()),
        }
    }
    let count = terms.len();
    if count < 10 {
        return decide(
            Verdict::Unknown,
            "too few terms for a numeric tail estimate",
        );
    }
    let late = summation::sum(terms[count / 2..].iter().copied());
    if late < NUMERIC_TAIL_TOLERANCE {
        decide(
            Verdict::YesNumeric,
            format!("partial sums stabilize: second-half mass {late:e} over {count} terms"),
        )
    } else {
        decide(
            Verdict::Unknown,
            format!("second-half mass {late:e} over {count} terms is not below {NUMERIC_TAIL_TOLERANCE:e}"),
        )
    }
}

/// Selector whose sufficient condition matches the envelope of `spec`.
pub fn theorem_for_spec(spec: &MultiplierSpec) -> Theorem {
    let s = spec.s;
    match (&spec.dispersion, spec.beta) {
        (Dispersion::Power(a), None) if *a < 1.0 && s > *a => Theorem::PowerSmooth { s, a: *a },
        (Dispersion::Power(a), None) => Theorem::Power { s, a: *a },
        (Dispersion::Power(a), Some(beta)) if *a < 1.0 => Theorem::PowerShiftSub { s, a: *a, beta },
        (Dispersion::Power(a), Some(beta)) => Theorem::PowerShiftSuper { s, a: *a, beta },
        (Dispersion::Gamma(law), None) => Theorem::Gamma {
            s,
            law: law.clone(),
        },
        (Dispersion::Gamma(law), Some(beta)) => Theorem::GammaShift {
            s,
            law: law.clone(),
            beta,
        },
    }
}

/// Slope of `log sup|m|` against `log δ` implied by the summability
/// exponent: the condition is on `‖h_k‖²`, so the slope is `q/2`.
pub fn theoretical_slope(spec: &MultiplierSpec) -> Result<f64> {
    let sel = theorem_for_spec(spec);
    let req = if spec.unsafe_params {
        unchecked_requirement(&sel)
    } else {
        required_exponent(&sel)?
    };
    req.effective_exponent().map(|q| 0.5 * q).ok_or_else(|| {
        Error::NotApplicable(format!(
            "no asymptotic exponent known for {}",
            spec.phase_law()
        ))
    })
}

fn unchecked_requirement(sel: &Theorem) -> Requirement {
    match sel {
        Theorem::PowerSmooth { .. } => Requirement::PowerSum { q: 2.0 },
        Theorem::Power { s, a } => Requirement::PowerSum { q: 2.0 * s / a },
        Theorem::PowerShiftSub { s, a, beta } if *beta > 1.0 => Requirement::PowerSum {
            q: 2.0 * (1.0 + (s - 1.0) / a),
        },
        Theorem::PowerShiftSub { s, a, beta } => Requirement::PowerSum {
            q: 2.0 * (beta + (s - 1.0) / a),
        },
        Theorem::PowerShiftSuper { s, a, beta } if *beta > 1.0 => {
            Requirement::PowerSum { q: 2.0 * s / a }
        }
        Theorem::PowerShiftSuper { s, a, beta } => Requirement::PowerSum {
            q: 2.0 * (beta - 1.0 + s / a),
        },
        Theorem::Gamma { s, law } => Requirement::GammaSum(GammaSummand {
            law: law.clone(),
            s: *s,
            beta: None,
        }),
        Theorem::GammaShift { s, law, beta } => Requirement::GammaSum(GammaSummand {
            law: law.clone(),
            s: *s,
            beta: Some(*beta),
        }),
        Theorem::Boussinesq { s } => Requirement::PowerSum { q: *s },
        Theorem::FourthOrder { s } => Requirement::PowerSum { q: 0.5 * s },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub family: Family,
    pub params: Params,
    pub points: Vec<SweepEntry>,
    pub fitted_slope: f64,
    pub theoretical_slope: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub pass: bool,
}

/// Least-squares slope and RMS residual of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = summation::sum(x.iter().copied()) / n;
    let my = summation::sum(y.iter().copied()) / n;
    let sxy = summation::sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = summation::sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = summation::sum(
        x.iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2)),
    );
    (slope, (rss / n).sqrt())
}

/// Fits the slope of `log sup|m|` against `log δ` and compares it with
/// [`theoretical_slope`].
pub fn rate_fit(
    template: &MultiplierSpec,
    deltas: &[f64],
    policy: &ScanPolicy,
) -> Result<RateReport> {
    if deltas.len() < 5 {
        return Err(Error::invalid("rate fit needs at least 5 delta values"));
    }
    if deltas.iter().any(|d| *d > 1e-1) {
        return Err(Error::invalid("rate fit deltas must lie in [1e-10, 1e-1]"));
    }
    check_delta_span(deltas, 4.0)?;
    let theoretical_slope = theoretical_slope(template)?;
    let points = deltas
        .iter()
        .map(|&d| {
            let spec = template.with_delta(d)?;
            let est = numeric_sup(&spec, &policy.scan_for(&spec)?)?;
            let envelope = spec.envelope()?;
            Ok(SweepEntry {
                delta: d,
                sup: est.sup,
                envelope,
                ratio: est.sup / envelope,
                argmax: est.argmax_vector(1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.delta.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sup.ln()).collect();
    let (fitted_slope, residual) = fit_line(&xs, &ys);
    Ok(RateReport {
        family: template.family(),
        params: template.params(),
        points,
        fitted_slope,
        theoretical_slope,
        residual,
        pass: (fitted_slope - theoretical_slope).abs() <= SLOPE_TOLERANCE,
    })
}

/// First selector, in a fixed preference order, whose hypotheses hold for
/// the propagator `(γ, shift, s)`.
pub fn matching_theorem(law: &PhaseLaw, beta: Option<f64>, s: f64) -> Option<Theorem> {
    let mut candidates = Vec::new();
    match (law, beta) {
        (PhaseLaw::Power(a), None) => {
            candidates.push(Theorem::PowerSmooth { s, a: *a });
            candidates.push(Theorem::Power { s, a: *a });
        }
        (PhaseLaw::Linear, None) => candidates.push(Theorem::Power { s, a: 1.0 }),
        (PhaseLaw::Power(a), Some(beta)) => {
            candidates.push(Theorem::PowerShiftSub { s, a: *a, beta });
            candidates.push(Theorem::PowerShiftSuper { s, a: *a, beta });
        }
        (PhaseLaw::Linear, Some(beta)) => {
            candidates.push(Theorem::PowerShiftSuper { s, a: 1.0, beta })
        }
        (PhaseLaw::Boussinesq, None) => candidates.push(Theorem::Boussinesq { s }),
        (PhaseLaw::Quartic, None) => candidates.push(Theorem::FourthOrder { s }),
        _ => {}
    }
    candidates.push(match beta {
        None => Theorem::Gamma {
            s,
            law: law.clone(),
        },
        Some(beta) => Theorem::GammaShift {
            s,
            law: law.clone(),
            beta,
        },
    });
    candidates
        .into_iter()
        .find(|t| required_exponent(t).is_ok())
}

#[derive(Debug, Clone, Serialize)]
pub struct PointTrace {
    pub x: Vec<f64>,
    /// `Σ_{k ≤ K} |h_k(x)|²` for `K = 1, 2, …`
    pub partial_sums: Vec<f64>,
    /// Bound on `Σ_{k > K} |h_k(x)|²`.
    pub tail: f64,
}

impl PointTrace {
    pub fn final_sum(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub theorem: String,
    pub decision: Decision,
    pub terms: usize,
    pub points: Vec<PointTrace>,
}

impl Trace {
    pub fn max_tail(&self) -> f64 {
        self.points.iter().map(|p| p.tail).fold(0.0, f64::max)
    }

    /// Writes `x_1,…,x_n,partial_sum,tail`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.points.first().map_or(1, |p| p.x.len());
        let mut header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
        header.push("partial_sum".into());
        header.push("tail".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut row: Vec<String> = p.x.iter().map(f64::to_string).collect();
            row.push(p.final_sum().to_string());
            row.push(p.tail.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `count` points uniform in `[-π, π]^n` from a seeded generator.
pub fn sample_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(-PI..=PI)).collect())
        .collect()
}

/// Partial sums of `|h_k(x)|²`, `h_k = (2π)^{-n} S_{t_k} f(x + t_k^β μ) − f(x)`,
/// at each sample point, with a uniform tail bound.
pub fn pointwise_trace(
    f: &SpectralField,
    law: &PhaseLaw,
    shift: Option<&ShiftSpec>,
    seq: &TimeSequence,
    s: SobolevIndex,
    points: &[Vec<f64>],
    terms: usize,
) -> Result<Trace> {
    if terms < 16 {
        return Err(Error::invalid(format!(
            "trace needs at least 16 terms, got {terms}"
        )));
    }
    if let Some(sh) = shift {
        if sh.mu().len() != f.dim() {
            return Err(Error::invalid("mu dimension does not match the field"));
        }
    }
    if points.iter().any(|x| x.len() != f.dim()) {
        return Err(Error::invalid(
            "sample point dimension does not match the field",
        ));
    }
    let theorem = matching_theorem(law, shift.map(ShiftSpec::beta), s.get()).ok_or_else(|| {
        Error::NotApplicable(format!(
            "no convergence result covers {law} with s = {}",
            s.get()
        ))
    })?;
    let decision = sequence_applicable(seq, &theorem);
    if !decision.decision.is_yes() {
        return Err(Error::NotApplicable(format!(
            "sequence {seq} under {}: {}",
            theorem.name(),
            decision.reason
        )));
    }

    let times = seq.terms(terms)?;
    let grid = f.grid();
    let gammas: Vec<f64> = grid.modes().map(|xi| law.eval(norm(xi))).collect();
    let along: Vec<f64> = match shift {
        Some(sh) => grid.modes().map(|xi| dot(sh.mu(), xi)).collect(),
        None => vec![0.0; grid.len()],
    };
    let displacements: Vec<f64> = match shift {
        Some(sh) => times
            .iter()
            .map(|&t| sh.displacement(t))
            .collect::<Result<_>>()?,
        None => vec![0.0; times.len()],
    };
    let scale = inverse_fourier_factor(f.dim()) * grid.weight();

    // |h_k(x)| ≤ scale·Σ_j |e^{iθ_jk} − 1||f̂_j| ≤ A·t_k^β + G·t_k
    let abs: Vec<f64> = f.coeffs().iter().map(|c| c.norm()).collect();
    let a_coef = scale * summation::sum(along.iter().zip(&abs).map(|(m, c)| m.abs() * c));
    let g_coef = scale * summation::sum(gammas.iter().zip(&abs).map(|(g, c)| g * c));
    let tail = match shift {
        Some(sh) if a_coef > 0.0 => {
            let beta = sh.beta();
            if beta > 0.0 {
                2.0 * a_coef * a_coef * seq.tail_power_sum(terms, 2.0 * beta)
                    + 2.0 * g_coef * g_coef * seq.tail_power_sum(terms, 2.0)
            } else {
                f64::INFINITY
            }
        }
        _ => g_coef * g_coef * seq.tail_power_sum(terms, 2.0),
    };

    let traces = points
        .par_iter()
        .map(|x| {
            let modulated: Vec<Complex64> = grid
                .modes()
                .zip(f.coeffs())
                .map(|(xi, &c)| Complex64::from_polar(1.0, dot(x, xi)) * c)
                .collect();
            let mut acc = CompensatedSum::new();
            let partial_sums = times
                .iter()
                .zip(&displacements)
                .map(|(&t, &disp)| {
                    let h = summation::sum_complex(
                        modulated
                            .iter()
                            .zip(gammas.iter().zip(&along))
                            .map(|(&m, (&g, &mu_xi))| expm1_i(disp * mu_xi + t * g) * m),
                    ) * scale;
                    acc.add(h.norm_sqr());
                    acc.value()
                })
                .collect();
            PointTrace {
                x: x.clone(),
                partial_sums,
                tail,
            }
        })
        .collect();

    Ok(Trace {
        theorem: theorem.name().to_string(),
        decision,
        terms,
        points: traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn sequence_terms() {
        let p = TimeSequence::power(2.0).unwrap();
        assert_eq!(p.term(1), Some(1.0));
        assert_eq!(p.term(4), Some(1.0 / 16.0));
        let g = TimeSequence::geometric(0.5).unwrap();
        assert_eq!(g.term(3), Some(0.125));
        let e = TimeSequence::explicit(vec![0.5, 0.1]).unwrap();
        assert_eq!(e.term(3), None);
        assert!(e.terms(3).is_err());
    }

    #[test]
    fn sequence_validation() {
        assert!(TimeSequence::power(0.0).is_err());
        assert!(TimeSequence::geometric(1.0).is_err());
        assert!(TimeSequence::explicit(vec![0.5, 0.6]).is_err());
        assert!(TimeSequence::explicit(vec![1.5]).is_err());
        assert!(TimeSequence::explicit(vec![]).is_err());
    }

    #[test]
    fn sequence_parse_round_trip() {
        for s in ["power:p=2", "geometric:r=0.5", "explicit:0.5,0.25,0.1"] {
            assert_eq!(s.parse::<TimeSequence>().unwrap().to_string(), s);
        }
        assert!("harmonic".parse::<TimeSequence>().is_err());
    }

    #[test]
    fn tail_sums_bound_the_series() {
        let seq = TimeSequence::power(1.0).unwrap();
        let direct: f64 = (11..2_000_000).map(|k| (k as f64).powi(-2)).sum();
        let bound = seq.tail_power_sum(10, 2.0);
        assert!(bound >= direct && bound < direct * 1.1);
        assert!(seq.tail_power_sum(10, 1.0).is_infinite());
        let geo = TimeSequence::geometric(0.5).unwrap();
        let direct: f64 = (6..200).map(|k| 0.25f64.powi(k)).sum();
        assert!((geo.tail_power_sum(5, 2.0) - direct).abs() < 1e-15);
    }

    #[test]
    fn exponent_examples() {
        let q = |t: Theorem| match required_exponent(&t).unwrap() {
            Requirement::PowerSum { q } => q,
            Requirement::GammaSum(_) => panic!("expected a power sum"),
        };
        assert_eq!(q(Theorem::Power { s: 0.25, a: 0.5 }), 1.0);
        assert_eq!(q(Theorem::PowerSmooth { s: 0.7, a: 0.5 }), 2.0);
        assert_eq!(q(Theorem::PowerSmooth { s: 3.0, a: 0.1 }), 2.0);
        assert!(
            (q(Theorem::PowerShiftSub {
                s: 0.6,
                a: 0.5,
                beta: 2.0
            }) - 0.4)
                .abs()
                < 1e-15
        );
        assert!(
            (q(Theorem::PowerShiftSub {
                s: 0.9,
                a: 0.5,
                beta: 0.5
            }) - 0.6)
                .abs()
                < 1e-15
        );
        assert_eq!(
            q(Theorem::PowerShiftSuper {
                s: 1.0,
                a: 2.0,
                beta: 2.0
            }),
            1.0
        );
        assert_eq!(q(Theorem::Boussinesq { s: 0.5 }), 0.5);
        assert_eq!(q(Theorem::FourthOrder { s: 0.5 }), 0.25);
    }

    #[test]
    fn vacuous_boundary_is_a_hypothesis_violation() {
        let err = required_exponent(&Theorem::PowerShiftSuper {
            s: 1.0,
            a: 2.0,
            beta: 0.5,
        })
        .unwrap_err();
        match err {
            Error::HypothesisViolation {
                theorem,
                requirement,
            } => {
                assert_eq!(theorem, "power-shift-super");
                assert!(requirement.contains("s > a(1 - beta)"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn hypothesis_failures() {
        for t in [
            Theorem::PowerSmooth { s: 0.3, a: 0.5 },
            Theorem::Power { s: 0.6, a: 0.5 },
            Theorem::PowerShiftSub {
                s: 0.3,
                a: 0.5,
                beta: 2.0,
            },
            Theorem::Gamma {
                s: 0.5,
                law: PhaseLaw::Power(0.5),
            },
            Theorem::Boussinesq { s: 1.5 },
        ] {
            assert!(
                matches!(
                    required_exponent(&t),
                    Err(Error::HypothesisViolation { .. })
                ),
                "{t:?}"
            );
        }
    }

    #[test]
    fn p_series_decisions() {
        let d = sequence_applicable(
            &TimeSequence::power(1.0).unwrap(),
            &Theorem::PowerSmooth { s: 0.5, a: 0.5 },
        );
        assert_eq!(d.decision, Verdict::Yes);
        let d = sequence_applicable(
            &TimeSequence::power(0.5).unwrap(),
            &Theorem::Power { s: 0.25, a: 0.5 },
        );
        assert_eq!(d.decision, Verdict::No);
    }

    #[test]
    fn geometric_quartic_gamma_sum() {
        let sel = Theorem::Gamma {
            s: 1.0,
            law: PhaseLaw::Quartic,
        };
        let seq = TimeSequence::geometric(0.5).unwrap();
        assert_eq!(sequence_applicable(&seq, &sel).decision, Verdict::Yes);
        // summand ≈ (t/2)^{1/2} for small t
        let Requirement::GammaSum(g) = required_exponent(&sel).unwrap() else {
            panic!()
        };
        for k in [20, 30, 40] {
            let t = 0.5f64.powi(k);
            let oracle = (t / 2.0).sqrt();
            assert!((g.eval(t).unwrap() / oracle - 1.0).abs() < 1e-3, "k={k}");
        }
        assert_eq!(g.asymptotic_exponent(), Some(0.5));
    }

    #[test]
    fn explicit_sequences_use_partial_sums() {
        let sel = Theorem::Power { s: 0.5, a: 0.5 };
        let fast = TimeSequence::explicit((1..=200).map(|k| 0.5f64.powi(k)).collect()).unwrap();
        assert_eq!(
            sequence_applicable(&fast, &sel).decision,
            Verdict::YesNumeric
        );
        let slow = TimeSequence::explicit((2..=200).map(|k| 1.0 / k as f64).collect()).unwrap();
        assert_eq!(sequence_applicable(&slow, &sel).decision, Verdict::Unknown);
    }

    #[test]
    fn custom_law_falls_back_to_numeric() {
        let law = PhaseLaw::custom("cubic", |r| r * r * r);
        let sel = Theorem::Gamma { s: 1.0, law };
        let d = sequence_applicable(&TimeSequence::geometric(0.5).unwrap(), &sel);
        assert_eq!(d.decision, Verdict::YesNumeric, "{}", d.reason);
        // k^{-4/3} converges but too slowly for the numeric tail test
        let d = sequence_applicable(&TimeSequence::power(2.0).unwrap(), &sel);
        assert_eq!(d.decision, Verdict::Unknown, "{}", d.reason);
    }

    #[test]
    fn line_fit_recovers_exact_slope() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.75 * v - 2.0).collect();
        let (slope, res) = fit_line(&x, &y);
        assert!((slope - 0.75).abs() < 1e-14);
        assert!(res < 1e-14);
    }

    #[test]
    fn matching_theorem_prefers_specific_results() {
        assert_eq!(
            matching_theorem(&PhaseLaw::Power(0.5), None, 0.5)
                .unwrap()
                .name(),
            "power-smooth"
        );
        assert_eq!(
            matching_theorem(&PhaseLaw::Power(0.5), None, 0.25)
                .unwrap()
                .name(),
            "power"
        );
        assert_eq!(
            matching_theorem(&PhaseLaw::Power(2.0), None, 0.5)
                .unwrap()
                .name(),
            "gamma"
        );
        assert_eq!(
            matching_theorem(&PhaseLaw::Quartic, None, 1.0)
                .unwrap()
                .name(),
            "fourth-order"
        );
        assert_eq!(
            matching_theorem(&PhaseLaw::Power(0.5), Some(2.0), 1.0)
                .unwrap()
                .name(),
            "power-shift-sub"
        );
        assert!(matching_theorem(&PhaseLaw::Power(0.5), None, -1.0).is_none());
    }

    #[test]
    fn trace_of_zero_field_vanishes() {
        let f = SpectralField::zeros(make_grid(1, 2.0, 0.25).unwrap());
        let seq = TimeSequence::power(2.0).unwrap();
        let pts = sample_points(1, 4, 1);
        let tr = pointwise_trace(
            &f,
            &PhaseLaw::Power(0.5),
            None,
            &seq,
            SobolevIndex::new(0.5).unwrap(),
            &pts,
            32,
        )
        .unwrap();
        assert!(tr
            .points
            .iter()
            .all(|p| p.partial_sums.iter().all(|v| *v == 0.0)));
        assert_eq!(tr.max_tail(), 0.0);
    }

    #[test]
    fn trace_rejects_non_qualifying_sequences() {
        let f = SpectralField::zeros(make_grid(1, 2.0, 0.25).unwrap());
        let pts = sample_points(1, 2, 1);
        let s = SobolevIndex::new(0.25).unwrap();
        // power selector with s=1/4, a=1/2 needs p > 1
        let seq = TimeSequence::power(0.5).unwrap();
        let r = pointwise_trace(&f, &PhaseLaw::Power(0.5), None, &seq, s, &pts, 32);
        assert!(matches!(r, Err(Error::NotApplicable(_))));
        let seq = TimeSequence::power(2.0).unwrap();
        assert!(pointwise_trace(&f, &PhaseLaw::Power(0.5), None, &seq, s, &pts, 8).is_err());
    }

    #[test]
    fn sample_points_are_seeded() {
        let a = sample_points(2, 32, DEFAULT_SEED);
        assert_eq!(a, sample_points(2, 32, DEFAULT_SEED));
        assert_ne!(a, sample_points(2, 32, DEFAULT_SEED + 1));
        assert!(a.iter().flatten().all(|v| v.abs() <= PI));
    }
}
