//! Dispersion relations `γ(|ξ|)` and their inverses.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};

/// Lower end of the inversion bracket.
pub const BRACKET_LO: f64 = 1e-12;
/// Upper end of the inversion bracket; also the largest radius `γ` must be finite on.
pub const BRACKET_HI: f64 = 1e9;
const MAX_BISECTIONS: usize = 200;
const DEFAULT_SAMPLES: usize = 256;

/// A user supplied `γ`. The evaluator must be pure.
#[derive(Clone)]
pub struct CustomPhase {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    report: Arc<OnceLock<HypothesisReport>>,
}

impl CustomPhase {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            report: Arc::new(OnceLock::new()),
        }
    }
}

impl fmt::Debug for CustomPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPhase")
            .field("name", &self.name)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum PhaseLaw {
    /// `r^a`
    Power(f64),
    /// `r`
    Linear,
    /// `r·sqrt(1 + r²)`
    Boussinesq,
    /// `r² + r⁴`
    Quartic,
    Custom(CustomPhase),
}

/// Outcome of sampling the monotonicity hypotheses on (1e-6, 1e6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HypothesisReport {
    pub gamma_nonneg: bool,
    pub ratio_increasing: bool,
    pub gamma_increasing: bool,
}

impl HypothesisReport {
    /// All three checks passed, so the `γ^{-1}` based envelopes apply.
    pub fn eligible(&self) -> bool {
        self.gamma_nonneg && self.ratio_increasing && self.gamma_increasing
    }
}

impl PhaseLaw {
    pub fn power(a: f64) -> Result<Self> {
        if a.is_finite() && a > 0.0 {
            Ok(PhaseLaw::Power(a))
        } else {
            Err(Error::invalid(format!(
                "power exponent must be > 0, got {a}"
            )))
        }
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        PhaseLaw::Custom(CustomPhase::new(name, eval))
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            PhaseLaw::Power(a) => r.powf(*a),
            PhaseLaw::Linear => r,
            PhaseLaw::Boussinesq => r * (1.0 + r * r).sqrt(),
            PhaseLaw::Quartic => {
                let r2 = r * r;
                r2 + r2 * r2
            }
            PhaseLaw::Custom(c) => (c.eval)(r),
        }
    }

    /// Exponent `α` with `γ(r) ~ r^α` as `r → ∞`, known for catalog laws only.
    pub fn growth_exponent(&self) -> Option<f64> {
        match self {
            PhaseLaw::Power(a) => Some(*a),
            PhaseLaw::Linear => Some(1.0),
            PhaseLaw::Boussinesq => Some(2.0),
            PhaseLaw::Quartic => Some(4.0),
            PhaseLaw::Custom(_) => None,
        }
    }

    /// Samples `γ` and `γ(r)/r` on `samples` geometric points of (1e-6, 1e6).
    pub fn check_hypotheses(&self, samples: usize) -> Result<HypothesisReport> {
        if samples < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        let values: Vec<(f64, f64)> = (0..samples)
            .map(|i| {
                let r = 10f64.powf(-6.0 + 12.0 * i as f64 / (samples - 1) as f64);
                (r, self.eval(r))
            })
            .collect();
        if values.iter().any(|&(_, g)| !g.is_finite() || g < 0.0) {
            return Ok(HypothesisReport {
                gamma_nonneg: false,
                ratio_increasing: false,
                gamma_increasing: false,
            });
        }
        let ratio_increasing = values.windows(2).all(|w| {
            let (r0, g0) = w[0];
            let (r1, g1) = w[1];
            // constant ratios (linear law) must pass despite rounding
            g1 / r1 >= (g0 / r0) * (1.0 - 1e-14)
        });
        let gamma_increasing = values.windows(2).all(|w| w[1].1 > w[0].1);
        Ok(HypothesisReport {
            gamma_nonneg: true,
            ratio_increasing,
            gamma_increasing,
        })
    }

    /// Report at the default sample count; cached for custom laws.
    pub fn hypotheses(&self) -> HypothesisReport {
        match self {
            PhaseLaw::Custom(c) => *c.report.get_or_init(|| {
                self.check_hypotheses(DEFAULT_SAMPLES)
                    .expect("sample count")
            }),
            _ => self
                .check_hypotheses(DEFAULT_SAMPLES)
                .expect("sample count"),
        }
    }

    /// `γ^{-1}(y)`: closed form for power and linear laws, bisection on
    /// `[1e-12, 1e9]` otherwise.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if !(y.is_finite() && y > 0.0) {
            return Err(Error::invalid(format!("cannot invert at y = {y}")));
        }
        if !self.hypotheses().gamma_increasing {
            return Err(Error::NotInvertible(self.to_string()));
        }
        let hi_val = self.eval(BRACKET_HI);
        if y > hi_val {
            return Err(Error::OutOfRange {
                law: self.to_string(),
                y,
                max: hi_val,
            });
        }
        match self {
            PhaseLaw::Power(a) => return Ok(y.powf(1.0 / a)),
            PhaseLaw::Linear => return Ok(y),
            _ => {}
        }
        if y < self.eval(BRACKET_LO) {
            return Err(Error::OutOfRange {
                law: self.to_string(),
                y,
                max: hi_val,
            });
        }
        let (mut lo, mut hi) = (BRACKET_LO, BRACKET_HI);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let err = |r: f64| (self.eval(r) - y).abs();
        Ok(if err(lo) <= err(hi) { lo } else { hi })
    }
}

impl fmt::Display for PhaseLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseLaw::Power(a) => write!(f, "power:a={a}"),
            PhaseLaw::Linear => f.write_str("linear"),
            PhaseLaw::Boussinesq => f.write_str("boussinesq"),
            PhaseLaw::Quartic => f.write_str("quartic"),
            PhaseLaw::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

impl FromStr for PhaseLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(PhaseLaw::Linear),
            "boussinesq" => Ok(PhaseLaw::Boussinesq),
            "quartic" => Ok(PhaseLaw::Quartic),
            other => {
                let a = other
                    .strip_prefix("power:a=")
                    .ok_or_else(|| Error::invalid(format!("unknown phase law {other:?}")))?;
                let a: f64 = a
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad power exponent in {other:?}")))?;
                PhaseLaw::power(a)
            }
        }
    }
}

impl Serialize for PhaseLaw {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
