//! Exact evolution `f̂ ↦ e^{itγ(|ξ|)} f̂` in frequency space, evaluation
//! along the curve `x + t^β μ`, and the error field `(2π)^{-n} S_t f − f`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::PhaseLaw;
use crate::spectral::{dot, norm, SobolevIndex, SpectralField};
use crate::summation::expm1_i;

/// Approach curve `x + t^β μ` with `|μ| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftSpec {
    beta: f64,
    mu: Vec<f64>,
}

impl ShiftSpec {
    pub fn new(beta: f64, mu: Vec<f64>) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be finite, got {beta}")));
        }
        if mu.is_empty() || mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mu must be a finite vector"));
        }
        if (norm(&mu) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "mu must be a unit vector, |mu| = {}",
                norm(&mu)
            )));
        }
        Ok(Self { beta, mu })
    }

    /// `μ = e_1` in dimension `n`.
    pub fn along_first_axis(beta: f64, n: usize) -> Result<Self> {
        let mut mu = vec![0.0; n.max(1)];
        mu[0] = 1.0;
        Self::new(beta, mu)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `t^β`, with `0^β = 0` for `β > 0`.
    pub fn displacement(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if t == 0.0 {
            if self.beta > 0.0 {
                Ok(0.0)
            } else {
                Err(Error::UndefinedShift { beta: self.beta })
            }
        } else {
            Ok(t.powf(self.beta))
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "time must be finite and >= 0, got {t}"
        )))
    }
}

fn check_shift_dim(f: &SpectralField, shift: &ShiftSpec) -> Result<()> {
    if shift.mu.len() != f.dim() {
        return Err(Error::invalid(format!(
            "mu has dimension {}, field has dimension {}",
            shift.mu.len(),
            f.dim()
        )));
    }
    Ok(())
}

/// Total phase `t^β μ·ξ + tγ(|ξ|)` picked up by mode `ξ`, given the
/// precomputed displacement `t^β`.
#[inline]
fn mode_phase(xi: &[f64], law: &PhaseLaw, t: f64, shift: Option<(&ShiftSpec, f64)>) -> f64 {
    let dispersive = if t == 0.0 {
        0.0
    } else {
        t * law.eval(norm(xi))
    };
    match shift {
        Some((spec, disp)) => disp * dot(&spec.mu, xi) + dispersive,
        None => dispersive,
    }
}

fn resolve_shift<'a>(
    f: &SpectralField,
    t: f64,
    shift: Option<&'a ShiftSpec>,
) -> Result<Option<(&'a ShiftSpec, f64)>> {
    check_time(t)?;
    shift
        .map(|s| {
            check_shift_dim(f, s)?;
            Ok((s, s.displacement(t)?))
        })
        .transpose()
}

/// `f̂_j ↦ e^{itγ(|ξ_j|)} f̂_j`.
pub fn apply_phase(f: &SpectralField, law: &PhaseLaw, t: f64) -> Result<SpectralField> {
    check_time(t)?;
    Ok(f.map_coeffs(|xi, c| c * Complex64::from_polar(1.0, mode_phase(xi, law, t, None))))
}

/// Phase and curve modulation applied together: `f̂_j ↦ e^{i(t^β μ·ξ_j + tγ)} f̂_j`.
pub fn propagate(
    f: &SpectralField,
    law: &PhaseLaw,
    t: f64,
    shift: Option<&ShiftSpec>,
) -> Result<SpectralField> {
    let shift = resolve_shift(f, t, shift)?;
    Ok(f.map_coeffs(|xi, c| c * Complex64::from_polar(1.0, mode_phase(xi, law, t, shift))))
}

/// `(2π)^{-n} S_{t,γ} f(x)`.
pub fn evaluate(f: &SpectralField, law: &PhaseLaw, t: f64, x: &[f64]) -> Result<Complex64> {
    Ok(apply_phase(f, law, t)?.synthesize(x))
}

/// `(2π)^{-n} S_{t,γ} f(x + t^β μ)`.
pub fn evaluate_shifted(
    f: &SpectralField,
    law: &PhaseLaw,
    t: f64,
    shift: &ShiftSpec,
    x: &[f64],
) -> Result<Complex64> {
    Ok(propagate(f, law, t, Some(shift))?.synthesize(x))
}

#[derive(Debug, Clone)]
pub struct ErrorField {
    /// `ĥ_j = (e^{iθ_j} − 1) f̂_j`
    pub h: SpectralField,
    /// `‖h‖_{L²}`
    pub l2: f64,
    /// `‖f‖_{H^s}`
    pub hs_of_f: f64,
}

/// Frequency-space error `ĥ_j = (e^{i(t^β μ·ξ_j + tγ(|ξ_j|))} − 1) f̂_j`.
pub fn error_field(
    f: &SpectralField,
    law: &PhaseLaw,
    t: f64,
    shift: Option<&ShiftSpec>,
    s: SobolevIndex,
) -> Result<ErrorField> {
    let resolved = resolve_shift(f, t, shift)?;
    let h = f.map_coeffs(|xi, c| expm1_i(mode_phase(xi, law, t, resolved)) * c);
    let l2 = h.l2_norm();
    let hs_of_f = f.sobolev_norm(s);
    debug_assert!(
        l2 <= grid_multiplier_sup(f, law, t, shift, s)? * hs_of_f * (1.0 + 1e-10) + 1e-300,
        "discrete Plancherel bound violated"
    );
    Ok(ErrorField { h, l2, hs_of_f })
}

/// `max_j |e^{iθ_j} − 1| / (1+|ξ_j|²)^{s/2}` over the field's grid.
pub fn grid_multiplier_sup(
    f: &SpectralField,
    law: &PhaseLaw,
    t: f64,
    shift: Option<&ShiftSpec>,
    s: SobolevIndex,
) -> Result<f64> {
    let resolved = resolve_shift(f, t, shift)?;
    Ok(f.grid()
        .modes()
        .map(|xi| expm1_i(mode_phase(xi, law, t, resolved)).norm() / s.weight(norm(xi)))
        .fold(0.0, f64::max))
}
