//! Physical and scaled PNLS parameters.
//!
//! The physical equation is
//! `i Θ_t + (ε²/2) ΔΘ − |Θ|²Θ + (i + a)Θ − γ Θ* = 0`;
//! the scaled vector system works with `(β, μ, θ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParamError {
    #[error("pump below parametric threshold (gamma = {0} <= 1)")]
    BelowThreshold(f64),
    #[error("negative scaling denominator (a + sqrt(gamma^2 - 1) = {0})")]
    NegativeDenominator(f64),
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("mu = {0} outside [-1, 3]")]
    MuOutOfRange(f64),
    #[error("eps = {0} outside (0, 1)")]
    EpsOutOfRange(f64),
    #[error("box length must be positive, got {0}")]
    NonPositiveBox(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub a: f64,
    pub gamma: f64,
    pub eps: f64,
    pub box_len: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub beta: f64,
    pub mu: f64,
    pub theta: f64,
    pub eps: f64,
    pub box_len: f64,
}

fn check_eps_box(eps: f64, box_len: f64) -> Result<(), ParamError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ParamError::EpsOutOfRange(eps));
    }
    if !(box_len > 0.0) {
        return Err(ParamError::NonPositiveBox(box_len));
    }
    Ok(())
}

// sqrt(γ²−1) without cancellation near γ = 1
fn pump_root(gamma: f64) -> f64 {
    ((gamma - 1.0) * (gamma + 1.0)).sqrt()
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.gamma > 1.0) {
            return Err(ParamError::BelowThreshold(self.gamma));
        }
        let den = self.a + pump_root(self.gamma);
        if !(den > 0.0) {
            return Err(ParamError::NegativeDenominator(den));
        }
        check_eps_box(self.eps, self.box_len)
    }
}

impl ScaledParams {
    /// Build directly from `(β, μ)`; θ is taken from the generating physical parameters.
    pub fn from_beta_mu(beta: f64, mu: f64, eps: f64, box_len: f64) -> Result<Self, ParamError> {
        let p = unscale_params(beta, mu, eps, box_len)?;
        let s = scale_params(&p)?;
        // keep the caller's exact (β, μ), the round trip only supplies θ
        Ok(ScaledParams { beta, mu, ..s })
    }

    /// Complex equilibrium of the physical equation in scaled form: `|A| = 2/√β`, `arg A = θ`.
    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(2.0 / self.beta.sqrt(), self.theta)
    }
}

/// Phase angle θ solving `γ e^{−2iθ} = −√(γ²−1) + i`, on the branch `θ ∈ (−π/2, π/2]`.
pub fn phase_angle(gamma: f64) -> f64 {
    -0.5 * 1.0_f64.atan2(-pump_root(gamma))
}

pub fn scale_params(p: &PhysicalParams) -> Result<ScaledParams, ParamError> {
    p.validate()?;
    let s = pump_root(p.gamma);
    let den = p.a + s;
    Ok(ScaledParams {
        beta: 4.0 / den,
        mu: -(p.a - 3.0 * s) / den,
        theta: phase_angle(p.gamma),
        eps: p.eps,
        box_len: p.box_len,
    })
}

/// Invert the scaling: `a = (3−μ)/β`, `γ = √(1 + ((1+μ)/β)²)`.
///
/// The boundary `μ = −1` is allowed here (it maps to γ = 1) even though
/// `scale_params` rejects the image.
pub fn unscale_params(beta: f64, mu: f64, eps: f64, box_len: f64) -> Result<PhysicalParams, ParamError> {
    if !(beta > 0.0) {
        return Err(ParamError::NonPositiveBeta(beta));
    }
    if !(-1.0..=3.0).contains(&mu) {
        return Err(ParamError::MuOutOfRange(mu));
    }
    check_eps_box(eps, box_len)?;
    let s = (1.0 + mu) / beta;
    Ok(PhysicalParams {
        a: (3.0 - mu) / beta,
        gamma: s.hypot(1.0),
        eps,
        box_len,
    })
}

pub fn equilibrium_amplitude(p: &PhysicalParams) -> Result<Complex64, ParamError> {
    Ok(scale_params(p)?.amplitude())
}

/// Right side of the physical equation for a spatially constant field,
/// `−|Θ|²Θ + (i + a)Θ − γΘ*` (zero at an equilibrium).
pub fn uniform_residual(p: &PhysicalParams, theta: Complex64) -> Complex64 {
    -theta.norm_sqr() * theta + Complex64::new(p.a, 1.0) * theta - p.gamma * theta.conj()
}
