use crate::error::{Error, Result};

/// Closed forms for `x' = u`, `g = e^(−ρt)·x`, `u ∈ [0,1]` along `û ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorReference {
    pub rho: f64,
    pub a0: f64,
    pub lambda: f64,
}

pub fn integrator_reference(rho: f64, a0: f64, lambda: f64) -> Result<IntegratorReference> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter { key: "rho", value: rho, reason: "must be >= 0" });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter { key: "lambda", value: lambda, reason: "must be >= 0" });
    }
    if lambda == 0.0 && a0 == 0.0 {
        return Err(Error::InvalidInput("(lambda, a0) must not vanish".into()));
    }
    Ok(IntegratorReference { rho, a0, lambda })
}

impl IntegratorReference {
    /// `a0 + λe^(−ρt)/ρ` for `ρ > 0`, `a0 − λt` for `ρ = 0`.
    pub fn psi(&self, t: f64) -> f64 {
        if self.rho > 0.0 {
            self.a0 + self.lambda * (-self.rho * t).exp() / self.rho
        } else {
            self.a0 - self.lambda * t
        }
    }

    /// `λe^(−ρt)/ρ`; `None` flags divergence (`ρ = 0` with `λ > 0`).
    pub fn psi_hat(&self, t: f64) -> Option<f64> {
        if self.lambda == 0.0 {
            Some(0.0)
        } else if self.rho > 0.0 {
            Some(self.lambda * (-self.rho * t).exp() / self.rho)
        } else {
            None
        }
    }

    /// `Ĵ_x(τ,T) = ∫_τ^T e^(−ρt) dt`.
    pub fn jx(&self, tau: f64, horizon: f64) -> f64 {
        if self.rho > 0.0 {
            ((-self.rho * tau).exp() - (-self.rho * horizon).exp()) / self.rho
        } else {
            horizon - tau
        }
    }

    /// `∫_0^T e^(−ρt)·t dt`, the payoff of `û ≡ 1` from `x(0) = 0`.
    pub fn candidate_value(&self, horizon: f64) -> f64 {
        if self.rho > 0.0 {
            let r = self.rho;
            (1.0 - (-r * horizon).exp() * (1.0 + r * horizon)) / (r * r)
        } else {
            0.5 * horizon * horizon
        }
    }

    /// Whether `û ≡ 1` maximizes `λe^(−ρt)x + ψu` for all `t >= 0` with this
    /// multiplier: `ψ(t) >= 0` throughout.
    pub fn max_principle_holds(&self) -> bool {
        if self.rho > 0.0 {
            self.a0 >= 0.0
        } else {
            self.lambda == 0.0 && self.a0 > 0.0
        }
    }

    /// True only for the abnormal multiplier `λ = 0`.
    pub fn is_abnormal(&self) -> bool {
        self.lambda == 0.0
    }
}
