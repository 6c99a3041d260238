use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Closed forms for the linear oscillator `x1' = x2, x2' = u − x1` with
/// payoff `x2 + b·u` along the candidate `û ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorReference {
    pub b: f64,
}

pub fn oscillator_reference(b: f64) -> Result<OscillatorReference> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter { key: "b", value: b, reason: "must be > 0" });
    }
    Ok(OscillatorReference { b })
}

impl OscillatorReference {
    /// Rotation `K(t,τ)`.
    pub fn transition(&self, t: f64, tau: f64) -> DMatrix<f64> {
        let (s, c) = (t - tau).sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
    }

    /// Candidate state `(1 − cos t, sin t)` from the origin under `û ≡ 1`.
    pub fn state(&self, t: f64) -> [f64; 2] {
        [1.0 - t.cos(), t.sin()]
    }

    /// Normal-case adjoint family `ψ1 = −r cos(t+φ) − 1`, `ψ2 = r sin(t+φ)`.
    /// Only `|r| <= b` keeps `û ≡ 1` a Hamiltonian maximizer.
    pub fn costate(&self, r: f64, phi: f64, t: f64) -> Result<[f64; 2]> {
        if r.abs() > self.b {
            return Err(Error::InvalidParameter { key: "r", value: r, reason: "|r| must not exceed b" });
        }
        Ok(Self::costate_unchecked(r, phi, t))
    }

    /// Same family without the `|r| <= b` admissibility check.
    pub fn costate_unchecked(r: f64, phi: f64, t: f64) -> [f64; 2] {
        [-r * (t + phi).cos() - 1.0, r * (t + phi).sin()]
    }

    pub fn jx(&self, tau: f64, horizon: f64) -> [f64; 2] {
        let d = horizon - tau;
        [d.cos() - 1.0, d.sin()]
    }

    pub fn delta_hamiltonian(&self, u: f64, tau: f64, horizon: f64) -> f64 {
        (u - 1.0) * ((horizon - tau).sin() + self.b)
    }

    /// `H(x̂, 1, t, ψ(r,φ), 1)`, constant in time.
    pub fn hamiltonian_along(&self, r: f64, phi: f64) -> f64 {
        r * phi.sin() + self.b
    }

    pub fn liminf_delta_hamiltonian(&self, u: f64) -> f64 {
        (u - 1.0) * (1.0 + self.b)
    }

    pub fn limsup_delta_hamiltonian(&self, u: f64) -> f64 {
        (u - 1.0) * (self.b - 1.0)
    }

    /// `J(û, 0, 0, T) = 1 − cos T + b·T`.
    pub fn candidate_value(&self, horizon: f64) -> f64 {
        1.0 - horizon.cos() + self.b * horizon
    }

    /// Payoff gap of the challenger that uses `u = 0` on `[0, s]` and `u = 1` afterwards.
    pub fn delayed_start_gap(&self, s: f64, horizon: f64) -> f64 {
        let s = s.min(horizon);
        horizon.cos() - (horizon - s).cos() - self.b * s
    }
}
