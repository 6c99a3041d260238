//! Control problems: dynamics, running payoff, control set and state domain,
//! plus the three built-in examples.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::OpenBox;
use crate::reference::ramsey::RamseyParams;

pub type DynamicsFn = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;
pub type PayoffFn = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64], &[f64], f64) -> DMatrix<f64> + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], &[f64], f64) -> DVector<f64> + Send + Sync>;

/// Parameter map as accepted from the command line (`key=value`).
pub type Params = BTreeMap<String, f64>;

/// Default relative finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControlSet {
    /// Closed box `lower <= u <= upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Finite list of admissible control vectors.
    Finite(Vec<Vec<f64>>),
}

impl ControlSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidInput("box bounds must be non-empty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidInput("box bounds must be finite with lower <= upper".into()));
        }
        Ok(ControlSet::Box { lower, upper })
    }

    pub fn new_finite(members: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidInput("finite control set must be non-empty".into()));
        };
        let m = first.len();
        if m == 0 || members.iter().any(|u| u.len() != m) {
            return Err(Error::InvalidInput("finite control set members must share a positive dimension".into()));
        }
        Ok(ControlSet::Finite(members))
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlSet::Box { lower, .. } => lower.len(),
            ControlSet::Finite(members) => members[0].len(),
        }
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        if u.len() != self.dim() {
            return false;
        }
        match self {
            ControlSet::Box { lower, upper } => {
                u.iter().zip(lower.iter().zip(upper)).all(|(x, (l, h))| *x >= l - tol && *x <= h + tol)
            }
            ControlSet::Finite(members) => members.iter().any(|v| v.iter().zip(u).all(|(a, b)| (a - b).abs() <= tol)),
        }
    }

    /// Tensor grid with `resolution` points per box dimension (at least the
    /// two endpoints, so every vertex is present), or all members of a finite set.
    pub fn sample_grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        match self {
            ControlSet::Finite(members) => members.clone(),
            ControlSet::Box { lower, upper } => {
                let r = resolution.max(2);
                let axes: Vec<Vec<f64>> = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &h)| {
                        if l == h {
                            vec![l]
                        } else {
                            (0..r)
                                .map(|i| if i == r - 1 { h } else { l + (h - l) * i as f64 / (r - 1) as f64 })
                                .collect()
                        }
                    })
                    .collect();
                let mut grid = vec![Vec::new()];
                for axis in &axes {
                    let mut next = Vec::with_capacity(grid.len() * axis.len());
                    for prefix in &grid {
                        for &v in axis {
                            let mut p = prefix.clone();
                            p.push(v);
                            next.push(p);
                        }
                    }
                    grid = next;
                }
                grid
            }
        }
    }
}

/// Normal/abnormal multiplier pair `(lambda, psi0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierPair {
    pub lambda: f64,
    pub psi0: Vec<f64>,
}

impl MultiplierPair {
    pub fn new(lambda: f64, psi0: Vec<f64>) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
        }
        if lambda == 0.0 && psi0.iter().all(|p| *p == 0.0) {
            return Err(Error::InvalidInput("(lambda, psi0) must not vanish".into()));
        }
        Ok(Self { lambda, psi0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    Ramsey,
    Integrator,
    Oscillator,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::Ramsey, Builtin::Integrator, Builtin::Oscillator];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Ramsey => "ramsey",
            Builtin::Integrator => "integrator",
            Builtin::Oscillator => "oscillator",
        }
    }

    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            Builtin::Ramsey => &["alpha", "delta", "theta", "k0"],
            Builtin::Integrator => &["rho"],
            Builtin::Oscillator => &["b"],
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ramsey" => Ok(Builtin::Ramsey),
            "integrator" => Ok(Builtin::Integrator),
            "oscillator" => Ok(Builtin::Oscillator),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }
}

/// An optimal control problem `max ∫ g(x,u,t) dt` subject to `x' = f(x,u,t)`.
///
/// Immutable after construction; cloning shares the underlying closures.
#[derive(Clone)]
pub struct ControlProblem {
    pub name: String,
    state_dim: usize,
    control_dim: usize,
    dynamics: DynamicsFn,
    payoff: PayoffFn,
    dynamics_jac_x: Option<JacobianFn>,
    payoff_grad_x: Option<GradientFn>,
    pub control_set: ControlSet,
    pub state_domain: OpenBox,
    pub initial_state: Vec<f64>,
    pub initial_time: f64,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("analytic_jacobian", &self.dynamics_jac_x.is_some())
            .field("analytic_gradient", &self.payoff_grad_x.is_some())
            .field("control_set", &self.control_set)
            .field("state_domain", &self.state_domain)
            .field("initial_state", &self.initial_state)
            .field("initial_time", &self.initial_time)
            .finish()
    }
}

impl ControlProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        dynamics: DynamicsFn,
        payoff: PayoffFn,
        control_set: ControlSet,
        state_domain: OpenBox,
        initial_state: Vec<f64>,
        initial_time: f64,
    ) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        if initial_state.len() != state_dim || state_domain.dim() != state_dim {
            return Err(Error::InvalidInput("initial state / domain dimension mismatch".into()));
        }
        if !state_domain.contains(&initial_state) {
            return Err(Error::OutsideDomain { t: initial_time, state: initial_state });
        }
        Ok(Self {
            name: name.into(),
            state_dim,
            control_dim: control_set.dim(),
            dynamics,
            payoff,
            dynamics_jac_x: None,
            payoff_grad_x: None,
            control_set,
            state_domain,
            initial_state,
            initial_time,
        })
    }

    pub fn with_dynamics_jacobian(mut self, jac: JacobianFn) -> Self {
        self.dynamics_jac_x = Some(jac);
        self
    }

    pub fn with_payoff_gradient(mut self, grad: GradientFn) -> Self {
        self.payoff_grad_x = Some(grad);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.dynamics_jac_x.is_some() && self.payoff_grad_x.is_some()
    }

    /// Writes `f(x,u,t)` into `out`.
    #[inline]
    pub fn dynamics_into(&self, x: &[f64], u: &[f64], t: f64, out: &mut [f64]) {
        (self.dynamics)(x, u, t, out)
    }

    pub fn dynamics(&self, x: &[f64], u: &[f64], t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.state_dim);
        (self.dynamics)(x, u, t, out.as_mut_slice());
        out
    }

    #[inline]
    pub fn payoff(&self, x: &[f64], u: &[f64], t: f64) -> f64 {
        (self.payoff)(x, u, t)
    }

    /// `(∂f/∂x, ∂g/∂x)` at a point: analytic when supplied, otherwise central
    /// differences with per-component step `h·max(1, |x_i|)`.
    pub fn jacobians(&self, x: &[f64], u: &[f64], t: f64, h: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if !self.state_domain.contains(x) {
            return Err(Error::OutsideDomain { t, state: x.to_vec() });
        }
        let jac = match &self.dynamics_jac_x {
            Some(j) => j(x, u, t),
            None => self.fd_dynamics_jacobian(x, u, t, h)?,
        };
        let grad = match &self.payoff_grad_x {
            Some(g) => g(x, u, t),
            None => self.fd_payoff_gradient(x, u, t, h)?,
        };
        Ok((jac, grad))
    }

    /// Central-difference Jacobian of the dynamics, ignoring any analytic one.
    pub fn fd_dynamics_jacobian(&self, x: &[f64], u: &[f64], t: f64, h: f64) -> Result<DMatrix<f64>> {
        let n = self.state_dim;
        let mut jac = DMatrix::zeros(n, n);
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        for i in 0..n {
            let (xp, xm, step) = self.fd_probe_points(x, i, h, t)?;
            (self.dynamics)(&xp, u, t, &mut plus);
            (self.dynamics)(&xm, u, t, &mut minus);
            for r in 0..n {
                jac[(r, i)] = (plus[r] - minus[r]) / (2.0 * step);
            }
        }
        Ok(jac)
    }

    /// Central-difference gradient of the payoff, ignoring any analytic one.
    pub fn fd_payoff_gradient(&self, x: &[f64], u: &[f64], t: f64, h: f64) -> Result<DVector<f64>> {
        let n = self.state_dim;
        let mut grad = DVector::zeros(n);
        for i in 0..n {
            let (xp, xm, step) = self.fd_probe_points(x, i, h, t)?;
            grad[i] = ((self.payoff)(&xp, u, t) - (self.payoff)(&xm, u, t)) / (2.0 * step);
        }
        Ok(grad)
    }

    fn fd_probe_points(&self, x: &[f64], i: usize, h: f64, t: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {h}")));
        }
        let scale = x[i].abs().max(1.0);
        let floor = 1e-14 * scale;
        let mut step = h * scale;
        // keep both probes well inside: a step comparable to the distance to
        // a finite face wrecks the difference quotient near singular walls
        let dom = &self.state_domain;
        let gap = (x[i] - dom.lower()[i]).min(dom.upper()[i] - x[i]);
        if gap.is_finite() && gap > 0.0 {
            step = step.min(0.01 * gap);
        }
        while step >= floor {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += step;
            xm[i] -= step;
            if self.state_domain.contains(&xp) && self.state_domain.contains(&xm) {
                return Ok((xp, xm, step));
            }
            step *= 0.5;
        }
        Err(Error::OutsideDomain { t, state: x.to_vec() })
    }

    /// `λ·g(x,u,t) + ⟨ψ, f(x,u,t)⟩`.
    pub fn hamiltonian(&self, x: &[f64], u: &[f64], t: f64, psi: &[f64], lambda: f64) -> Result<f64> {
        if !self.state_domain.contains(x) {
            return Err(Error::OutsideDomain { t, state: x.to_vec() });
        }
        let mut f = vec![0.0; self.state_dim];
        (self.dynamics)(x, u, t, &mut f);
        // λ = 0 must not pick up a non-finite payoff.
        let payoff_term = if lambda == 0.0 { 0.0 } else { lambda * (self.payoff)(x, u, t) };
        let h = payoff_term + psi.iter().zip(&f).map(|(p, v)| p * v).sum::<f64>();
        if h.is_finite() {
            Ok(h)
        } else {
            Err(Error::NonFinite { what: "hamiltonian", t })
        }
    }
}

fn require(params: &Params, problem: &'static str, key: &'static str) -> Result<f64> {
    params.get(key).copied().ok_or(Error::MissingParameter { problem, key })
}

/// Builds one of the built-in problems from a parameter map.
///
/// * `ramsey`: `alpha ∈ (0,1)`, `delta > 0`, `theta > 0, theta ≠ 1`, `k0 > 0`,
///   optional `c_max` (default `10·c*`).
/// * `integrator`: `rho ≥ 0`.
/// * `oscillator`: `b > 0`.
pub fn make_builtin_problem(which: Builtin, params: &Params) -> Result<ControlProblem> {
    match which {
        Builtin::Ramsey => {
            let p = RamseyParams::new(
                require(params, "ramsey", "alpha")?,
                require(params, "ramsey", "delta")?,
                require(params, "ramsey", "theta")?,
                require(params, "ramsey", "k0")?,
            )?;
            let c_max = match params.get("c_max") {
                Some(&c) if c > 0.0 && c.is_finite() => c,
                Some(&c) => return Err(Error::InvalidParameter { key: "c_max", value: c, reason: "must be positive" }),
                None => 10.0 * p.steady_state().c_star,
            };
            ramsey_problem(p, c_max)
        }
        Builtin::Integrator => {
            let rho = require(params, "integrator", "rho")?;
            if !(rho >= 0.0) || !rho.is_finite() {
                return Err(Error::InvalidParameter { key: "rho", value: rho, reason: "must be >= 0" });
            }
            integrator_problem(rho)
        }
        Builtin::Oscillator => {
            let b = require(params, "oscillator", "b")?;
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidParameter { key: "b", value: b, reason: "must be > 0" });
            }
            oscillator_problem(b)
        }
    }
}

/// Capital accumulation with CRRA utility; state `k`, control `c`.
pub fn ramsey_problem(p: RamseyParams, c_max: f64) -> Result<ControlProblem> {
    let RamseyParams { alpha, delta, theta, k0 } = p;
    // k^α is continued by 0 below the domain so that trial RK stages that
    // overshoot k = 0 stay finite; the domain exit is caught as an event.
    let dynamics: DynamicsFn = Arc::new(move |x, u, _t, out| {
        let k = x[0];
        out[0] = k.max(0.0).powf(alpha) - delta * k - u[0];
    });
    let payoff: PayoffFn = Arc::new(move |_x, u, _t| u[0].powf(1.0 - theta) / (1.0 - theta));
    let jac: JacobianFn =
        Arc::new(move |x, _u, _t| DMatrix::from_element(1, 1, alpha * x[0].powf(alpha - 1.0) - delta));
    let grad: GradientFn = Arc::new(|_x, _u, _t| DVector::zeros(1));
    let control_set = ControlSet::new_box(vec![1e-9 * c_max], vec![c_max])?;
    Ok(ControlProblem::new(
        "ramsey",
        1,
        dynamics,
        payoff,
        control_set,
        OpenBox::new(vec![0.0], vec![f64::INFINITY])?,
        vec![k0],
        0.0,
    )?
    .with_dynamics_jacobian(jac)
    .with_payoff_gradient(grad))
}

/// `x' = u`, `g = e^(−ρt)·x`, `u ∈ [0,1]`, `x(0) = 0`.
pub fn integrator_problem(rho: f64) -> Result<ControlProblem> {
    let dynamics: DynamicsFn = Arc::new(|_x, u, _t, out| out[0] = u[0]);
    let payoff: PayoffFn = Arc::new(move |x, _u, t| (-rho * t).exp() * x[0]);
    let jac: JacobianFn = Arc::new(|_x, _u, _t| DMatrix::zeros(1, 1));
    let grad: GradientFn = Arc::new(move |_x, _u, t| DVector::from_element(1, (-rho * t).exp()));
    Ok(ControlProblem::new(
        "integrator",
        1,
        dynamics,
        payoff,
        ControlSet::new_box(vec![0.0], vec![1.0])?,
        OpenBox::unbounded(1),
        vec![0.0],
        0.0,
    )?
    .with_dynamics_jacobian(jac)
    .with_payoff_gradient(grad))
}

/// Linear oscillator `x1' = x2`, `x2' = u − x1`, `g = x2 + b·u`, `u ∈ [−1,1]`.
pub fn oscillator_problem(b: f64) -> Result<ControlProblem> {
    let dynamics: DynamicsFn = Arc::new(|x, u, _t, out| {
        out[0] = x[1];
        out[1] = u[0] - x[0];
    });
    let payoff: PayoffFn = Arc::new(move |x, u, _t| x[1] + b * u[0]);
    let jac: JacobianFn = Arc::new(|_x, _u, _t| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    let grad: GradientFn = Arc::new(|_x, _u, _t| DVector::from_vec(vec![0.0, 1.0]));
    Ok(ControlProblem::new(
        "oscillator",
        2,
        dynamics,
        payoff,
        ControlSet::new_box(vec![-1.0], vec![1.0])?,
        OpenBox::unbounded(2),
        vec![0.0, 0.0],
        0.0,
    )?
    .with_dynamics_jacobian(jac)
    .with_payoff_gradient(grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn integrator_builtin_derivatives() {
        let p = make_builtin_problem(Builtin::Integrator, &params(&[("rho", 0.1)])).unwrap();
        assert_eq!(p.dynamics(&[3.0], &[0.25], 7.0)[0], 0.25);
        let (jac, grad) = p.jacobians(&[3.0], &[0.25], 7.0, DEFAULT_FD_STEP).unwrap();
        assert_eq!(jac[(0, 0)], 0.0);
        assert_abs_diff_eq!(grad[0], (-0.7f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn oscillator_builtin_state_matrix() {
        let p = make_builtin_problem(Builtin::Oscillator, &params(&[("b", 0.5)])).unwrap();
        let (jac, grad) = p.jacobians(&[0.3, -2.0], &[0.1], 4.0, DEFAULT_FD_STEP).unwrap();
        assert_eq!(jac, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert_eq!(grad.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn ramsey_builtin_dynamics_and_steady_state_slope() {
        let pr = params(&[("alpha", 0.4), ("delta", 0.05), ("theta", 0.5), ("k0", 10.0)]);
        let p = make_builtin_problem(Builtin::Ramsey, &pr).unwrap();
        let k: f64 = 7.0;
        assert_abs_diff_eq!(p.dynamics(&[k], &[1.2], 0.0)[0], k.powf(0.4) - 0.05 * k - 1.2, epsilon = 1e-14);
        let (jac, grad) = p.jacobians(&[32.0], &[2.4], 0.0, DEFAULT_FD_STEP).unwrap();
        assert_abs_diff_eq!(jac[(0, 0)], 0.0, epsilon = 1e-15);
        assert_eq!(grad[0], 0.0);
        match &p.control_set {
            ControlSet::Box { upper, .. } => assert_abs_diff_eq!(upper[0], 24.0, epsilon = 1e-12),
            _ => panic!("expected box"),
        }
    }

    #[test]
    fn builtin_parameter_errors() {
        assert!(matches!("pendulum".parse::<Builtin>(), Err(Error::UnknownProblem(_))));
        let e = make_builtin_problem(Builtin::Oscillator, &Params::new()).unwrap_err();
        assert_eq!(e, Error::MissingParameter { problem: "oscillator", key: "b" });
        let bad = params(&[("alpha", 0.4), ("delta", 0.05), ("theta", 1.0), ("k0", 10.0)]);
        assert!(matches!(
            make_builtin_problem(Builtin::Ramsey, &bad),
            Err(Error::InvalidParameter { key: "theta", .. })
        ));
        let bad = params(&[("alpha", 1.2), ("delta", 0.05), ("theta", 0.5), ("k0", 10.0)]);
        assert!(matches!(
            make_builtin_problem(Builtin::Ramsey, &bad),
            Err(Error::InvalidParameter { key: "alpha", .. })
        ));
        assert!(make_builtin_problem(Builtin::Integrator, &params(&[("rho", -0.1)])).is_err());
        assert!(make_builtin_problem(Builtin::Oscillator, &params(&[("b", 0.0)])).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let osc = oscillator_problem(0.5).unwrap();
        assert_abs_diff_eq!(osc.hamiltonian(&[0.0, 0.0], &[1.0], 0.0, &[0.0, 1.0], 1.0).unwrap(), 1.5);
        assert_eq!(osc.hamiltonian(&[0.4, 0.1], &[-1.0], 2.0, &[0.0, 0.0], 0.0).unwrap(), 0.0);
        let int = integrator_problem(0.0).unwrap();
        assert_abs_diff_eq!(int.hamiltonian(&[2.0], &[1.0], 0.0, &[3.0], 1.0).unwrap(), 5.0);
    }

    #[test]
    fn hamiltonian_rejects_non_finite_payoff() {
        let p = ramsey_problem(RamseyParams::new(0.4, 0.05, 2.0, 10.0).unwrap(), 10.0).unwrap();
        let e = p.hamiltonian(&[10.0], &[0.0], 0.0, &[1.0], 1.0).unwrap_err();
        assert!(matches!(e, Error::NonFinite { .. }));
    }

    #[test]
    fn fd_jacobian_shrinks_step_near_boundary() {
        let p = ramsey_problem(RamseyParams::new(0.4, 0.05, 0.5, 10.0).unwrap(), 10.0).unwrap();
        let k = 1e-7;
        let fd = p.fd_dynamics_jacobian(&[k], &[1.0], 0.0, 1e-6).unwrap();
        let exact = 0.4 * k.powf(-0.6) - 0.05;
        assert!((fd[(0, 0)] - exact).abs() / exact.abs() < 1e-2);
    }

    #[test]
    fn control_grid_contains_vertices() {
        let set = ControlSet::new_box(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let grid = set.sample_grid(1);
        assert_eq!(grid.len(), 4);
        for v in [[-1.0, 0.0], [-1.0, 2.0], [1.0, 0.0], [1.0, 2.0]] {
            assert!(grid.iter().any(|g| g == &v));
        }
        assert_eq!(set.sample_grid(33).len(), 33 * 33);
        let fin = ControlSet::new_finite(vec![vec![0.0], vec![0.5]]).unwrap();
        assert_eq!(fin.sample_grid(10), vec![vec![0.0], vec![0.5]]);
        assert!(ControlSet::new_finite(vec![]).is_err());
        assert!(ControlSet::new_box(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn multiplier_pair_must_not_vanish() {
        assert!(MultiplierPair::new(0.0, vec![0.0, 0.0]).is_err());
        assert!(MultiplierPair::new(-1.0, vec![1.0]).is_err());
        assert!(MultiplierPair::new(0.0, vec![1.0]).is_ok());
        assert!(MultiplierPair::new(1.0, vec![0.0]).is_ok());
    }
}
