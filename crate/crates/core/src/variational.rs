//! Linearization along a reference trajectory: transition matrices, the
//! finite-horizon state gradient of the payoff, adjoint paths and the
//! finite-difference oracles that cross-check them.
//!
//! Every routine here reads `x̂(t)` from the trajectory's dense output rather
//! than re-integrating the state, so unstable references (a saddle path)
//! are followed exactly as given.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate, ControlSignal, IntegratorSettings, OpenBox, Trajectory};
use crate::problem::{ControlProblem, DEFAULT_FD_STEP};
use crate::verdict::{ConditionVerdict, Status};

/// Integrator settings used by the variational routines unless overridden.
///
/// The short maximum step keeps the cubic dense output well below 10⁻⁸.
pub fn variational_settings() -> IntegratorSettings {
    IntegratorSettings::precise().with_max_step(0.05)
}

/// How the tail of a horizon scan is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPolicy {
    /// Fraction of the horizon range (measured from the anchor) forming the tail.
    pub window_fraction: f64,
    /// Absolute per-component tolerance.
    pub tol: f64,
    /// Points of the geometric part of generated horizon grids.
    pub grid_points: usize,
}

impl Default for TailPolicy {
    fn default() -> Self {
        Self { window_fraction: 0.25, tol: 1e-4, grid_points: 200 }
    }
}

impl TailPolicy {
    /// Start of the tail window for samples spanning `[start, end]`.
    pub fn window_start(&self, start: f64, end: f64) -> f64 {
        end - self.window_fraction * (end - start)
    }
}

/// Horizons `τ, τ + d_1, ...` with `d` geometric from 1 to `t_max − τ`, merged
/// with a uniform grid of spacing `dense` over the last 7/8 of the range.
pub fn horizon_grid(tau: f64, t_max: f64, geometric_points: usize, dense: Option<f64>) -> Result<Vec<f64>> {
    let len = t_max - tau;
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::InvalidInput(format!("horizon grid needs t_max > tau, got [{tau}, {t_max}]")));
    }
    let mut grid = vec![tau];
    let first = len.min(1.0);
    let n = geometric_points.max(2);
    let ratio = (len / first).powf(1.0 / (n - 1) as f64);
    let mut d = first;
    for _ in 0..n {
        grid.push(tau + d.min(len));
        d *= ratio;
    }
    if let Some(h) = dense {
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("dense spacing must be positive, got {h}")));
        }
        let lo = tau + len / 8.0;
        let count = ((tau + len - lo) / h).ceil() as usize;
        for i in 0..=count {
            grid.push((lo + i as f64 * h).min(t_max));
        }
    }
    grid.sort_by(f64::total_cmp);
    let scale = 1e-12 * t_max.abs().max(1.0);
    grid.retain(|&t| t < t_max - scale);
    grid.dedup_by(|a, b| (*a - *b).abs() <= scale);
    grid.push(t_max);
    Ok(grid)
}

fn mat_from_col_major(n: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, &data[..n * n])
}

/// Evaluates the linearization along the reference, recording the first
/// failure so it can be reported instead of a bare non-finite step.
struct Linearizer<'a> {
    problem: &'a ControlProblem,
    trajectory: &'a Trajectory,
    control: &'a ControlSignal,
    error: RefCell<Option<Error>>,
}

impl<'a> Linearizer<'a> {
    fn new(problem: &'a ControlProblem, trajectory: &'a Trajectory, control: &'a ControlSignal) -> Self {
        Self { problem, trajectory, control, error: RefCell::new(None) }
    }

    fn at(&self, t: f64) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let result = self.trajectory.eval(t).and_then(|x| {
            let u = self.control.evaluate(t);
            self.problem.jacobians(&x, &u, t, DEFAULT_FD_STEP)
        });
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                None
            }
        }
    }

    fn explain(&self, e: Error) -> Error {
        self.error.borrow_mut().take().unwrap_or(e)
    }
}

fn check_dims(problem: &ControlProblem, trajectory: &Trajectory, control: &ControlSignal) -> Result<()> {
    if trajectory.dim() != problem.state_dim() || control.dim() != problem.control_dim() {
        return Err(Error::InvalidInput("trajectory or control dimension does not match the problem".into()));
    }
    Ok(())
}

fn require_cover(trajectory: &Trajectory, start: f64, end: f64) -> Result<()> {
    let slack = 1e-12 * end.abs().max(1.0);
    if start < trajectory.t_min() - slack || end > trajectory.t_max() + slack {
        return Err(Error::TrajectoryTooShort { needed: end, start: trajectory.t_min(), end: trajectory.t_max() });
    }
    Ok(())
}

fn breakpoints_within(control: &ControlSignal, a: f64, b: f64) -> Vec<f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    control.breakpoints().into_iter().filter(|&s| s > lo && s < hi).collect()
}

/// `K(t,τ)` along a trajectory, stored through the fundamental matrix
/// `Y(t) = K(t, t₀)`.
#[derive(Debug, Clone)]
pub struct TransitionOperator {
    base_trajectory: Trajectory,
    base_control: ControlSignal,
    dim: usize,
    /// `Y` flattened column-major.
    fundamental: Trajectory,
}

impl TransitionOperator {
    pub fn base_trajectory(&self) -> &Trajectory {
        &self.base_trajectory
    }

    pub fn base_control(&self) -> &ControlSignal {
        &self.base_control
    }

    pub fn initial_time(&self) -> f64 {
        self.fundamental.t_min()
    }

    pub fn t_max(&self) -> f64 {
        self.fundamental.t_max()
    }

    pub fn fundamental(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(mat_from_col_major(self.dim, &self.fundamental.eval(t)?))
    }

    /// `K(t,τ) = Y(t)·Y(τ)⁻¹`; either order of `t` and `τ`.
    pub fn evaluate(&self, t: f64, tau: f64) -> Result<DMatrix<f64>> {
        if t == tau {
            return Ok(DMatrix::identity(self.dim, self.dim));
        }
        let yt = self.fundamental(t)?;
        let ys = self.fundamental(tau)?;
        // K·Y(τ) = Y(t)  ⇔  Y(τ)ᵀ·Kᵀ = Y(t)ᵀ
        let lu = ys.transpose().lu();
        let kt = lu.solve(&yt.transpose()).ok_or(Error::NonFinite { what: "singular fundamental matrix", t: tau })?;
        Ok(kt.transpose())
    }
}

/// Integrates the variational equation `y' = ∂f/∂x·y` along the trajectory
/// from its initial time up to `max(tau, t_grid)`.
pub fn transition_matrix(
    problem: &ControlProblem,
    trajectory: &Trajectory,
    control: &ControlSignal,
    tau: f64,
    t_grid: &[f64],
    settings: &IntegratorSettings,
) -> Result<TransitionOperator> {
    check_dims(problem, trajectory, control)?;
    let t0 = trajectory.t_min();
    let t_end = t_grid.iter().copied().fold(tau, f64::max);
    let t_low = t_grid.iter().copied().fold(tau, f64::min);
    require_cover(trajectory, t_low, t_end)?;
    let n = problem.state_dim();
    let mut y0 = vec![0.0; n * n];
    for i in 0..n {
        y0[i * n + i] = 1.0;
    }
    let lin = Linearizer::new(problem, trajectory, control);
    let field = |t: f64, y: &[f64], out: &mut [f64]| match lin.at(t) {
        Some((a, _)) => {
            let ym = mat_from_col_major(n, y);
            let d = a * ym;
            out.copy_from_slice(d.as_slice());
        }
        None => out.fill(f64::NAN),
    };
    let end = if t_end > t0 { t_end } else { t0 + 1e-9 * t0.abs().max(1.0) };
    let end = end.min(trajectory.t_max());
    let fundamental = if end > t0 {
        integrate(field, t0, &y0, end, settings, None, &breakpoints_within(control, t0, end))
            .map_err(|e| lin.explain(e))?
    } else {
        Trajectory::from_samples(vec![t0], vec![y0], vec![vec![0.0; n * n]])?
    };
    Ok(TransitionOperator { base_trajectory: trajectory.clone(), base_control: control.clone(), dim: n, fundamental })
}

/// `Ĵ_x(τ,T)` sampled over horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JxRecord {
    pub tau: f64,
    pub t_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Running max-norm of the values; the last entry is the bound estimate.
    pub bound_estimate: Vec<f64>,
    /// Set when the reference left the domain before the largest requested
    /// horizon; the grid is cut at that time.
    pub truncated_at: Option<f64>,
}

impl JxRecord {
    pub fn bound(&self) -> f64 {
        self.bound_estimate.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// Value at a horizon that belongs to the grid.
    pub fn at_horizon(&self, horizon: f64) -> Result<&[f64]> {
        let slack = 1e-9 * horizon.abs().max(1.0);
        let i = self.t_grid.partition_point(|&t| t < horizon - slack);
        match self.t_grid.get(i) {
            Some(&t) if (t - horizon).abs() <= slack => Ok(&self.values[i]),
            _ => Err(Error::GridMismatch(format!("horizon {horizon} is not on the grid anchored at {}", self.tau))),
        }
    }

    /// Whether the running bound keeps growing: more than 10% across each of
    /// the last two doublings of `T − τ`.
    pub fn grows_without_bound(&self) -> bool {
        let Some(&last) = self.t_grid.last() else { return false };
        let len = last - self.tau;
        if !(len > 0.0) {
            return false;
        }
        let bound_at = |d: f64| {
            let i = self.t_grid.partition_point(|&t| t - self.tau <= d);
            if i == 0 {
                0.0
            } else {
                self.bound_estimate[i - 1]
            }
        };
        let (b4, b2, b1) = (bound_at(len / 4.0), bound_at(len / 2.0), bound_at(len));
        b4 > 0.0 && b2 > 1.1 * b4 && b1 > 1.1 * b2
    }
}

/// Forward pass of `(K(t,τ), ∫_τ^t K(s,τ)ᵀ ∂g/∂x ds)` from `K(τ,τ) = I`.
pub fn accumulate_jx(
    problem: &ControlProblem,
    trajectory: &Trajectory,
    control: &ControlSignal,
    tau: f64,
    horizons: &[f64],
    settings: &IntegratorSettings,
) -> Result<JxRecord> {
    check_dims(problem, trajectory, control)?;
    if horizons.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::GridMismatch("horizons must be non-decreasing".into()));
    }
    if horizons.first().is_some_and(|&h| h < tau) {
        return Err(Error::GridMismatch(format!("horizons must not precede tau = {tau}")));
    }
    let requested_end = horizons.last().copied().unwrap_or(tau);
    let mut truncated_at = None;
    let mut grid: Vec<f64> = horizons.to_vec();
    if requested_end > trajectory.t_max() {
        match trajectory.exit_event() {
            Some(ev) => {
                truncated_at = Some(ev.time);
                grid.retain(|&t| t <= ev.time);
            }
            None => {
                return Err(Error::TrajectoryTooShort {
                    needed: requested_end,
                    start: trajectory.t_min(),
                    end: trajectory.t_max(),
                })
            }
        }
    }
    let end = grid.last().copied().unwrap_or(tau);
    require_cover(trajectory, tau, end)?;
    let n = problem.state_dim();
    let mut record = JxRecord {
        tau,
        t_grid: grid.clone(),
        values: Vec::with_capacity(grid.len()),
        bound_estimate: Vec::with_capacity(grid.len()),
        truncated_at,
    };
    if grid.is_empty() {
        return Ok(record);
    }
    let mut z0 = vec![0.0; n * n + n];
    for i in 0..n {
        z0[i * n + i] = 1.0;
    }
    let pass = if end > tau {
        let lin = Linearizer::new(problem, trajectory, control);
        let field = |t: f64, z: &[f64], out: &mut [f64]| match lin.at(t) {
            Some((a, gx)) => {
                let k = mat_from_col_major(n, z);
                out[..n * n].copy_from_slice((&a * &k).as_slice());
                let q = k.transpose() * gx;
                out[n * n..].copy_from_slice(q.as_slice());
            }
            None => out.fill(f64::NAN),
        };
        Some(
            integrate(field, tau, &z0, end, settings, None, &breakpoints_within(control, tau, end))
                .map_err(|e| lin.explain(e))?,
        )
    } else {
        None
    };
    let mut running = 0.0f64;
    let mut buf = vec![0.0; n * n + n];
    for &t in &grid {
        let q = if t <= tau {
            vec![0.0; n]
        } else {
            pass.as_ref().expect("integrated").eval_into(t, &mut buf)?;
            buf[n * n..].to_vec()
        };
        running = running.max(q.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        record.values.push(q);
        record.bound_estimate.push(running);
    }
    Ok(record)
}

/// Adjoint path `ψ(·)` with its multiplier and terminal data.
#[derive(Debug, Clone)]
pub struct CostatePath {
    pub lambda: f64,
    pub terminal: (f64, Vec<f64>),
    time_grid: Vec<f64>,
    values: Vec<Vec<f64>>,
    dense: Trajectory,
}

impl CostatePath {
    /// Samples a closed-form costate on `times`; derivatives for the dense
    /// output come from central differences of `f`.
    pub fn from_fn(lambda: f64, times: Vec<f64>, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::GridMismatch("costate needs at least one sample".into()));
        }
        let values: Vec<Vec<f64>> = times.iter().map(|&t| f(t)).collect();
        let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(times.len());
        for &t in &times {
            let h = 1e-5 * t.abs().max(1.0);
            let (p, m) = (f(t + h), f(t - h));
            derivs.push(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect());
        }
        let dense = Trajectory::from_samples(times.clone(), values.clone(), derivs)?;
        let last = times.len() - 1;
        Ok(Self { lambda, terminal: (times[last], values[last].clone()), time_grid: times, values, dense })
    }

    pub fn times(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dense.dim()
    }

    pub fn t_min(&self) -> f64 {
        self.dense.t_min()
    }

    pub fn t_max(&self) -> f64 {
        self.dense.t_max()
    }

    pub fn psi(&self, t: f64) -> Result<Vec<f64>> {
        self.dense.eval(t)
    }

    /// Max-norm of `ψ' + (∂f/∂x)ᵀψ + λ·∂g/∂x` at the midpoints of the time grid.
    pub fn adjoint_residual(
        &self,
        problem: &ControlProblem,
        trajectory: &Trajectory,
        control: &ControlSignal,
    ) -> Result<f64> {
        let mut worst = 0.0f64;
        for w in self.time_grid.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let x = trajectory.eval(t)?;
            let u = control.evaluate(t);
            let (a, gx) = problem.jacobians(&x, &u, t, DEFAULT_FD_STEP)?;
            let psi = DVector::from_vec(self.dense.eval(t)?);
            let dpsi = DVector::from_vec(self.dense.derivative(t)?);
            let r = dpsi + a.transpose() * psi + gx * self.lambda;
            worst = worst.max(r.amax());
        }
        Ok(worst)
    }
}

/// Backward integration of `−ψ' = (∂f/∂x)ᵀψ + λ·∂g/∂x` from `ψ(T) = ψ_T`.
///
/// `tau_grid` points become mandatory nodes, so `psi` is exact there.
pub fn integrate_adjoint(
    problem: &ControlProblem,
    trajectory: &Trajectory,
    control: &ControlSignal,
    terminal: (f64, &[f64]),
    lambda: f64,
    tau_grid: &[f64],
    settings: &IntegratorSettings,
) -> Result<CostatePath> {
    check_dims(problem, trajectory, control)?;
    let (horizon, psi_t) = terminal;
    let n = problem.state_dim();
    if psi_t.len() != n {
        return Err(Error::InvalidInput("terminal costate has the wrong dimension".into()));
    }
    let start = tau_grid.iter().copied().fold(horizon, f64::min);
    if tau_grid.iter().any(|&t| t > horizon) {
        return Err(Error::GridMismatch(format!("adjoint grid must lie in [t0, {horizon}]")));
    }
    require_cover(trajectory, start, horizon)?;
    let mut grid: Vec<f64> = tau_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let dense = if start < horizon {
        let lin = Linearizer::new(problem, trajectory, control);
        let field = |t: f64, psi: &[f64], out: &mut [f64]| match lin.at(t) {
            Some((a, gx)) => {
                let p = DVector::from_column_slice(psi);
                let d = -(a.transpose() * p + gx * lambda);
                out.copy_from_slice(d.as_slice());
            }
            None => out.fill(f64::NAN),
        };
        let mut stops: Vec<f64> = breakpoints_within(control, start, horizon);
        stops.extend(grid.iter().copied().filter(|&t| t > start && t < horizon));
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        integrate(field, horizon, psi_t, start, settings, None, &stops).map_err(|e| lin.explain(e))?
    } else {
        Trajectory::from_samples(vec![horizon], vec![psi_t.to_vec()], vec![vec![0.0; n]])?
    };
    if grid.is_empty() {
        grid = dense.times().to_vec();
    }
    let values = grid.iter().map(|&t| dense.eval(t)).collect::<Result<Vec<_>>>()?;
    Ok(CostatePath { lambda, terminal: (horizon, psi_t.to_vec()), time_grid: grid, values, dense })
}

/// Tail statistics of a vector series.
pub(crate) struct TailStats {
    pub mean: Vec<f64>,
    /// max − min per component.
    pub oscillation: Vec<f64>,
    /// Some component's increments change sign in the tail.
    pub non_monotone: bool,
    pub samples: usize,
}

#[allow(clippy::needless_range_loop)]
pub(crate) fn tail_stats(times: &[f64], values: &[Vec<f64>], from: f64) -> Option<TailStats> {
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= from).collect();
    if idx.len() < 2 {
        return None;
    }
    let n = values[idx[0]].len();
    let mut mean = vec![0.0; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for &i in &idx {
        for c in 0..n {
            let v = values[i][c];
            mean[c] += v;
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= idx.len() as f64);
    let oscillation: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
    let mut non_monotone = false;
    for c in 0..n {
        let (mut up, mut down) = (false, false);
        for w in idx.windows(2) {
            let d = values[w[1]][c] - values[w[0]][c];
            let scale = 1e-12 * values[w[0]][c].abs().max(1.0);
            up |= d > scale;
            down |= d < -scale;
        }
        non_monotone |= up && down;
    }
    Some(TailStats { mean, oscillation, non_monotone, samples: idx.len() })
}

/// Tail limit of `Ĵ_x(τ,T)` as `T` grows.
///
/// Holds with the tail mean when the tail oscillation is below tolerance;
/// fails when the bound keeps growing or the tail keeps oscillating by at
/// least 100× the tolerance; inconclusive otherwise.
pub fn limit_costate(jx: &JxRecord, tail: &TailPolicy) -> (Option<Vec<f64>>, ConditionVerdict) {
    let series: Vec<(f64, f64)> =
        jx.t_grid.iter().zip(&jx.values).map(|(&t, v)| (t, v.iter().fold(0.0f64, |m, x| m.max(x.abs())))).collect();
    let Some(&end) = jx.t_grid.last() else {
        return (None, ConditionVerdict::new(Status::Inconclusive, tail.tol, "empty horizon grid"));
    };
    if jx.grows_without_bound() {
        let v = ConditionVerdict::new(
            Status::Fails,
            tail.tol,
            format!("unbounded: running bound {:.6e} still growing at T = {end}", jx.bound()),
        );
        return (None, v.with_series(series));
    }
    let from = tail.window_start(jx.tau, end);
    let Some(stats) = tail_stats(&jx.t_grid, &jx.values, from) else {
        let v = ConditionVerdict::new(Status::Inconclusive, tail.tol, "tail window holds fewer than two horizons");
        return (None, v.with_series(series));
    };
    let osc = stats.oscillation.iter().fold(0.0f64, |m, &o| m.max(o));
    let (psi_hat, status, note) = if osc < tail.tol {
        (
            Some(stats.mean.clone()),
            Status::Holds,
            format!("converged: tail oscillation {osc:.3e} over {} horizons", stats.samples),
        )
    } else if osc >= 100.0 * tail.tol && stats.non_monotone {
        (None, Status::Fails, format!("bounded, non-convergent: tail oscillation {osc:.3e}"))
    } else {
        (None, Status::Inconclusive, format!("trend unresolved: tail oscillation {osc:.3e}"))
    };
    (psi_hat, ConditionVerdict::new(status, tail.tol, note).with_series(series))
}

/// Max over the records of `‖ψ(τ) − K(T,τ)ᵀψ(T) − λ·Ĵ_x(τ,T)‖∞`.
#[allow(clippy::too_many_arguments)]
pub fn lemma1_residual(
    problem: &ControlProblem,
    trajectory: &Trajectory,
    control: &ControlSignal,
    costate: &CostatePath,
    jx_by_tau: &[JxRecord],
    horizon: f64,
    settings: &IntegratorSettings,
) -> Result<f64> {
    let taus: Vec<f64> = jx_by_tau.iter().map(|r| r.tau).collect();
    let transition = transition_matrix(problem, trajectory, control, horizon, &taus, settings)?;
    let slack = 1e-9 * horizon.abs().max(1.0);
    if (costate.terminal.0 - horizon).abs() > slack {
        return Err(Error::GridMismatch(format!(
            "costate terminal time {} differs from horizon {horizon}",
            costate.terminal.0
        )));
    }
    let psi_t = DVector::from_column_slice(&costate.terminal.1);
    let mut worst = 0.0f64;
    for rec in jx_by_tau {
        if rec.tau < costate.t_min() - slack || rec.tau > costate.t_max() + slack {
            return Err(Error::GridMismatch(format!("costate does not cover tau = {}", rec.tau)));
        }
        let jx = DVector::from_column_slice(rec.at_horizon(horizon)?);
        let psi = DVector::from_vec(costate.psi(rec.tau)?);
        let k = transition.evaluate(horizon, rec.tau)?;
        let r = psi - k.transpose() * &psi_t - jx * costate.lambda;
        worst = worst.max(r.amax());
    }
    Ok(worst)
}

fn stacked_domain(domain: &OpenBox, copies: usize) -> Result<OpenBox> {
    let lower: Vec<f64> = (0..copies).flat_map(|_| domain.lower().iter().copied()).collect();
    let upper: Vec<f64> = (0..copies).flat_map(|_| domain.upper().iter().copied()).collect();
    OpenBox::new(lower, upper)
}

/// Integrates several copies of the state side by side, each with its payoff
/// quadrature, under the same control and step sequence. Layout:
/// `[x_1 .. x_k, J_1 .. J_k]`. The domain applies to every copy.
pub(crate) fn paired_payoffs(
    problem: &ControlProblem,
    controls: &[&ControlSignal],
    t0: f64,
    starts: &[Vec<f64>],
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    let n = problem.state_dim();
    let k = starts.len();
    if controls.len() != k {
        return Err(Error::InvalidInput("one control per copy is required".into()));
    }
    let mut z0: Vec<f64> = starts.iter().flatten().copied().collect();
    z0.extend(std::iter::repeat_n(0.0, k));
    let domain = stacked_domain(&problem.state_domain, k)?;
    let mut stops: Vec<f64> = controls.iter().flat_map(|c| breakpoints_within(c, t0, t_end)).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let field = |t: f64, z: &[f64], out: &mut [f64]| {
        for (j, c) in controls.iter().enumerate() {
            let u = c.evaluate(t);
            let x = &z[j * n..(j + 1) * n];
            problem.dynamics_into(x, &u, t, &mut out[j * n..(j + 1) * n]);
            out[k * n + j] = problem.payoff(x, &u, t);
        }
    };
    integrate(field, t0, &z0, t_end, settings, Some(&domain), &stops)
}

/// Central difference of `J(û, x_τ + h·e_i, τ, T)` in each state component.
pub fn fd_gradient(
    problem: &ControlProblem,
    control: &ControlSignal,
    tau: f64,
    x_tau: &[f64],
    horizon: f64,
    step: f64,
    settings: &IntegratorSettings,
) -> Result<DVector<f64>> {
    let n = problem.state_dim();
    if x_tau.len() != n {
        return Err(Error::InvalidInput("state has the wrong dimension".into()));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {step}")));
    }
    if horizon < tau {
        return Err(Error::InvalidInput(format!("horizon {horizon} precedes tau {tau}")));
    }
    let mut grad = DVector::zeros(n);
    if horizon == tau {
        return Ok(grad);
    }
    for i in 0..n {
        let mut h = step * x_tau[i].abs().max(1.0);
        let mut attempt = 0;
        loop {
            let mut plus = x_tau.to_vec();
            let mut minus = x_tau.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let feasible = problem.state_domain.contains(&plus) && problem.state_domain.contains(&minus);
            if feasible {
                let tr = paired_payoffs(problem, &[control, control], tau, &[plus, minus], horizon, settings)?;
                match tr.exit_event() {
                    None => {
                        let z = tr.final_state();
                        grad[i] = (z[2 * n] - z[2 * n + 1]) / (2.0 * h);
                        break;
                    }
                    Some(ev) if attempt >= 20 => {
                        let dir = if ev.component < n { "+" } else { "-" };
                        return Err(Error::NonExtendible {
                            time: ev.time,
                            boundary: format!("{dir}e_{i} perturbation: {}", ev.boundary),
                        });
                    }
                    Some(_) => {}
                }
            } else if attempt >= 20 {
                return Err(Error::OutsideDomain { t: tau, state: x_tau.to_vec() });
            }
            h *= 0.5;
            attempt += 1;
        }
    }
    Ok(grad)
}

/// Lower bound of the payoff difference quotient against its linear part:
/// for each `α`, `inf_T [(J(x̂(τ)+αζ) − J(x̂(τ)))/α − ⟨Ĵ_x(τ,T), ζ⟩]`,
/// minimized over the directions.
///
/// Holds when the value extrapolated to `α → 0` from the two smallest widths
/// is at least `−tol`; fails below `−100·tol`.
#[allow(clippy::too_many_arguments)]
pub fn check_assumption_uniform(
    problem: &ControlProblem,
    control: &ControlSignal,
    trajectory: &Trajectory,
    tau: f64,
    directions: &[Vec<f64>],
    alphas: &[f64],
    horizons: &[f64],
    settings: &IntegratorSettings,
) -> Result<ConditionVerdict> {
    const TOL: f64 = 1e-6;
    let n = problem.state_dim();
    if directions.is_empty() || alphas.is_empty() || horizons.is_empty() {
        return Err(Error::InvalidInput("directions, widths and horizons must be non-empty".into()));
    }
    if alphas.windows(2).any(|w| !(w[1] < w[0])) || alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidInput("widths must be positive and strictly decreasing".into()));
    }
    let jx = accumulate_jx(problem, trajectory, control, tau, horizons, settings)?;
    let x_tau = trajectory.eval(tau)?;
    let end = *jx.t_grid.last().unwrap_or(&tau);
    let mut series = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut inf = f64::INFINITY;
        for zeta in directions {
            if zeta.len() != n {
                return Err(Error::InvalidInput("direction has the wrong dimension".into()));
            }
            let moved: Vec<f64> = x_tau.iter().zip(zeta).map(|(x, z)| x + alpha * z).collect();
            if !problem.state_domain.contains(&moved) {
                return Err(Error::OutsideDomain { t: tau, state: moved });
            }
            let pair = if end > tau {
                Some(paired_payoffs(problem, &[control, control], tau, &[x_tau.clone(), moved], end, settings)?)
            } else {
                None
            };
            if let Some(ev) = pair.as_ref().and_then(|p| p.exit_event()) {
                return Err(Error::NonExtendible { time: ev.time, boundary: ev.boundary.clone() });
            }
            let mut buf = vec![0.0; 2 * n + 2];
            for (idx, &t) in jx.t_grid.iter().enumerate() {
                let gap = match &pair {
                    Some(p) if t > tau => {
                        p.eval_into(t, &mut buf)?;
                        buf[2 * n + 1] - buf[2 * n]
                    }
                    _ => 0.0,
                };
                let linear: f64 = jx.values[idx].iter().zip(zeta).map(|(a, b)| a * b).sum();
                inf = inf.min(gap / alpha - linear);
            }
        }
        series.push((alpha, inf));
    }
    let limit = match series.as_slice() {
        [.., (a1, i1), (a2, i2)] => (a1 * i2 - a2 * i1) / (a1 - a2),
        [(_, i)] => *i,
        [] => unreachable!(),
    };
    let status = if limit >= -TOL {
        Status::Holds
    } else if limit < -100.0 * TOL {
        Status::Fails
    } else {
        Status::Inconclusive
    };
    Ok(ConditionVerdict::new(status, TOL, format!("extrapolated lower bound {limit:.6e}")).with_series(series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::solve_state;
    use crate::problem::{integrator_problem, oscillator_problem};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn oscillator_candidate(t_end: f64) -> (ControlProblem, Trajectory, ControlSignal) {
        let p = oscillator_problem(0.5).unwrap();
        let u = ControlSignal::constant(vec![1.0]);
        let tr = solve_state(&p, &u, 0.0, &[0.0, 0.0], t_end, &variational_settings()).unwrap();
        (p, tr, u)
    }

    #[test]
    fn transition_quarter_turn() {
        let (p, tr, u) = oscillator_candidate(10.0);
        let k = transition_matrix(&p, &tr, &u, 0.0, &[FRAC_PI_2], &variational_settings()).unwrap();
        let m = k.evaluate(FRAC_PI_2, 0.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((m - expected).amax() < 1e-9);
        assert!((k.evaluate(3.0, 3.0).unwrap() - DMatrix::identity(2, 2)).amax() == 0.0);
        assert!((k.fundamental(0.0).unwrap() - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn jx_half_turn_and_empty_interval() {
        let (p, tr, u) = oscillator_candidate(10.0);
        let rec = accumulate_jx(&p, &tr, &u, 0.0, &[0.0, PI], &variational_settings()).unwrap();
        assert_eq!(rec.values[0], vec![0.0, 0.0]);
        assert_abs_diff_eq!(rec.values[1][0], -2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rec.values[1][1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn integrator_jx_and_adjoint_agree() {
        let p = integrator_problem(0.1).unwrap();
        let u = ControlSignal::constant(vec![1.0]);
        let s = variational_settings();
        let tr = solve_state(&p, &u, 0.0, &[0.0], 50.0, &s).unwrap();
        let rec = accumulate_jx(&p, &tr, &u, 0.0, &[50.0], &s).unwrap();
        let expected = (1.0 - (-5.0f64).exp()) / 0.1;
        assert_abs_diff_eq!(rec.values[0][0], expected, epsilon = 1e-9);
        let adj = integrate_adjoint(&p, &tr, &u, (50.0, &[0.0]), 1.0, &[0.0], &s).unwrap();
        assert_abs_diff_eq!(adj.values()[0][0], expected, epsilon = 1e-9);
        let g = fd_gradient(&p, &u, 0.0, &[0.0], 50.0, 1e-4, &s).unwrap();
        assert_abs_diff_eq!(g[0], expected, epsilon = 1e-6);
    }

    #[test]
    fn homogeneous_adjoint_is_constant_for_integrator() {
        let p = integrator_problem(0.1).unwrap();
        let u = ControlSignal::constant(vec![1.0]);
        let s = variational_settings();
        let tr = solve_state(&p, &u, 0.0, &[0.0], 30.0, &s).unwrap();
        let adj = integrate_adjoint(&p, &tr, &u, (30.0, &[2.5]), 0.0, &[0.0, 10.0, 20.0], &s).unwrap();
        for v in adj.values() {
            assert_eq!(v[0], 2.5);
        }
    }

    #[test]
    fn limit_costate_verdicts() {
        let s = variational_settings();
        let p = integrator_problem(0.1).unwrap();
        let u = ControlSignal::constant(vec![1.0]);
        let tr = solve_state(&p, &u, 0.0, &[0.0], 400.0, &s).unwrap();
        let grid = horizon_grid(0.0, 400.0, 200, None).unwrap();
        let rec = accumulate_jx(&p, &tr, &u, 0.0, &grid, &s).unwrap();
        let (psi, v) = limit_costate(&rec, &TailPolicy::default());
        assert!(v.holds(), "{}", v.note);
        assert_abs_diff_eq!(psi.unwrap()[0], 10.0, epsilon = 1e-4);

        let p0 = integrator_problem(0.0).unwrap();
        let tr0 = solve_state(&p0, &u, 0.0, &[0.0], 400.0, &s).unwrap();
        let rec0 = accumulate_jx(&p0, &tr0, &u, 0.0, &grid, &s).unwrap();
        assert!(rec0.grows_without_bound());
        assert!(limit_costate(&rec0, &TailPolicy::default()).1.fails());

        let (po, tro, uo) = oscillator_candidate(400.0);
        let dense = horizon_grid(0.0, 400.0, 200, Some(0.05)).unwrap();
        let reco = accumulate_jx(&po, &tro, &uo, 0.0, &dense, &s).unwrap();
        assert!(!reco.grows_without_bound());
        let (none, vo) = limit_costate(&reco, &TailPolicy::default());
        assert!(none.is_none() && vo.fails(), "{}", vo.note);
    }

    #[test]
    fn horizon_grid_shape() {
        let g = horizon_grid(2.0, 102.0, 50, Some(1.0)).unwrap();
        assert_eq!(g[0], 2.0);
        assert_eq!(*g.last().unwrap(), 102.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(horizon_grid(5.0, 5.0, 10, None).is_err());
    }

    #[test]
    fn fd_gradient_empty_interval_is_zero() {
        let (p, _, u) = oscillator_candidate(1.0);
        let g = fd_gradient(&p, &u, 3.0, &[0.1, 0.2], 3.0, 1e-6, &variational_settings()).unwrap();
        assert_eq!(g.amax(), 0.0);
    }

    #[test]
    fn accumulate_rejects_short_trajectory() {
        let (p, tr, u) = oscillator_candidate(5.0);
        let e = accumulate_jx(&p, &tr, &u, 0.0, &[10.0], &variational_settings()).unwrap_err();
        assert!(matches!(e, Error::TrajectoryTooShort { .. }));
    }
}
