//! Finite-horizon payoff comparisons: needle variations and empirical
//! overtaking tests between a candidate control and its challengers.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{solve_state, ControlSignal, IntegratorSettings};
use crate::problem::ControlProblem;
use crate::variational::{accumulate_jx, paired_payoffs};

/// Control `u` applied on `(tau − alpha, tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedleSpec {
    pub tau: f64,
    pub alpha: f64,
    pub u: Vec<f64>,
}

impl NeedleSpec {
    pub fn new(tau: f64, alpha: f64, u: Vec<f64>) -> Self {
        Self { tau, alpha, u }
    }

    fn validate(&self, problem: &ControlProblem, horizon: f64) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidInput(format!("needle width must be positive, got {}", self.alpha)));
        }
        if self.tau - self.alpha < problem.initial_time || self.tau > horizon {
            return Err(Error::InvalidInput(format!(
                "needle ({}, {}] is not inside [{}, {horizon}]",
                self.tau - self.alpha,
                self.tau,
                problem.initial_time
            )));
        }
        if !problem.control_set.contains(&self.u, 1e-12) {
            return Err(Error::InvalidInput(format!("needle value {:?} is outside the control set", self.u)));
        }
        Ok(())
    }
}

/// `J(u, x0, t0, T) = ∫_{t0}^{T} g dt`, accumulated alongside the state.
pub fn finite_horizon_value(
    problem: &ControlProblem,
    control: &ControlSignal,
    x0: &[f64],
    t0: f64,
    horizon: f64,
    settings: &IntegratorSettings,
) -> Result<f64> {
    if horizon < t0 {
        return Err(Error::InvalidInput(format!("horizon {horizon} precedes the initial time {t0}")));
    }
    if horizon == t0 {
        return Ok(0.0);
    }
    let tr = paired_payoffs(problem, &[control], t0, &[x0.to_vec()], horizon, settings)?;
    if let Some(ev) = tr.exit_event() {
        return Err(Error::NonExtendible { time: ev.time, boundary: ev.boundary.clone() });
    }
    Ok(tr.final_state()[problem.state_dim()])
}

/// `J(needled) − J(base)` from the problem's initial data, integrated as one
/// paired system.
pub fn needle_gap(
    problem: &ControlProblem,
    base: &ControlSignal,
    needle: &NeedleSpec,
    horizon: f64,
    settings: &IntegratorSettings,
) -> Result<f64> {
    needle.validate(problem, horizon)?;
    let needled = base.with_needle(needle.tau, needle.alpha, needle.u.clone())?;
    let x0 = problem.initial_state.clone();
    let tr = paired_payoffs(problem, &[base, &needled], problem.initial_time, &[x0.clone(), x0], horizon, settings)?;
    if let Some(ev) = tr.exit_event() {
        return Err(Error::NonExtendible { time: ev.time, boundary: ev.boundary.clone() });
    }
    let z = tr.final_state();
    let n = problem.state_dim();
    Ok(z[2 * n + 1] - z[2 * n])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedleRow {
    pub alpha: f64,
    /// `ΔJ_T(α)/α`.
    pub quotient: f64,
    /// `|quotient − prediction|`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedleReport {
    pub tau: f64,
    pub u: Vec<f64>,
    pub horizon: f64,
    /// `⟨Ĵ_x(τ,T), y(τ)⟩ + g(x̂(τ),u,τ) − g(x̂(τ),û(τ),τ)`.
    pub prediction: f64,
    pub rows: Vec<NeedleRow>,
    /// Least-squares slope of `log error` against `log α`; `None` when the
    /// errors sit at rounding level.
    pub order: Option<f64>,
}

impl NeedleReport {
    /// Largest `error/α` over the rows.
    pub fn constant(&self) -> f64 {
        self.rows.iter().map(|r| r.error / r.alpha).fold(0.0, f64::max)
    }
}

/// Tabulates needle difference quotients against the first-order prediction.
pub fn needle_limit_check(
    problem: &ControlProblem,
    base: &ControlSignal,
    tau: f64,
    u: &[f64],
    horizon: f64,
    alphas: &[f64],
    settings: &IntegratorSettings,
) -> Result<NeedleReport> {
    if alphas.is_empty() || alphas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("needle widths must be non-empty and strictly decreasing".into()));
    }
    let t0 = problem.initial_time;
    let trajectory = solve_state(problem, base, t0, &problem.initial_state, horizon, settings)?;
    if let Some(ev) = trajectory.exit_event() {
        return Err(Error::NonExtendible { time: ev.time, boundary: ev.boundary.clone() });
    }
    let jx = accumulate_jx(problem, &trajectory, base, tau, &[tau, horizon], settings)?;
    let x = trajectory.eval(tau)?;
    let u_hat = base.evaluate(tau);
    let y = problem.dynamics(&x, u, tau) - problem.dynamics(&x, &u_hat, tau);
    let prediction = DVector::from_column_slice(&jx.values[1]).dot(&y) + problem.payoff(&x, u, tau)
        - problem.payoff(&x, &u_hat, tau);
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let gap = needle_gap(problem, base, &NeedleSpec::new(tau, alpha, u.to_vec()), horizon, settings)?;
        let quotient = gap / alpha;
        rows.push(NeedleRow { alpha, quotient, error: (quotient - prediction).abs() });
    }
    let floor = 1e-11 * prediction.abs().max(1.0);
    let usable: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.error > floor).map(|r| (r.alpha.ln(), r.error.ln())).collect();
    let order = if usable.len() >= 2 {
        let m = usable.len() as f64;
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / m;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    Ok(NeedleReport { tau, u: u.to_vec(), horizon, prediction, rows, order })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OvertakingVerdict {
    #[serde(rename = "consistent_OO")]
    ConsistentOo,
    #[serde(rename = "consistent_WOO_only")]
    ConsistentWooOnly,
    #[serde(rename = "violates_WOO")]
    ViolatesWoo,
    NonExtendibleChallenger,
    Inconclusive,
}

impl OvertakingVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            OvertakingVerdict::ConsistentOo => "consistent_OO",
            OvertakingVerdict::ConsistentWooOnly => "consistent_WOO_only",
            OvertakingVerdict::ViolatesWoo => "violates_WOO",
            OvertakingVerdict::NonExtendibleChallenger => "non_extendible_challenger",
            OvertakingVerdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for OvertakingVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Evidence for one checkpoint `T`: whether some `T' ≥ T` has a gap within
/// `eps`, and whether some has a gap above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEvidence {
    pub checkpoint: f64,
    pub some_within_eps: bool,
    pub some_above_eps: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OvertakingReport {
    #[serde(skip)]
    pub candidate: Option<ControlSignal>,
    #[serde(skip)]
    pub challenger: Option<ControlSignal>,
    pub eps: f64,
    /// `(T', J(challenger) − J(candidate))`.
    pub horizon_samples: Vec<(f64, f64)>,
    pub checkpoints: Vec<CheckpointEvidence>,
    /// Exit time of the challenger, if it leaves the state domain.
    pub challenger_exit: Option<f64>,
    /// Range of the challenger's first control component over the samples.
    pub challenger_range: (f64, f64),
    pub verdict: OvertakingVerdict,
}

impl OvertakingReport {
    pub fn max_gap(&self) -> f64 {
        self.horizon_samples.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Spacing of the horizon samples.
pub const GAP_SPACING: f64 = 0.01;

/// Samples `gap(T')` up to `t_max` and classifies the candidate against the
/// challenger.
///
/// Recurrence is judged on the doubling windows `[t_max/8, t_max/4]`,
/// `[t_max/4, t_max/2]` and `[t_max/2, t_max]`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_overtaking_test(
    problem: &ControlProblem,
    candidate: &ControlSignal,
    challenger: &ControlSignal,
    eps: f64,
    checkpoints: &[f64],
    t_max: f64,
    settings: &IntegratorSettings,
) -> Result<OvertakingReport> {
    let t0 = problem.initial_time;
    if !(t_max > t0) {
        return Err(Error::InvalidInput(format!("t_max must exceed the initial time, got {t_max}")));
    }
    let n = problem.state_dim();
    let x0 = problem.initial_state.clone();
    let lone = paired_payoffs(problem, &[candidate], t0, std::slice::from_ref(&x0), t_max, settings)?;
    if let Some(ev) = lone.exit_event() {
        return Err(Error::NonExtendible { time: ev.time, boundary: format!("candidate: {}", ev.boundary) });
    }
    let pair = paired_payoffs(problem, &[candidate, challenger], t0, &[x0.clone(), x0], t_max, settings)?;
    let end = pair.t_max();
    let count = ((end - t0) / GAP_SPACING).floor() as usize;
    let mut samples = Vec::with_capacity(count + 1);
    let mut buf = vec![0.0; 2 * n + 2];
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 1..=count {
        let t = t0 + i as f64 * GAP_SPACING;
        if t > end {
            break;
        }
        pair.eval_into(t, &mut buf)?;
        samples.push((t, buf[2 * n + 1] - buf[2 * n]));
        let u = challenger.evaluate(t)[0];
        range = (range.0.min(u), range.1.max(u));
    }
    let challenger_exit = pair.exit_event().map(|ev| ev.time);
    let evidence: Vec<CheckpointEvidence> = checkpoints
        .iter()
        .map(|&c| {
            let later = samples.iter().filter(|p| p.0 >= c);
            let (mut within, mut above) = (false, false);
            for p in later {
                within |= p.1 <= eps;
                above |= p.1 > eps;
            }
            CheckpointEvidence { checkpoint: c, some_within_eps: within, some_above_eps: above }
        })
        .collect();
    let verdict = if challenger_exit.is_some() {
        OvertakingVerdict::NonExtendibleChallenger
    } else {
        classify_gaps(&samples, eps, t0, t_max)
    };
    Ok(OvertakingReport {
        candidate: Some(candidate.clone()),
        challenger: Some(challenger.clone()),
        eps,
        horizon_samples: samples,
        checkpoints: evidence,
        challenger_exit,
        challenger_range: range,
        verdict,
    })
}

fn classify_gaps(samples: &[(f64, f64)], eps: f64, t0: f64, t_max: f64) -> OvertakingVerdict {
    let len = t_max - t0;
    let window = |a: f64, b: f64| samples.iter().filter(move |p| p.0 >= t0 + a * len && p.0 <= t0 + b * len);
    let windows = [(0.125, 0.25), (0.25, 0.5), (0.5, 1.0)];
    if window(0.125, 1.0).next().is_none() {
        return OvertakingVerdict::Inconclusive;
    }
    if window(0.125, 1.0).all(|p| p.1 <= eps) {
        return OvertakingVerdict::ConsistentOo;
    }
    if window(0.5, 1.0).all(|p| p.1 > eps) {
        return OvertakingVerdict::ViolatesWoo;
    }
    let recurring = windows.iter().all(|&(a, b)| {
        let below = window(a, b).any(|p| p.1 <= eps);
        let above = window(a, b).any(|p| p.1 > eps);
        below && above
    });
    if recurring {
        OvertakingVerdict::ConsistentWooOnly
    } else {
        OvertakingVerdict::Inconclusive
    }
}

/// Control `0` on `[t0, s]` and `1` afterwards.
pub fn delayed_start_challenger(s: f64) -> ControlSignal {
    ControlSignal::PiecewiseConstant { breakpoints: vec![s], values: vec![vec![0.0], vec![1.0]] }
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] =
    [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// `∫_a^b f` by composite Gauss-Legendre, split at `breaks` and into pieces
/// no longer than 0.25.
fn quadrature(a: f64, b: f64, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let pieces = ((w[1] - w[0]) / 0.25).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        for p in 0..pieces {
            let lo = w[0] + p as f64 * h;
            let mid = lo + 0.5 * h;
            let mut acc = 0.0;
            for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
                // open nodes: the half-open control convention never matters
                acc += wt * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * acc;
        }
    }
    total
}

/// `Δx₁(T) = ∫_0^T sin(T − t)(u(t) − 1) dt`: the first-coordinate gap between
/// the oscillator driven by `u` and by `u ≡ 1`.
pub fn oscillator_delta_x1(control: &ControlSignal, horizon: f64) -> f64 {
    let bp = control.breakpoints();
    quadrature(0.0, horizon, &bp, |t| (horizon - t).sin() * (control.evaluate(t)[0] - 1.0))
}

/// `∫_a^b sin(t)(u(t) − 1) dt`.
pub fn sine_weighted_deficit(control: &ControlSignal, a: f64, b: f64) -> f64 {
    let bp = control.breakpoints();
    quadrature(a, b, &bp, |t| t.sin() * (control.evaluate(t)[0] - 1.0))
}

/// Recursion of `Δx₁` over whole periods at `T = 2nπ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecursion {
    pub n: u32,
    /// `Δx₁(2nπ)`.
    pub value: f64,
    /// `−Δx₁(2(n−1)π) − ∫_{(2n−1)π}^{2nπ} sin(t)(u−1) dt`, the half-period form.
    pub half_period_form: f64,
    /// `Δx₁(2(n−1)π) − ∫_{2(n−1)π}^{2nπ} sin(t)(u−1) dt`, the full-period form.
    pub full_period_form: f64,
    /// `∫_{(2n−1)π}^{2nπ} sin(t)(u−1) dt`; non-negative whenever `u ≤ 1`.
    pub last_half_integral: f64,
}

pub fn oscillator_period_recursion(control: &ControlSignal, n: u32) -> Result<PeriodRecursion> {
    if n == 0 {
        return Err(Error::InvalidInput("period index must be at least 1".into()));
    }
    let nf = n as f64;
    let end = 2.0 * nf * PI;
    let prev = 2.0 * (nf - 1.0) * PI;
    let value = oscillator_delta_x1(control, end);
    let previous = oscillator_delta_x1(control, prev);
    let last_half_integral = sine_weighted_deficit(control, (2.0 * nf - 1.0) * PI, end);
    Ok(PeriodRecursion {
        n,
        value,
        half_period_form: -previous - last_half_integral,
        full_period_form: previous - sine_weighted_deficit(control, prev, end),
        last_half_integral,
    })
}
