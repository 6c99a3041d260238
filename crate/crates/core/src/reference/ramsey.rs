//! Undiscounted Ramsey model: `k' = k^α − δk − c`, `c'/c = (αk^(α−1) − δ)/θ`.
//!
//! Feasible paths either converge to the interior saddle `(k*, c*)` or drift
//! to `(δ^(1/(α−1)), 0)`; paths above the saddle path exhaust capital in
//! finite time. The classifier and the shooting solver below work on the
//! joint `(k, c)` system.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate, ControlSignal, IntegratorSettings, OpenBox, Trajectory};
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyParams {
    pub alpha: f64,
    pub delta: f64,
    pub theta: f64,
    pub k0: f64,
}

impl RamseyParams {
    pub fn new(alpha: f64, delta: f64, theta: f64, k0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter { key: "alpha", value: alpha, reason: "must lie in (0, 1)" });
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter { key: "delta", value: delta, reason: "must be > 0" });
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidParameter { key: "theta", value: theta, reason: "must be > 0" });
        }
        if theta == 1.0 {
            return Err(Error::InvalidParameter {
                key: "theta",
                value: theta,
                reason: "theta = 1 (log utility) is excluded",
            });
        }
        if !(k0 > 0.0) || !k0.is_finite() {
            return Err(Error::InvalidParameter { key: "k0", value: k0, reason: "must be > 0" });
        }
        Ok(Self { alpha, delta, theta, k0 })
    }

    /// Parameters of the reference phase diagram: α = 0.4, δ = 0.05, θ = 0.5.
    pub fn figure_defaults(k0: f64) -> Self {
        Self { alpha: 0.4, delta: 0.05, theta: 0.5, k0 }
    }

    pub fn with_k0(self, k0: f64) -> Result<Self> {
        Self::new(self.alpha, self.delta, self.theta, k0)
    }

    pub fn steady_state(&self) -> SteadyState {
        let ratio = self.delta / self.alpha;
        let e = 1.0 / (self.alpha - 1.0);
        SteadyState {
            k_star: ratio.powf(e),
            c_star: (1.0 - self.alpha) * ratio.powf(self.alpha * e),
            kind: SteadyStateKind::InteriorSaddle,
        }
    }

    pub fn zero_consumption_point(&self) -> SteadyState {
        SteadyState {
            k_star: self.delta.powf(1.0 / (self.alpha - 1.0)),
            c_star: 0.0,
            kind: SteadyStateKind::ZeroConsumption,
        }
    }

    /// `c` on the `k' = 0` nullcline.
    pub fn k_nullcline(&self, k: f64) -> f64 {
        k.powf(self.alpha) - self.delta * k
    }

    pub fn utility(&self, c: f64) -> f64 {
        c.powf(1.0 - self.theta) / (1.0 - self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyStateKind {
    InteriorSaddle,
    ZeroConsumption,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub k_star: f64,
    pub c_star: f64,
    pub kind: SteadyStateKind,
}

/// Interior saddle and the zero-consumption limit point.
pub fn ramsey_steady_state(params: &RamseyParams) -> (SteadyState, SteadyState) {
    (params.steady_state(), params.zero_consumption_point())
}

/// `(k', c')` of the state and Euler equations.
pub fn ramsey_field(params: &RamseyParams, k: f64, c: f64) -> Result<(f64, f64)> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter { key: "k", value: k, reason: "capital must be positive" });
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter { key: "c", value: c, reason: "consumption must be positive" });
    }
    Ok(raw_field(params, k, c))
}

#[inline]
fn raw_field(p: &RamseyParams, k: f64, c: f64) -> (f64, f64) {
    // Continued past k = 0 so overshooting trial stages stay finite; the
    // integrator localizes the exit on the k > 0 face.
    let kp = k.max(0.0);
    let mpk = p.alpha * k.max(f64::MIN_POSITIVE).powf(p.alpha - 1.0);
    (kp.powf(p.alpha) - p.delta * k - c, c * (mpk - p.delta) / p.theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RamseyClass {
    Saddle,
    HitsZeroCapital,
    ToZeroConsumption,
    /// Not resolved before `t_max`.
    Inconclusive,
}

impl RamseyClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RamseyClass::Saddle => "saddle",
            RamseyClass::HitsZeroCapital => "hits_zero_capital",
            RamseyClass::ToZeroConsumption => "to_zero_consumption",
            RamseyClass::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for RamseyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootSettings {
    pub integrator: IntegratorSettings,
    pub t_max: f64,
    pub ball_radius: f64,
    /// Bisection stops once `hi - lo <= c0_tol * hi`. Paths starting far
    /// from the saddle need c0 to the last bit.
    pub c0_tol: f64,
    pub max_iter: usize,
    /// Integration chunk between classification checks.
    pub chunk: f64,
}

impl Default for ShootSettings {
    fn default() -> Self {
        Self {
            integrator: IntegratorSettings::default().with_max_step(1.0),
            t_max: 2000.0,
            ball_radius: 1e-3,
            c0_tol: 1e-16,
            max_iter: 200,
            chunk: 20.0,
        }
    }
}

fn pair_field(p: RamseyParams) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_t, y, out| {
        let (dk, dc) = raw_field(&p, y[0], y[1]);
        out[0] = dk;
        out[1] = dc;
    }
}

fn pair_domain() -> OpenBox {
    OpenBox::new(vec![0.0, 0.0], vec![f64::INFINITY, f64::INFINITY]).expect("valid box")
}

struct Classified {
    class: RamseyClass,
    /// Path up to the classification time.
    trajectory: Trajectory,
    /// First time inside the ball around the saddle, if any.
    ball_entry: Option<f64>,
}

/// Integrates in chunks until the path is classified.
///
/// With `stop_at_ball` the path is classified as saddle on entering the
/// ball; otherwise the ball is only recorded and the run continues until one
/// of the two invariant outcomes (or `t_max`).
fn classify_path(p: &RamseyParams, k0: f64, c0: f64, s: &ShootSettings, stop_at_ball: bool) -> Result<Classified> {
    let ss = p.steady_state();
    let field = pair_field(*p);
    let domain = pair_domain();
    let mut t = 0.0;
    let mut y = vec![k0, c0];
    let mut full: Option<Trajectory> = None;
    let mut ball_entry = None;
    let in_ball = |y: &[f64]| ((y[0] - ss.k_star).powi(2) + (y[1] - ss.c_star).powi(2)).sqrt() <= s.ball_radius;
    // below the k' = 0 nullcline to the right of k*: k grows, c shrinks, forever
    let in_lower_region = |y: &[f64]| y[0] > ss.k_star && y[1] < p.k_nullcline(y[0]);

    if in_ball(&y) {
        ball_entry = Some(0.0);
        if stop_at_ball {
            let tr = Trajectory::from_samples(vec![0.0], vec![y.clone()], vec![vec![0.0, 0.0]])?;
            return Ok(Classified { class: RamseyClass::Saddle, trajectory: tr, ball_entry });
        }
    }
    while t < s.t_max {
        let t_next = (t + s.chunk).min(s.t_max);
        let piece = integrate(&field, t, &y, t_next, &s.integrator, Some(&domain), &[])?;
        let mut stop: Option<(f64, RamseyClass)> = None;
        for (i, &ti) in piece.times().iter().enumerate() {
            let yi = piece.node_state(i);
            if ball_entry.is_none() && in_ball(yi) {
                ball_entry = Some(ti);
                if stop_at_ball {
                    stop = Some((ti, RamseyClass::Saddle));
                    break;
                }
            }
            if !in_ball(yi) && in_lower_region(yi) {
                stop = Some((ti, RamseyClass::ToZeroConsumption));
                break;
            }
        }
        if stop.is_none() {
            if let Some(ev) = piece.exit_event() {
                // c cannot reach 0 in finite time, so the exit is k = 0
                stop = Some((ev.time, RamseyClass::HitsZeroCapital));
            }
        }
        let piece = match stop {
            Some((ts, _)) if ts < piece.t_max() => piece.truncate(ts)?,
            _ => piece,
        };
        y = piece.final_state();
        t = piece.t_max();
        full = Some(match full {
            None => piece,
            Some(head) => head.append(&piece)?,
        });
        if let Some((_, class)) = stop {
            return Ok(Classified { class, trajectory: full.unwrap(), ball_entry });
        }
    }
    Ok(Classified { class: RamseyClass::Inconclusive, trajectory: full.unwrap(), ball_entry })
}

/// Classifies the path starting at `(k0, c0)`.
pub fn ramsey_classify(params: &RamseyParams, k0: f64, c0: f64, settings: &ShootSettings) -> Result<RamseyClass> {
    if !(k0 > 0.0) || !(c0 > 0.0) {
        return Err(Error::InvalidInput(format!("classification needs k0 > 0 and c0 > 0, got ({k0}, {c0})")));
    }
    Ok(classify_path(params, k0, c0, settings, true)?.class)
}

/// Classifies every `(k0, c0)` pair; output order matches input order.
pub fn ramsey_classify_grid(
    params: &RamseyParams,
    points: &[(f64, f64)],
    settings: &ShootSettings,
    exec: Exec,
) -> Vec<Result<RamseyClass>> {
    par::map(exec, points, |&(k0, c0)| ramsey_classify(params, k0, c0, settings))
}

/// Result of saddle-path shooting.
#[derive(Debug, Clone)]
pub struct SaddlePath {
    pub c0: f64,
    /// `(k, c)` from `t = 0` to `t_max`: the shot path up to its closest
    /// approach to the saddle, continued along the linearized stable manifold.
    pub trajectory: Trajectory,
    pub ball_entry_time: f64,
    /// Time where the linear tail takes over.
    pub splice_time: f64,
    /// `(lower, upper)` brackets visited by the bisection.
    pub brackets: Vec<(f64, f64)>,
}

impl SaddlePath {
    pub fn k(&self, t: f64) -> Result<f64> {
        Ok(self.trajectory.eval(t)?[0])
    }

    pub fn c(&self, t: f64) -> Result<f64> {
        Ok(self.trajectory.eval(t)?[1])
    }

    /// Consumption along the path as an open-loop control for the one-state
    /// problem. Held constant beyond the trajectory's end.
    pub fn consumption_signal(&self) -> ControlSignal {
        consumption_signal(&self.trajectory)
    }
}

/// Open-loop consumption read from a `(k, c)` trajectory. The interpolant is
/// only C¹ across nodes, so every node is declared a kink.
pub fn consumption_signal(trajectory: &Trajectory) -> ControlSignal {
    let tr = trajectory.clone();
    let nodes = tr.times().to_vec();
    ControlSignal::closed_form(1, "ramsey consumption", move |t| {
        let tc = t.clamp(tr.t_min(), tr.t_max());
        vec![tr.eval(tc).expect("clamped")[1]]
    })
    .with_kinks(nodes)
}

/// Splits a `(k, c)` path into the capital trajectory of the one-state
/// problem and the consumption control driving it.
pub fn capital_and_consumption(pair: &Trajectory) -> Result<(Trajectory, ControlSignal)> {
    let times = pair.times().to_vec();
    let mut states = Vec::with_capacity(times.len());
    let mut derivs = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        states.push(vec![pair.node_state(i)[0]]);
        derivs.push(vec![pair.derivative(t)?[0]]);
    }
    let mut capital = Trajectory::from_samples(times, states, derivs)?;
    if let Some(ev) = pair.exit_event() {
        capital = capital.with_exit_event(ev.clone());
    }
    Ok((capital, consumption_signal(pair)))
}

/// Bisection on `c0` between the two divergent outcomes.
pub fn ramsey_shoot(params: &RamseyParams, settings: &ShootSettings) -> Result<SaddlePath> {
    let k0 = params.k0;
    let ss = params.steady_state();
    let side = |c: f64| -> Result<RamseyClass> { Ok(classify_path(params, k0, c, settings, false)?.class) };

    let mut hi = 2.0 * k0.powf(params.alpha) + ss.c_star;
    let mut found_hi = false;
    for _ in 0..60 {
        if side(hi)? == RamseyClass::HitsZeroCapital {
            found_hi = true;
            break;
        }
        hi *= 2.0;
    }
    if !found_hi {
        return Err(Error::BracketNotFound(format!("no c0 exhausting capital from k0 = {k0}")));
    }
    let mut lo = 1e-3 * ss.c_star.min(hi);
    let mut found_lo = false;
    for _ in 0..10 {
        if side(lo)? == RamseyClass::ToZeroConsumption {
            found_lo = true;
            break;
        }
        lo *= 0.1;
    }
    if !found_lo {
        return Err(Error::BracketNotFound(format!("no c0 drifting to zero consumption from k0 = {k0}")));
    }

    let mut brackets = vec![(lo, hi)];
    let mut iterations = 0;
    while hi - lo > settings.c0_tol * hi && iterations < settings.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match side(mid)? {
            RamseyClass::HitsZeroCapital => hi = mid,
            RamseyClass::ToZeroConsumption => lo = mid,
            // stays near the saddle for the whole horizon: resolution reached
            _ => {
                lo = mid;
                hi = mid;
            }
        }
        brackets.push((lo, hi));
        iterations += 1;
    }
    if hi - lo > settings.c0_tol * hi && iterations >= settings.max_iter {
        return Err(Error::Stagnation { iterations, width: hi - lo });
    }
    let c0 = 0.5 * (lo + hi);
    let (trajectory, ball_entry_time, splice_time) = saddle_trajectory(params, c0, settings)?;
    Ok(SaddlePath { c0, trajectory, ball_entry_time, splice_time, brackets })
}

/// Integrates from `(k0, c0)` to the ball, keeps the closest approach to the
/// saddle and continues along the stable eigendirection to `t_max`.
fn saddle_trajectory(p: &RamseyParams, c0: f64, s: &ShootSettings) -> Result<(Trajectory, f64, f64)> {
    let ss = p.steady_state();
    let run = classify_path(p, p.k0, c0, s, true)?;
    let ball_entry = match (run.class, run.ball_entry) {
        (RamseyClass::Saddle, Some(t)) => t,
        _ => {
            return Err(Error::BracketNotFound(format!(
                "shot path from c0 = {c0} never entered the {} ball",
                s.ball_radius
            )))
        }
    };
    // continue past the entry and splice at the closest approach
    let entry_state = run.trajectory.final_state();
    let extra = integrate(
        pair_field(*p),
        ball_entry,
        &entry_state,
        (ball_entry + 400.0).min(s.t_max.max(ball_entry)),
        &s.integrator,
        Some(&pair_domain()),
        &[],
    )?;
    let dist = |y: &[f64]| ((y[0] - ss.k_star).powi(2) + (y[1] - ss.c_star).powi(2)).sqrt();
    let mut best = (ball_entry, dist(&entry_state));
    for (i, &t) in extra.times().iter().enumerate() {
        let d = dist(extra.node_state(i));
        if d < best.1 {
            best = (t, d);
        }
    }
    let splice = best.0;
    let head = if splice > ball_entry { run.trajectory.append(&extra.truncate(splice)?)? } else { run.trajectory };
    if splice >= s.t_max {
        return Ok((head, ball_entry, splice));
    }

    // stable eigenpair of the linearization at the saddle (∂k'/∂k = 0 there)
    let beta = ss.c_star * p.alpha * (p.alpha - 1.0) * ss.k_star.powf(p.alpha - 2.0) / p.theta;
    let root = (-beta).sqrt();
    let mu = -root;
    let y_s = head.eval(splice)?;
    let (dk, dc) = (y_s[0] - ss.k_star, y_s[1] - ss.c_star);
    // (dk, dc) = a·(1, root) + b·(1, −root); keep the stable part
    let a = 0.5 * (dk + dc / root);
    let n_tail = ((s.t_max - splice) / 0.5).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(n_tail + 1);
    let mut states = Vec::with_capacity(n_tail + 1);
    let mut derivs = Vec::with_capacity(n_tail + 1);
    for i in 0..=n_tail {
        let t = if i == n_tail { s.t_max } else { splice + (s.t_max - splice) * i as f64 / n_tail as f64 };
        let e = a * (mu * (t - splice)).exp();
        times.push(t);
        states.push(vec![ss.k_star + e, ss.c_star + root * e]);
        derivs.push(vec![mu * e, mu * root * e]);
    }
    // the tail's first node coincides with the head's last
    states[0] = y_s;
    let tail = Trajectory::from_samples(times, states, derivs)?;
    Ok((head.append(&tail)?, ball_entry, splice))
}

/// Integrates the `(k, c)` system from `(k0, c0)` up to `t_max` or exit.
pub fn ramsey_path(params: &RamseyParams, k0: f64, c0: f64, settings: &ShootSettings) -> Result<Trajectory> {
    classify_path(params, k0, c0, &ShootSettings { ..*settings }, false).map(|c| c.trajectory).or_else(|_| {
        integrate(pair_field(*params), 0.0, &[k0, c0], settings.t_max, &settings.integrator, Some(&pair_domain()), &[])
    })
}

/// Integrates the `(k, c)` system over the full horizon without stopping at
/// the invariant regions; stops early only at `k = 0`.
pub fn ramsey_full_path(params: &RamseyParams, k0: f64, c0: f64, settings: &ShootSettings) -> Result<Trajectory> {
    integrate(pair_field(*params), 0.0, &[k0, c0], settings.t_max, &settings.integrator, Some(&pair_domain()), &[])
}
