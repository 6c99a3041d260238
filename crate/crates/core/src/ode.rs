//! Explicit Runge-Kutta integration with cubic Hermite dense output.
//!
//! Every integration in the crate goes through [`integrate`]: state
//! trajectories, variational matrices, adjoints and payoff quadratures. The
//! engine supports
//!
//! * fixed-step classical RK4 and adaptive Dormand-Prince 5(4),
//! * backward integration (`t_end < t0`) by time reversal of the field,
//! * mandatory step boundaries ("stops") where the field may jump, e.g. the
//!   ends of a needle variation,
//! * exit detection for an open box domain, localized on the step map itself.
//!
//! Inside a step the field is only ever evaluated at times strictly inside
//! the step's closed interval after a one-ulp nudge, so a piecewise-constant
//! control is always read from the piece the step actually covers.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open axis-aligned box; infinite bounds allowed.
///
/// Only the first `dim()` components of a state are checked, so augmented
/// systems (state plus quadratures) can share the state's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl OpenBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidInput("domain bounds must be non-empty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidInput("domain requires lower < upper in every component".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.iter().all(|l| *l == f64::NEG_INFINITY) && self.upper.iter().all(|u| *u == f64::INFINITY)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.lower.iter().zip(&self.upper).zip(x).all(|((l, u), v)| *v > *l && *v < *u)
    }

    /// Smallest signed distance to a finite face (positive inside), with the
    /// component and face it refers to. NaN components count as outside.
    pub fn margin(&self, x: &[f64]) -> Face {
        let mut best = Face { distance: f64::INFINITY, component: 0, upper: false, value: f64::INFINITY };
        for (i, ((l, u), v)) in self.lower.iter().zip(&self.upper).zip(x).enumerate() {
            if v.is_nan() {
                return Face { distance: f64::NEG_INFINITY, component: i, upper: false, value: *l };
            }
            if l.is_finite() && v - l < best.distance {
                best = Face { distance: v - l, component: i, upper: false, value: *l };
            }
            if u.is_finite() && u - v < best.distance {
                best = Face { distance: u - v, component: i, upper: true, value: *u };
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub distance: f64,
    pub component: usize,
    pub upper: bool,
    pub value: f64,
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.upper { "<" } else { ">" };
        write!(f, "x[{}] {} {}", self.component, op, self.value)
    }
}

/// Where and why a trajectory stopped at the domain boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent {
    pub time: f64,
    pub state: Vec<f64>,
    pub component: usize,
    pub boundary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; the step itself for `Rk4Fixed`.
    pub max_step: f64,
    pub method: Method,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-10, max_step: 0.5, method: Method::Rk45Adaptive }
    }
}

impl IntegratorSettings {
    pub fn rk4(step: f64) -> Self {
        Self { max_step: step, method: Method::Rk4Fixed, ..Self::default() }
    }

    /// Tight tolerances for difference quotients of payoffs.
    pub fn precise() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-14, max_step: 0.25, method: Method::Rk45Adaptive }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.rel_tol) || !ok(self.abs_tol) || !ok(self.max_step) {
            return Err(Error::InvalidInput(format!("integrator tolerances and max_step must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Dense solution of an ODE on `[t_min, t_max]`.
///
/// Nodes are stored in increasing time whatever the integration direction.
/// Each node keeps a left and a right derivative so the Hermite interpolant
/// stays exact across jumps of the field at stops.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    d_left: Vec<f64>,
    d_right: Vec<f64>,
    initial_time: f64,
    exit_event: Option<ExitEvent>,
}

impl Trajectory {
    /// Builds a trajectory from samples and their time derivatives, e.g. a
    /// closed-form solution. Times must be strictly increasing.
    pub fn from_samples(times: Vec<f64>, states: Vec<Vec<f64>>, derivatives: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() || times.len() != derivatives.len() {
            return Err(Error::GridMismatch("samples, states and derivatives must have equal non-zero length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("sample times must be strictly increasing".into()));
        }
        let dim = states[0].len();
        if states.iter().chain(&derivatives).any(|s| s.len() != dim) {
            return Err(Error::GridMismatch("inconsistent sample dimension".into()));
        }
        let flat_states: Vec<f64> = states.into_iter().flatten().collect();
        let flat_d: Vec<f64> = derivatives.into_iter().flatten().collect();
        Ok(Self {
            dim,
            initial_time: times[0],
            times,
            states: flat_states,
            d_left: flat_d.clone(),
            d_right: flat_d,
            exit_event: None,
        })
    }

    /// Attaches a domain exit at the final node.
    pub fn with_exit_event(mut self, event: ExitEvent) -> Self {
        self.exit_event = Some(event);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn t_min(&self) -> f64 {
        self.times[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Time the integration started from.
    pub fn initial_time(&self) -> f64 {
        self.initial_time
    }

    /// Time the integration ended at (the exit time if an exit occurred).
    pub fn final_time(&self) -> f64 {
        if self.len() > 1 && self.initial_time == self.t_max() {
            self.t_min()
        } else {
            self.t_max()
        }
    }

    pub fn final_state(&self) -> Vec<f64> {
        self.eval(self.final_time()).expect("final time is inside the span")
    }

    pub fn exit_event(&self) -> Option<&ExitEvent> {
        self.exit_event.as_ref()
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.t_min() && t <= self.t_max()
    }

    fn check_span(&self, t: f64) -> Result<()> {
        if self.covers(t) {
            Ok(())
        } else {
            Err(Error::TrajectoryTooShort { needed: t, start: self.t_min(), end: self.t_max() })
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Hermite interpolation; exact at nodes.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.check_span(t)?;
        let n = self.dim;
        let i = match self.segment(t) {
            Segment::Node(i) => {
                out.copy_from_slice(self.node_state(i));
                return Ok(());
            }
            Segment::Inside(i) => i,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let y0 = &self.states[i * n..(i + 1) * n];
        let y1 = &self.states[(i + 1) * n..(i + 2) * n];
        let d0 = &self.d_right[i * n..(i + 1) * n];
        let d1 = &self.d_left[(i + 1) * n..(i + 2) * n];
        for k in 0..n {
            out[k] = h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k];
        }
        Ok(())
    }

    /// Time derivative of the interpolant. At a node the right derivative is
    /// returned, except at the last node.
    pub fn derivative(&self, t: f64) -> Result<Vec<f64>> {
        self.check_span(t)?;
        let n = self.dim;
        let i = match self.segment(t) {
            Segment::Node(i) => {
                let src = if i + 1 == self.len() { &self.d_left } else { &self.d_right };
                return Ok(src[i * n..(i + 1) * n].to_vec());
            }
            Segment::Inside(i) => i,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let y0 = &self.states[i * n..(i + 1) * n];
        let y1 = &self.states[(i + 1) * n..(i + 2) * n];
        let d0 = &self.d_right[i * n..(i + 1) * n];
        let d1 = &self.d_left[(i + 1) * n..(i + 2) * n];
        Ok((0..n).map(|k| dh00 * y0[k] + dh10 * d0[k] + dh01 * y1[k] + dh11 * d1[k]).collect())
    }

    /// Keeps `[t_min, t_cut]`, adding a node at `t_cut` if needed. Any exit
    /// event after the cut is dropped.
    pub fn truncate(&self, t_cut: f64) -> Result<Trajectory> {
        self.check_span(t_cut)?;
        let n = self.dim;
        let keep = self.times.partition_point(|&x| x < t_cut);
        let mut out = Trajectory {
            dim: n,
            times: self.times[..keep].to_vec(),
            states: self.states[..keep * n].to_vec(),
            d_left: self.d_left[..keep * n].to_vec(),
            d_right: self.d_right[..keep * n].to_vec(),
            initial_time: self.initial_time.min(t_cut),
            exit_event: self.exit_event.clone().filter(|e| e.time <= t_cut),
        };
        let y = self.eval(t_cut)?;
        let d = self.derivative(t_cut)?;
        let d_left = match self.segment(t_cut) {
            Segment::Node(i) => self.d_left[i * n..(i + 1) * n].to_vec(),
            Segment::Inside(_) => d.clone(),
        };
        out.times.push(t_cut);
        out.states.extend_from_slice(&y);
        out.d_left.extend_from_slice(&d_left);
        out.d_right.extend_from_slice(&d_left);
        Ok(out)
    }

    /// Concatenates `tail`, which must start where `self` ends.
    pub fn append(mut self, tail: &Trajectory) -> Result<Trajectory> {
        let n = self.dim;
        if tail.dim != n || tail.t_min() != self.t_max() {
            return Err(Error::GridMismatch("appended trajectory must start at the end of the head".into()));
        }
        let last = self.len() - 1;
        self.d_right[last * n..(last + 1) * n].copy_from_slice(&tail.d_right[..n]);
        self.times.extend_from_slice(&tail.times[1..]);
        self.states.extend_from_slice(&tail.states[n..]);
        self.d_left.extend_from_slice(&tail.d_left[n..]);
        self.d_right.extend_from_slice(&tail.d_right[n..]);
        self.exit_event = tail.exit_event.clone();
        Ok(self)
    }

    fn segment(&self, t: f64) -> Segment {
        // first index with times[idx] >= t
        let idx = self.times.partition_point(|&x| x < t);
        if idx < self.times.len() && self.times[idx] == t {
            Segment::Node(idx)
        } else {
            Segment::Inside(idx - 1)
        }
    }
}

enum Segment {
    Node(usize),
    Inside(usize),
}

/// Vector field `(t, y) -> y'`, written into the output slice.
pub trait Field: Fn(f64, &[f64], &mut [f64]) {}
impl<F: Fn(f64, &[f64], &mut [f64])> Field for F {}

/// Integrates `y' = field(t, y)` from `(t0, y0)` to `t_end` (either direction).
///
/// `domain`, when given, constrains the leading components of the state; the
/// integration stops with an [`ExitEvent`] on the boundary. `stops` are
/// mandatory step boundaries inside the span.
pub fn integrate<F: Field>(
    field: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    settings: &IntegratorSettings,
    domain: Option<&OpenBox>,
    stops: &[f64],
) -> Result<Trajectory> {
    settings.validate()?;
    if !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidInput("integration bounds must be finite".into()));
    }
    let dim = y0.len();
    if let Some(d) = domain {
        if d.dim() > dim {
            return Err(Error::InvalidInput("domain has more components than the state".into()));
        }
        if !d.contains(y0) {
            return Err(Error::OutsideDomain { t: t0, state: y0.to_vec() });
        }
    }
    let mut stepper = Stepper::new(field, t0, t_end, dim, *settings, domain);
    stepper.run(y0, stops)?;
    Ok(stepper.finish())
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Internal integration state in the reversed-time variable
/// `s = dir·(t − t0) >= 0`.
struct Stepper<'d, F> {
    field: F,
    t0: f64,
    dir: f64,
    span: f64,
    dim: usize,
    settings: IntegratorSettings,
    domain: Option<&'d OpenBox>,
    // output in integration order
    times: Vec<f64>,
    states: Vec<f64>,
    d_start: Vec<f64>, // derivative (d/dt) at the node looking into the next step
    d_end: Vec<f64>,   // derivative (d/dt) at the node looking back into the previous step
    exit: Option<ExitEvent>,
    // scratch
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

impl<'d, F: Field> Stepper<'d, F> {
    fn new(
        field: F,
        t0: f64,
        t_end: f64,
        dim: usize,
        settings: IntegratorSettings,
        domain: Option<&'d OpenBox>,
    ) -> Self {
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        Self {
            field,
            t0,
            dir,
            span: (t_end - t0).abs(),
            dim,
            settings,
            domain,
            times: Vec::new(),
            states: Vec::new(),
            d_start: Vec::new(),
            d_end: Vec::new(),
            exit: None,
            k: vec![vec![0.0; dim]; 7],
            tmp: vec![0.0; dim],
        }
    }

    fn time(&self, s: f64) -> f64 {
        self.t0 + self.dir * s
    }

    /// dz/ds at `s`, with the field time nudged one ulp toward `toward`.
    fn eval_s(&self, s: f64, toward: f64, z: &[f64], out: &mut [f64]) -> bool {
        let t = self.time(s);
        let target = self.time(toward);
        let t = if target > t {
            t.next_up()
        } else if target < t {
            t.next_down()
        } else {
            t
        };
        (self.field)(t, z, out);
        let mut finite = true;
        for v in out.iter_mut() {
            *v *= self.dir;
            finite &= v.is_finite();
        }
        finite
    }

    fn push_node(&mut self, s: f64, z: &[f64], dz_end: Option<&[f64]>) {
        self.times.push(self.time(s));
        self.states.extend_from_slice(z);
        match dz_end {
            Some(d) => self.d_end.extend(d.iter().map(|v| v * self.dir)),
            None => self.d_end.extend(std::iter::repeat_n(f64::NAN, self.dim)),
        }
        self.d_start.extend(std::iter::repeat_n(f64::NAN, self.dim));
    }

    fn set_last_start_derivative(&mut self, dz: &[f64]) {
        let n = self.dim;
        let base = self.d_start.len() - n;
        for (i, v) in dz.iter().enumerate() {
            self.d_start[base + i] = v * self.dir;
        }
    }

    fn run(&mut self, y0: &[f64], stops: &[f64]) -> Result<()> {
        let n = self.dim;
        let mut bounds: Vec<f64> =
            stops.iter().map(|&t| self.dir * (t - self.t0)).filter(|&s| s > 0.0 && s < self.span).collect();
        bounds.sort_by(f64::total_cmp);
        bounds.dedup();
        bounds.push(self.span);

        let mut z = y0.to_vec();
        let mut s = 0.0;
        self.push_node(0.0, &z, None);
        if self.span == 0.0 {
            let mut dz = vec![0.0; n];
            if !self.eval_s(0.0, 0.0, &z, &mut dz) {
                return Err(Error::NonFinite { what: "vector field", t: self.t0 });
            }
            self.set_last_start_derivative(&dz);
            let last = self.d_end.len() - n;
            for (d, v) in self.d_end[last..].iter_mut().zip(&dz) {
                *d = v * self.dir;
            }
            return Ok(());
        }

        let time_tol = 1e-9 * self.span.max(1.0);
        let h_floor = 1e-13 * self.span.max(1.0);
        let mut h = (0.01 * self.span.max(1.0)).min(self.settings.max_step).min(self.span);
        let adaptive = self.settings.method == Method::Rk45Adaptive;

        for &seg_end in &bounds {
            // derivative leaving the segment start
            let mut k1 = vec![0.0; n];
            if !self.eval_s(s, seg_end, &z, &mut k1) {
                return Err(Error::NonFinite { what: "vector field", t: self.time(s) });
            }
            self.set_last_start_derivative(&k1);

            while s < seg_end {
                let remaining = seg_end - s;
                let mut step = if adaptive { h.min(self.settings.max_step) } else { self.settings.max_step };
                let last = step >= remaining * (1.0 - 1e-12);
                if last {
                    step = remaining;
                }
                let s_new = if last { seg_end } else { s + step };

                let outcome = if adaptive {
                    self.dp_step(s, &z, &k1, step, s_new)
                } else {
                    self.rk4_step(s, &z, &k1, step, s_new)
                };

                match outcome {
                    StepOutcome::NonFinite => {
                        if let Some(ev) = self.boundary_extrapolation(s, &z, &k1, time_tol) {
                            self.finish_with_exit(ev);
                            return Ok(());
                        }
                        if !adaptive {
                            if let Some(domain) = self.domain {
                                let ev = self.locate_exit(s, &z, &k1, step, domain, time_tol);
                                if ev.residual.abs() <= 1e-6 {
                                    self.finish_with_exit(ev);
                                    return Ok(());
                                }
                            }
                            return Err(Error::NonFinite { what: "vector field", t: self.time(s) });
                        }
                        h = step * 0.25;
                        if h < h_floor {
                            return self.underflow(s, &z, &k1, h, time_tol);
                        }
                        continue;
                    }
                    StepOutcome::Rejected { factor } => {
                        h = step * factor;
                        if h < h_floor {
                            return self.underflow(s, &z, &k1, h, time_tol);
                        }
                        continue;
                    }
                    StepOutcome::Accepted { z_new, dz_end, factor } => {
                        if let Some(domain) = self.domain {
                            if !domain.contains(&z_new) {
                                let ev = self.locate_exit(s, &z, &k1, step, domain, time_tol);
                                self.finish_with_exit(ev);
                                return Ok(());
                            }
                        }
                        if adaptive {
                            // a step cut short to land on a boundary says little about h
                            h = if last { h.max(step * factor) } else { step * factor };
                        }
                        s = s_new;
                        z = z_new;
                        self.push_node(s, &z, Some(&dz_end));
                        if s < seg_end {
                            k1.copy_from_slice(&dz_end);
                            self.set_last_start_derivative(&k1);
                        }
                        if h < h_floor {
                            return self.underflow(s, &z, &k1, h, time_tol);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn dp_step(&mut self, s: f64, z: &[f64], k1: &[f64], h: f64, s_new: f64) -> StepOutcome {
        let n = self.dim;
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        k[0].copy_from_slice(k1);
        let mut finite = true;
        for stage in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..stage {
                    acc += DP_A[stage][j] * k[j][i];
                }
                tmp[i] = z[i] + h * acc;
            }
            let s_stage = if DP_C[stage] == 1.0 { s_new } else { s + DP_C[stage] * h };
            let (_, tail) = k.split_at_mut(stage);
            if !self.eval_s(s_stage, s, &tmp, &mut tail[0]) {
                finite = false;
                break;
            }
        }
        let outcome = if !finite || tmp.iter().any(|v| !v.is_finite()) {
            StepOutcome::NonFinite
        } else {
            // tmp holds the 5th-order solution (stage 7 argument, FSAL)
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for j in 0..7 {
                    e += DP_E[j] * k[j][i];
                }
                let sc = self.settings.abs_tol + self.settings.rel_tol * z[i].abs().max(tmp[i].abs());
                let r = h * e / sc;
                err += r * r;
            }
            let err = (err / n as f64).sqrt();
            if err <= 1.0 {
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                StepOutcome::Accepted { z_new: tmp.clone(), dz_end: k[6].clone(), factor }
            } else {
                StepOutcome::Rejected { factor: (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) }
            }
        };
        self.k = k;
        self.tmp = tmp;
        outcome
    }

    fn rk4_step(&mut self, s: f64, z: &[f64], k1: &[f64], h: f64, s_new: f64) -> StepOutcome {
        let n = self.dim;
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        k[0].copy_from_slice(k1);
        let mut finite = true;
        let coeffs = [0.5, 0.5, 1.0];
        for stage in 1..4 {
            for i in 0..n {
                tmp[i] = z[i] + coeffs[stage - 1] * h * k[stage - 1][i];
            }
            let s_stage = if stage == 3 { s_new } else { s + 0.5 * h };
            let (_, tail) = k.split_at_mut(stage);
            if !self.eval_s(s_stage, s, &tmp, &mut tail[0]) {
                finite = false;
                break;
            }
        }
        let outcome = if finite {
            let z_new: Vec<f64> =
                (0..n).map(|i| z[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i])).collect();
            let mut dz_end = vec![0.0; n];
            if z_new.iter().all(|v| v.is_finite()) && self.eval_s(s_new, s, &z_new, &mut dz_end) {
                StepOutcome::Accepted { z_new, dz_end, factor: 1.0 }
            } else if self.domain.is_some_and(|d| !d.contains(&z_new)) {
                // outside the domain the field may be undefined; let exit
                // localization handle it
                StepOutcome::Accepted { z_new, dz_end: vec![0.0; n], factor: 1.0 }
            } else {
                StepOutcome::NonFinite
            }
        } else {
            StepOutcome::NonFinite
        };
        self.k = k;
        self.tmp = tmp;
        outcome
    }

    /// State after a single step of length `h` from `(s, z)`; `None` when a
    /// stage is non-finite.
    fn single_step(&mut self, s: f64, z: &[f64], k1: &[f64], h: f64) -> Option<Vec<f64>> {
        let outcome = match self.settings.method {
            Method::Rk45Adaptive => {
                // error control is irrelevant when subdividing an accepted step
                let saved = self.settings;
                self.settings.rel_tol = f64::INFINITY;
                self.settings.abs_tol = f64::INFINITY;
                let o = self.dp_step(s, z, k1, h, s + h);
                self.settings = saved;
                o
            }
            Method::Rk4Fixed => self.rk4_step(s, z, k1, h, s + h),
        };
        match outcome {
            StepOutcome::Accepted { z_new, .. } => Some(z_new),
            _ => None,
        }
    }

    /// Finds the crossing inside a step whose end left the domain.
    fn locate_exit(&mut self, s: f64, z: &[f64], k1: &[f64], h: f64, domain: &OpenBox, time_tol: f64) -> Exit {
        let abs_tol = self.settings.abs_tol;
        let (mut lo, mut hi) = (0.0, h);
        let mut f_lo = domain.margin(z).distance;
        let mut f_hi = match self.single_step(s, z, k1, h) {
            Some(zh) => domain.margin(&zh).distance,
            None => f64::NEG_INFINITY,
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut side = 0i8;
        for _ in 0..200 {
            let mut trial = if f_hi.is_finite() && f_lo.is_finite() && f_lo != f_hi {
                lo + (hi - lo) * f_lo / (f_lo - f_hi)
            } else {
                0.5 * (lo + hi)
            };
            if !(trial > lo && trial < hi) {
                trial = 0.5 * (lo + hi);
            }
            let Some(zt) = self.single_step(s, z, k1, trial) else {
                hi = trial;
                f_hi = f64::NEG_INFINITY;
                continue;
            };
            let face = domain.margin(&zt);
            let d = face.distance;
            if d.abs() <= 0.5 * abs_tol || (hi - lo) <= 1e-3 * time_tol {
                best = Some((trial, zt));
                break;
            }
            if d > 0.0 {
                lo = trial;
                f_lo = d;
                if side == 1 {
                    f_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = trial;
                f_hi = d;
                if side == -1 {
                    f_lo *= 0.5;
                }
                side = -1;
            }
        }
        let (sh, mut ze) = match best {
            Some(b) => b,
            None => {
                let zl = self.single_step(s, z, k1, lo).unwrap_or_else(|| z.to_vec());
                (lo, zl)
            }
        };
        let face = domain.margin(&ze);
        let boundary_face = if face.distance.is_finite() { face } else { domain.margin(z) };
        let residual = boundary_face.distance;
        ze[boundary_face.component] = boundary_face.value;
        Exit { s: s + sh, z: ze, face: boundary_face, residual }
    }

    /// Near a boundary where the field blows up the step size collapses
    /// before a step can cross. If the current velocity reaches a face within
    /// the event time tolerance, report the exit there.
    fn boundary_extrapolation(&self, s: f64, z: &[f64], k1: &[f64], time_tol: f64) -> Option<Exit> {
        let domain = self.domain?;
        let mut best: Option<(f64, usize, bool, f64)> = None;
        for i in 0..domain.dim() {
            let v = k1[i];
            let (l, u) = (domain.lower()[i], domain.upper()[i]);
            let candidates = [(l, false, v < 0.0, z[i] - l), (u, true, v > 0.0, u - z[i])];
            for (face, upper, approaching, dist) in candidates {
                if face.is_finite() && approaching && v.is_finite() {
                    let dt = dist / v.abs();
                    if dt <= time_tol && best.is_none_or(|b| dt < b.0) {
                        best = Some((dt, i, upper, face));
                    }
                }
            }
        }
        let (dt, i, upper, value) = best?;
        let mut ze: Vec<f64> = z.iter().zip(k1).map(|(a, b)| a + dt * b).collect();
        ze[i] = value;
        Some(Exit { s: s + dt, z: ze, face: Face { distance: 0.0, component: i, upper, value }, residual: 0.0 })
    }

    /// A collapsed step is an exit when the velocity reaches a face in time.
    fn underflow(&mut self, s: f64, z: &[f64], k1: &[f64], h: f64, time_tol: f64) -> Result<()> {
        match self.boundary_extrapolation(s, z, k1, time_tol) {
            Some(ev) => {
                self.finish_with_exit(ev);
                Ok(())
            }
            None => Err(Error::StepUnderflow { t: self.time(s), h }),
        }
    }

    fn finish_with_exit(&mut self, exit: Exit) {
        let n = self.dim;
        let last = self.times.len() - 1;
        let s_prev = self.dir * (self.times[last] - self.t0);
        let ds = exit.s - s_prev;
        if ds > 0.0 {
            let mut d = vec![0.0; n];
            let z_prev = &self.states[last * n..(last + 1) * n];
            let defined = self.eval_s(exit.s, s_prev, &exit.z, &mut d);
            for i in 0..n {
                let secant = (exit.z[i] - z_prev[i]) / ds;
                if !defined || !d[i].is_finite() {
                    d[i] = secant;
                } else if d[i] * secant < 0.0 {
                    d[i] = 0.0;
                } else if d[i].abs() > 3.0 * secant.abs() {
                    // Fritsch-Carlson bound: the field may blow up at the
                    // face, and the cubic must not overshoot there
                    d[i] = 3.0 * secant;
                }
            }
            self.push_node(exit.s, &exit.z, Some(&d));
        }
        self.exit = Some(ExitEvent {
            time: self.time(exit.s),
            state: exit.z,
            component: exit.face.component,
            boundary: exit.face.to_string(),
        });
    }

    fn finish(self) -> Trajectory {
        let n = self.dim;
        let mut times = self.times;
        let mut states = self.states;
        let mut d_start = self.d_start;
        let mut d_end = self.d_end;
        // Nodes with no recorded derivative on one side copy the other.
        for i in 0..times.len() {
            for k in 0..n {
                let (a, b) = (d_start[i * n + k], d_end[i * n + k]);
                if !a.is_finite() {
                    d_start[i * n + k] = b;
                }
                if !b.is_finite() {
                    d_end[i * n + k] = a;
                }
            }
        }
        let (d_left, d_right) = if self.dir > 0.0 {
            (d_end, d_start)
        } else {
            reverse_blocks(&mut times, 1);
            reverse_blocks(&mut states, n);
            reverse_blocks(&mut d_start, n);
            reverse_blocks(&mut d_end, n);
            // going backward, a step starts at its right end
            (d_start, d_end)
        };
        Trajectory { dim: n, times, states, d_left, d_right, initial_time: self.t0, exit_event: self.exit }
    }
}

fn reverse_blocks(v: &mut Vec<f64>, block: usize) {
    if block == 1 {
        v.reverse();
        return;
    }
    let rows = v.len() / block;
    let mut out = Vec::with_capacity(v.len());
    for r in (0..rows).rev() {
        out.extend_from_slice(&v[r * block..(r + 1) * block]);
    }
    *v = out;
}

struct Exit {
    s: f64,
    z: Vec<f64>,
    face: Face,
    // signed boundary distance before snapping
    residual: f64,
}

enum StepOutcome {
    Accepted { z_new: Vec<f64>, dz_end: Vec<f64>, factor: f64 },
    Rejected { factor: f64 },
    NonFinite,
}

/// Open-loop control `u(t)`.
#[derive(Clone)]
pub enum ControlSignal {
    Constant(Vec<f64>),
    /// `values[i]` applies on `(breakpoints[i-1], breakpoints[i]]`; the first
    /// value extends to −∞ and the last to +∞.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    /// `kinks` lists times where `f` or its derivative may jump.
    ClosedForm {
        dim: usize,
        label: String,
        f: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
        kinks: Vec<f64>,
    },
    /// `base` with the value replaced by `value` on `(lo, hi]`.
    Needle {
        base: Box<ControlSignal>,
        lo: f64,
        hi: f64,
        value: Vec<f64>,
    },
}

impl fmt::Debug for ControlSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSignal::Constant(u) => f.debug_tuple("Constant").field(u).finish(),
            ControlSignal::PiecewiseConstant { breakpoints, values } => {
                f.debug_struct("PiecewiseConstant").field("breakpoints", breakpoints).field("values", values).finish()
            }
            ControlSignal::ClosedForm { dim, label, kinks, .. } => {
                f.debug_struct("ClosedForm").field("dim", dim).field("label", label).field("kinks", kinks).finish()
            }
            ControlSignal::Needle { base, lo, hi, value } => f
                .debug_struct("Needle")
                .field("base", base)
                .field("lo", lo)
                .field("hi", hi)
                .field("value", value)
                .finish(),
        }
    }
}

impl ControlSignal {
    pub fn constant(u: impl Into<Vec<f64>>) -> Self {
        ControlSignal::Constant(u.into())
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidInput("piecewise control needs one more value than breakpoints".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidInput("piecewise values must share a dimension".into()));
        }
        Ok(ControlSignal::PiecewiseConstant { breakpoints, values })
    }

    pub fn closed_form(
        dim: usize,
        label: impl Into<String>,
        f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ControlSignal::ClosedForm { dim, label: label.into(), f: Arc::new(f), kinks: Vec::new() }
    }

    /// Declares times where a closed-form signal is not smooth, so that
    /// integration steps end there. Other signals are returned unchanged.
    pub fn with_kinks(mut self, mut times: Vec<f64>) -> Self {
        if let ControlSignal::ClosedForm { kinks, .. } = &mut self {
            times.sort_by(f64::total_cmp);
            times.dedup();
            *kinks = times;
        }
        self
    }

    /// Needle variation: `value` on `(tau − alpha, tau]`, `self` elsewhere.
    pub fn with_needle(&self, tau: f64, alpha: f64, value: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidInput(format!("needle width must be positive, got {alpha}")));
        }
        if value.len() != self.dim() {
            return Err(Error::InvalidInput("needle value has the wrong dimension".into()));
        }
        Ok(ControlSignal::Needle { base: Box::new(self.clone()), lo: tau - alpha, hi: tau, value })
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlSignal::Constant(u) => u.len(),
            ControlSignal::PiecewiseConstant { values, .. } => values[0].len(),
            ControlSignal::ClosedForm { dim, .. } => *dim,
            ControlSignal::Needle { value, .. } => value.len(),
        }
    }

    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        match self {
            ControlSignal::Constant(u) => u.clone(),
            ControlSignal::PiecewiseConstant { breakpoints, values } => {
                let idx = breakpoints.partition_point(|&b| b < t);
                values[idx].clone()
            }
            ControlSignal::ClosedForm { f, .. } => f(t),
            ControlSignal::Needle { base, lo, hi, value } => {
                if t > *lo && t <= *hi {
                    value.clone()
                } else {
                    base.evaluate(t)
                }
            }
        }
    }

    /// Times where the signal may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ControlSignal::Constant(_) => Vec::new(),
            ControlSignal::ClosedForm { kinks, .. } => kinks.clone(),
            ControlSignal::PiecewiseConstant { breakpoints, .. } => breakpoints.clone(),
            ControlSignal::Needle { base, lo, hi, .. } => {
                let mut b = base.breakpoints();
                b.push(*lo);
                b.push(*hi);
                b.sort_by(f64::total_cmp);
                b.dedup();
                b
            }
        }
    }
}

/// Integrates `x' = f(x, u(t), t)` inside the problem's state domain.
pub fn solve_state(
    problem: &crate::problem::ControlProblem,
    control: &ControlSignal,
    t0: f64,
    x0: &[f64],
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    if control.dim() != problem.control_dim() || x0.len() != problem.state_dim() {
        return Err(Error::InvalidInput("control or state dimension does not match the problem".into()));
    }
    let field = |t: f64, x: &[f64], out: &mut [f64]| {
        let u = control.evaluate(t);
        problem.dynamics_into(x, &u, t, out);
    };
    integrate(field, t0, x0, t_end, settings, Some(&problem.state_domain), &control.breakpoints())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{integrator_problem, oscillator_problem, ramsey_problem};
    use crate::reference::ramsey::RamseyParams;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_is_constant() {
        let v = [1.5, -2.0, 3.25];
        for settings in [IntegratorSettings::default(), IntegratorSettings::rk4(0.3)] {
            let tr =
                integrate(|_t, _y: &[f64], o: &mut [f64]| o.fill(0.0), 2.0, &v, 9.0, &settings, None, &[]).unwrap();
            assert_eq!(tr.final_state(), v.to_vec());
            assert_eq!(tr.eval(4.123).unwrap(), v.to_vec());
        }
    }

    #[test]
    fn exponential_growth() {
        let tr = integrate(
            |_t, y: &[f64], o: &mut [f64]| o[0] = y[0],
            0.0,
            &[1.0],
            1.0,
            &IntegratorSettings::default(),
            None,
            &[],
        )
        .unwrap();
        let e = std::f64::consts::E;
        assert!((tr.final_state()[0] - e).abs() / e < 1e-8);
        // dense output between nodes
        let mid = tr.eval(0.37).unwrap()[0];
        assert!((mid - 0.37f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn backward_integration_reverses_forward() {
        let settings = IntegratorSettings::default();
        let field = |t: f64, y: &[f64], o: &mut [f64]| {
            o[0] = y[1];
            o[1] = -y[0] + 0.1 * t.sin();
        };
        let fwd = integrate(field, 0.0, &[1.0, 0.0], 10.0, &settings, None, &[]).unwrap();
        let yt = fwd.final_state();
        let back = integrate(field, 10.0, &yt, 0.0, &settings, None, &[]).unwrap();
        assert_eq!(back.t_min(), 0.0);
        assert_eq!(back.t_max(), 10.0);
        assert_eq!(back.initial_time(), 10.0);
        assert_eq!(back.final_time(), 0.0);
        let y0 = back.final_state();
        assert!((y0[0] - 1.0).abs() < 10.0 * settings.rel_tol);
        assert!(y0[1].abs() < 10.0 * settings.rel_tol);
        // interpolant is exact at nodes in both directions
        for (i, &t) in back.times().iter().enumerate() {
            assert_eq!(back.eval(t).unwrap(), back.node_state(i).to_vec());
        }
    }

    #[test]
    fn rk4_convergence_order_is_four() {
        let field = |_t: f64, y: &[f64], o: &mut [f64]| {
            o[0] = y[1];
            o[1] = -y[0];
        };
        let err = |h: f64| {
            let tr = integrate(field, 0.0, &[1.0, 0.0], 5.0, &IntegratorSettings::rk4(h), None, &[]).unwrap();
            let y = tr.final_state();
            ((y[0] - 5f64.cos()).powi(2) + (y[1] + 5f64.sin()).powi(2)).sqrt()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let order = (e1 / e2).log2();
        assert!((3.7..=4.3).contains(&order), "order {order}");
    }

    #[test]
    fn stops_split_steps_at_jumps() {
        // y' = 1 on (1, 2], 0 elsewhere: exact answer 1 with stops honoured
        let field = |t: f64, _y: &[f64], o: &mut [f64]| o[0] = if t > 1.0 && t <= 2.0 { 1.0 } else { 0.0 };
        let tr = integrate(field, 0.0, &[0.0], 5.0, &IntegratorSettings::default(), None, &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(tr.final_state()[0], 1.0, epsilon = 1e-14);
        assert!(tr.times().contains(&1.0) && tr.times().contains(&2.0));
        assert_abs_diff_eq!(tr.eval(1.5).unwrap()[0], 0.5, epsilon = 1e-14);
        // backward across the same jumps
        let back = integrate(field, 5.0, &[1.0], 0.0, &IntegratorSettings::default(), None, &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(back.final_state()[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn exit_event_on_boundary() {
        // y' = -1 from y = 1 in (0, inf): exits at t = 1
        let domain = OpenBox::new(vec![0.0], vec![f64::INFINITY]).unwrap();
        let settings = IntegratorSettings::default();
        let tr =
            integrate(|_t, _y: &[f64], o: &mut [f64]| o[0] = -1.0, 0.0, &[1.0], 5.0, &settings, Some(&domain), &[])
                .unwrap();
        let ev = tr.exit_event().expect("exit");
        assert_abs_diff_eq!(ev.time, 1.0, epsilon = 1e-9 * 5.0);
        assert_eq!(tr.t_max(), ev.time);
        assert!(tr.eval(ev.time).unwrap()[0].abs() <= settings.abs_tol);
    }

    #[test]
    fn integrator_state_is_linear() {
        let p = integrator_problem(0.1).unwrap();
        let tr =
            solve_state(&p, &ControlSignal::constant(vec![1.0]), 0.0, &[0.0], 10.0, &IntegratorSettings::default())
                .unwrap();
        assert_abs_diff_eq!(tr.final_state()[0], 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(tr.eval(3.3).unwrap()[0], 3.3, epsilon = 1e-9);
    }

    #[test]
    fn oscillator_returns_after_full_period() {
        let p = oscillator_problem(0.5).unwrap();
        let tr = solve_state(
            &p,
            &ControlSignal::constant(vec![1.0]),
            0.0,
            &[0.0, 0.0],
            2.0 * PI,
            &IntegratorSettings::default(),
        )
        .unwrap();
        let x = tr.final_state();
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(tr.eval(1.0).unwrap()[0], 1.0 - 1f64.cos(), epsilon = 1e-7);
    }

    #[test]
    fn ramsey_overconsumption_exits_at_zero_capital() {
        let p = ramsey_problem(RamseyParams::new(0.4, 0.05, 0.5, 32.0).unwrap(), 24.0).unwrap();
        // stationary at the steady state
        let mut v = [0.0];
        p.dynamics_into(&[32.0], &[2.4], 0.0, &mut v);
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-13);
        let settings = IntegratorSettings::default();
        let tr = solve_state(&p, &ControlSignal::constant(vec![4.0]), 0.0, &[32.0], 200.0, &settings).unwrap();
        let ev = tr.exit_event().expect("capital runs out");
        assert!(ev.time < 200.0 && ev.time > 5.0);
        assert!(tr.eval(ev.time).unwrap()[0].abs() <= settings.abs_tol);
        assert!(tr.node_state(1)[0] < 32.0);
    }

    #[test]
    fn needle_signal_uses_half_open_interval() {
        let base = ControlSignal::constant(vec![1.0]);
        let n = base.with_needle(2.0, 0.5, vec![0.0]).unwrap();
        assert_eq!(n.evaluate(1.5), vec![1.0]);
        assert_eq!(n.evaluate(1.75), vec![0.0]);
        assert_eq!(n.evaluate(2.0), vec![0.0]);
        assert_eq!(n.evaluate(2.0000001), vec![1.0]);
        assert_eq!(n.breakpoints(), vec![1.5, 2.0]);
        let pw = ControlSignal::piecewise(vec![1.0, 3.0], vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(pw.evaluate(1.0), vec![0.0]);
        assert_eq!(pw.evaluate(1.0001), vec![1.0]);
        assert_eq!(pw.evaluate(3.0), vec![1.0]);
        assert_eq!(pw.evaluate(3.5), vec![2.0]);
    }

    #[test]
    fn rejects_bad_settings() {
        let bad = IntegratorSettings { rel_tol: 0.0, ..Default::default() };
        let r = integrate(|_t, _y: &[f64], o: &mut [f64]| o.fill(0.0), 0.0, &[1.0], 1.0, &bad, None, &[]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn non_finite_field_is_an_error() {
        let r = integrate(
            |_t, _y: &[f64], o: &mut [f64]| o[0] = f64::NAN,
            0.0,
            &[1.0],
            1.0,
            &IntegratorSettings::default(),
            None,
            &[],
        );
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
