use std::f64::consts::FRAC_PI_2;

use anyhow::{bail, Result};
use horizon_core::conditions::{
    check_classical, check_general, check_gmax, check_jx_bounded, check_limit_equivalence, check_max_principle,
    decompose_costate, Mode, DEFAULT_CONTROL_RESOLUTION,
};
use horizon_core::problem::Builtin;
use horizon_core::reference::integrator_reference;
use horizon_core::reference::ramsey::ramsey_full_path;
use horizon_core::reference::{capital_and_consumption, oscillator_reference};
use horizon_core::variational::{
    accumulate_jx, horizon_grid, limit_costate, transition_matrix, variational_settings, CostatePath, TailPolicy,
};
use horizon_core::{ConditionVerdict, Exec, Status};

use crate::candidate::{build_candidate, ramsey_params, shoot_settings, Candidate};
use crate::config::RunConfig;
use crate::report::{Cell, Report};

pub const CHECK_COLUMNS: &[&str] =
    &["example", "candidate", "multiplier", "lambda", "condition", "status", "value", "tolerance", "summary"];

/// Spacing of the tabulated costate paths.
const COSTATE_SPACING: f64 = 0.05;
/// Horizon spacing of the Hamiltonian-difference battery.
const BATTERY_SPACING: f64 = 0.01;
const DEFAULT_TAU_POINTS: usize = 4;

/// A multiplier `(λ, ψ)` given in closed form or read off the candidate.
pub struct Multiplier {
    pub id: String,
    pub lambda: f64,
    pub costate: CostatePath,
}

fn times(t0: f64, t_max: f64) -> Vec<f64> {
    let n = ((t_max - t0) / COSTATE_SPACING).ceil() as usize;
    (0..=n).map(|i| (t0 + i as f64 * COSTATE_SPACING).min(t_max)).collect()
}

/// Integrator: the normal pair `(1, a0)` and an abnormal `(0, a0 > 0)`, or
/// the single pair fixed by `--lambda`.
/// Oscillator: the closed-form family `(r, φ)` with `|r| ≤ b`.
/// Ramsey: `ψ = λ·c^(−θ)` along the saddle path.
pub fn multipliers(cfg: &RunConfig, cand: &Candidate) -> Result<Vec<Multiplier>> {
    let t0 = cand.problem.initial_time;
    let grid = times(t0, cfg.t_max);
    let mut out = Vec::new();
    match cfg.example {
        Builtin::Integrator => {
            let rho = cfg.param("rho");
            let pairs = match cfg.lambda {
                Some(l) => vec![(l, cfg.a0.unwrap_or(if l == 0.0 { 1.0 } else { 0.0 }))],
                None => {
                    let a0 = cfg.a0.unwrap_or(0.0);
                    vec![(1.0, a0), (0.0, if a0 > 0.0 { a0 } else { 1.0 })]
                }
            };
            for (lambda, a0) in pairs {
                let r = integrator_reference(rho, a0, lambda)?;
                let costate = CostatePath::from_fn(lambda, grid.clone(), |t| vec![r.psi(t)])?;
                out.push(Multiplier { id: format!("lambda={lambda} a0={a0}"), lambda, costate });
            }
        }
        Builtin::Oscillator => {
            let b = cfg.param("b");
            let lambda = cfg.lambda.unwrap_or(1.0);
            if lambda == 0.0 {
                bail!("the oscillator has no nontrivial abnormal multiplier satisfying the maximum condition");
            }
            let reference = oscillator_reference(b)?;
            let mut family = vec![(0.0, 0.0)];
            if 0.3 <= b {
                family.push((0.3, 0.7));
            }
            family.push((b, -FRAC_PI_2));
            if b >= 1.0 {
                family.push((1.0, 0.0));
            }
            for (r, phi) in family {
                let costate = CostatePath::from_fn(lambda, grid.clone(), |t| {
                    let p = reference.costate(r, phi, t).expect("|r| <= b");
                    vec![lambda * p[0], lambda * p[1]]
                })?;
                out.push(Multiplier { id: format!("r={r} phi={phi}"), lambda, costate });
            }
        }
        Builtin::Ramsey => {
            let theta = cfg.param("theta");
            let lambda = cfg.lambda.unwrap_or(1.0);
            if lambda == 0.0 {
                bail!("the Ramsey maximum condition forces lambda > 0");
            }
            let control = &cand.control;
            let costate = CostatePath::from_fn(lambda, grid, |t| vec![lambda * control.evaluate(t)[0].powf(-theta)])?;
            out.push(Multiplier { id: format!("lambda={lambda}"), lambda, costate });
        }
    }
    Ok(out)
}

fn verdict_row(
    cfg: &RunConfig,
    cand: &Candidate,
    multiplier: Option<&Multiplier>,
    condition: &str,
    v: &ConditionVerdict,
    value: Option<f64>,
) -> Vec<Cell> {
    vec![
        cfg.example.name().into(),
        cand.label.into(),
        multiplier.map_or("-".to_string(), |m| m.id.clone()).into(),
        multiplier.map(|m| m.lambda).into(),
        condition.into(),
        v.status.as_str().into(),
        value.into(),
        v.tolerance_used.into(),
        v.note.clone().into(),
    ]
}

/// One row per condition per multiplier, then the candidate-level rows.
pub fn cmd_check(cfg: &RunConfig, exec: Exec) -> Result<Report> {
    let cand = build_candidate(cfg)?;
    let settings = variational_settings();
    let tail = TailPolicy::default();
    let (p, tr, u) = (&cand.problem, &cand.trajectory, &cand.control);
    let t0 = p.initial_time;
    let mut report = Report::new("check", CHECK_COLUMNS);

    let transition = transition_matrix(p, tr, u, t0, &[cfg.t_max], &settings)?;
    let scan = horizon_grid(t0, cfg.t_max, tail.grid_points, Some(COSTATE_SPACING))?;
    let jx_initial = accumulate_jx(p, tr, u, t0, &scan, &settings)?;
    let mp_grid: Vec<f64> = (0..=400).map(|i| t0 + (cfg.t_max - t0) * i as f64 / 400.0).collect();

    for m in multipliers(cfg, &cand)? {
        let classical = check_classical(p, tr, u, &m.costate, m.lambda, &transition, &tail)?;
        for (name, v) in classical.all() {
            let last = v.diagnostic_series.last().map(|s| s.1);
            report.push(verdict_row(cfg, &cand, Some(&m), name, v, last));
        }
        let mp = check_max_principle(p, tr, u, &m.costate, m.lambda, DEFAULT_CONTROL_RESOLUTION, &mp_grid)?;
        let worst = mp.diagnostic_series.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        report.push(verdict_row(cfg, &cand, Some(&m), "max_principle", &mp, Some(worst)));
        let split = decompose_costate(&m.costate, &transition, std::slice::from_ref(&jx_initial), m.lambda, &tail)?;
        let a0 = split.a0.as_ref().map(|a| a[0]);
        report.push(verdict_row(cfg, &cand, Some(&m), "costate_decomposition", &split.verdict, a0));
        if m.lambda > 0.0 {
            let eq = check_limit_equivalence(p, tr, u, &m.costate, &transition, &jx_initial, &tail)?;
            let status = if eq.consistent() { Status::Holds } else { Status::Fails };
            let note = format!(
                "limit costate {} / stripped transported costate {}",
                eq.limit_verdict.status, eq.transported_verdict.status
            );
            let v = ConditionVerdict::new(status, tail.tol, note);
            report.push(verdict_row(cfg, &cand, Some(&m), "limit_equivalence", &v, None));
        }
        if cfg.example == Builtin::Integrator {
            let psi0 = m.costate.psi(t0)?[0];
            let status = if psi0 >= 0.0 { Status::Holds } else { Status::Fails };
            let v = ConditionVerdict::new(status, 0.0, format!("psi(0) = {psi0:.6e}"));
            report.push(verdict_row(cfg, &cand, Some(&m), "initial_costate_nonnegative", &v, Some(psi0)));
        }
    }

    let (bounded, bound) = check_jx_bounded(&jx_initial);
    report.push(verdict_row(cfg, &cand, None, "jx_bounded", &bounded, Some(bound)));
    let (psi_hat, limit) = limit_costate(&jx_initial, &tail);
    report.push(verdict_row(cfg, &cand, None, "limit_costate", &limit, psi_hat.map(|v| v[0])));

    let tau_points = cfg.grid.unwrap_or(DEFAULT_TAU_POINTS);
    let tau_grid: Vec<f64> =
        (0..tau_points).map(|i| t0 + (cfg.t_max - t0) / 8.0 * i as f64 / tau_points as f64).collect();
    let horizons = horizon_grid(t0, cfg.t_max, tail.grid_points, Some(BATTERY_SPACING))?;
    for (mode, name) in [(Mode::Weak, "general_WOO"), (Mode::Strong, "general_OO")] {
        let rep = check_general(p, tr, u, &tau_grid, DEFAULT_CONTROL_RESOLUTION, &horizons, mode, &settings, exec)?;
        let worst = rep.cells.iter().map(|c| c.estimate).fold(f64::NEG_INFINITY, f64::max);
        report.push(verdict_row(cfg, &cand, None, name, &rep.verdict, Some(worst)));
    }

    if cfg.example == Builtin::Ramsey {
        for (label, v) in gmax_family(cfg, &cand)? {
            let mut row = verdict_row(cfg, &cand, None, "gmax", &v, None);
            row[2] = label.into();
            report.push(row);
        }
    }
    Ok(report)
}

/// Scaling of the saddle consumption for the feasible comparison family.
pub const GMAX_FAMILY: [f64; 5] = [1.0, 0.98, 0.95, 0.9, 0.8];

/// Fiber-rule verdicts for the saddle path and four feasible paths starting
/// below it.
pub fn gmax_family(cfg: &RunConfig, cand: &Candidate) -> Result<Vec<(String, ConditionVerdict)>> {
    let params = ramsey_params(cfg)?;
    let saddle = cand.saddle.as_ref().expect("ramsey candidate");
    let settings = shoot_settings(cfg.t_max);
    let mut family = Vec::new();
    for f in GMAX_FAMILY {
        let pair = if f == 1.0 {
            saddle.trajectory.clone()
        } else {
            ramsey_full_path(&params, params.k0, f * saddle.c0, &settings)?
        };
        family.push(capital_and_consumption(&pair)?);
    }
    let horizon = cfg.t_max.min(200.0);
    let grid: Vec<f64> = (0..=100).map(|i| horizon * i as f64 / 100.0).collect();
    let verdicts = check_gmax(&cand.problem, &family, &grid)?;
    Ok(GMAX_FAMILY.iter().map(|f| format!("c0_scale={f}")).zip(verdicts).collect())
}
