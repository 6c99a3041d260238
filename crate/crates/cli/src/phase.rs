use anyhow::{bail, Result};
use horizon_core::reference::ramsey::ramsey_classify_grid;
use horizon_core::reference::{ramsey_shoot, ShootSettings};
use horizon_core::Exec;

use crate::args::WindowArgs;
use crate::candidate::{ramsey_params, shoot_settings};
use crate::config::RunConfig;
use crate::report::{Cell, Report};

pub const PHASE_COLUMNS: &[&str] = &["kind", "i", "j", "k", "c", "class"];

const DEFAULT_GRID: usize = 100;
const CURVE_POINTS: usize = 200;

/// Axis points `lo + (hi − lo)(i + 1)/n`, so `lo` itself is excluded.
pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i + 1) as f64 / n as f64).collect()
}

/// Grid classification rows ordered by `(i, j)`, then the two nullclines and
/// the shot saddle path.
pub fn cmd_phase_diagram(cfg: &RunConfig, window: &WindowArgs, exec: Exec) -> Result<Report> {
    let params = ramsey_params(cfg)?;
    let k_lo = window.k_min.unwrap_or(0.0);
    let k_hi = window.k_max.unwrap_or(160.0);
    let c_lo = window.c_min.unwrap_or(0.0);
    let c_hi = window.c_max.unwrap_or(8.0);
    if !(k_lo >= 0.0 && k_hi > k_lo && c_lo >= 0.0 && c_hi > c_lo) {
        bail!("phase window must satisfy 0 <= k_min < k_max and 0 <= c_min < c_max");
    }
    let n = cfg.grid.unwrap_or(DEFAULT_GRID);
    let ks = axis(k_lo, k_hi, n);
    let cs = axis(c_lo, c_hi, n);
    let points: Vec<(f64, f64)> = ks.iter().flat_map(|&k| cs.iter().map(move |&c| (k, c))).collect();
    let settings = ShootSettings { t_max: cfg.t_max.max(ShootSettings::default().t_max), ..ShootSettings::default() };
    let classes = ramsey_classify_grid(&params, &points, &settings, exec);

    let mut report = Report::new("phase-diagram", PHASE_COLUMNS);
    for (idx, (&(k, c), class)) in points.iter().zip(classes).enumerate() {
        let class = class?;
        report.push(vec!["grid".into(), (idx / n).into(), (idx % n).into(), k.into(), c.into(), class.as_str().into()]);
    }
    let ss = params.steady_state();
    for (i, k) in axis(k_lo, k_hi, CURVE_POINTS).into_iter().enumerate() {
        report.push(vec![
            "k_nullcline".into(),
            i.into(),
            Cell::Empty,
            k.into(),
            params.k_nullcline(k).into(),
            Cell::Empty,
        ]);
    }
    for (i, c) in axis(c_lo, c_hi, CURVE_POINTS).into_iter().enumerate() {
        report.push(vec!["c_nullcline".into(), i.into(), Cell::Empty, ss.k_star.into(), c.into(), Cell::Empty]);
    }
    let saddle = ramsey_shoot(&params, &shoot_settings(0.0))?;
    let end = saddle.ball_entry_time;
    for i in 0..=CURVE_POINTS {
        let t = end * i as f64 / CURVE_POINTS as f64;
        report.push(vec![
            "saddle_path".into(),
            i.into(),
            Cell::Empty,
            saddle.k(t)?.into(),
            saddle.c(t)?.into(),
            "saddle".into(),
        ]);
    }
    Ok(report)
}
