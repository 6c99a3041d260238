use std::path::PathBuf;

use anyhow::{bail, Result};
use horizon_core::problem::{Builtin, Params};

use crate::args::{ParamArgs, RunArgs};
use crate::report::Format;

/// Validated settings shared by the subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub example: Builtin,
    /// Problem parameters with example defaults filled in.
    pub params: Params,
    pub lambda: Option<f64>,
    pub a0: Option<f64>,
    pub t_max: f64,
    pub grid: Option<usize>,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub const DEFAULT_TOL: f64 = 1e-6;

pub fn default_params(example: Builtin) -> Params {
    let pairs: &[(&str, f64)] = match example {
        Builtin::Ramsey => &[("alpha", 0.4), ("delta", 0.05), ("theta", 0.5), ("k0", 10.0)],
        Builtin::Integrator => &[("rho", 0.1)],
        Builtin::Oscillator => &[("b", 0.5)],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn default_t_max(_example: Builtin) -> f64 {
    400.0
}

impl RunConfig {
    pub fn new(example: Builtin) -> Self {
        Self {
            example,
            params: default_params(example),
            lambda: None,
            a0: None,
            t_max: default_t_max(example),
            grid: None,
            tol: DEFAULT_TOL,
            out: None,
            format: Format::Csv,
        }
    }

    pub fn from_args(args: &RunArgs, fallback: Option<Builtin>) -> Result<Self> {
        let Some(example) = args.example.or(fallback) else {
            bail!("--example is required");
        };
        let mut cfg = Self::new(example);
        cfg.apply_params(&args.params)?;
        if let Some(t) = args.t_max {
            cfg.t_max = t;
        }
        cfg.grid = args.grid;
        if let Some(tol) = args.tol {
            cfg.tol = tol;
        }
        cfg.out = args.output.out.clone();
        cfg.format = args.output.format;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_params(&mut self, p: &ParamArgs) -> Result<()> {
        let given =
            [("alpha", p.alpha), ("delta", p.delta), ("theta", p.theta), ("k0", p.k0), ("b", p.b), ("rho", p.rho)];
        let accepted = self.example.required_params();
        for (key, value) in given {
            let Some(v) = value else { continue };
            if !accepted.contains(&key) {
                bail!("--{key} does not apply to the {} example", self.example);
            }
            self.params.insert(key.to_string(), v);
        }
        self.lambda = p.lambda;
        self.a0 = p.a0;
        if self.a0.is_some() && self.example != Builtin::Integrator {
            bail!("--a0 applies to the integrator example only");
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            bail!("--t-max must be positive, got {}", self.t_max);
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            bail!("--tol must be positive, got {}", self.tol);
        }
        if self.grid == Some(0) {
            bail!("--grid must be positive");
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                bail!("--lambda must be >= 0, got {l}");
            }
        }
        Ok(())
    }

    pub fn param(&self, key: &str) -> f64 {
        self.params[key]
    }
}
