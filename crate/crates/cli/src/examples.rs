use horizon_core::problem::Builtin;

use crate::config::{default_params, default_t_max};
use crate::report::Report;

pub const EXAMPLE_COLUMNS: &[&str] = &["example", "parameter", "default", "description"];

fn describe(example: Builtin) -> &'static str {
    match example {
        Builtin::Ramsey => "capital k' = k^alpha - delta*k - c, payoff c^(1-theta)/(1-theta)",
        Builtin::Integrator => "x' = u in [0,1], payoff exp(-rho*t)*x",
        Builtin::Oscillator => "x1' = x2, x2' = u - x1, u in [-1,1], payoff x2 + b*u",
    }
}

pub fn cmd_list_examples() -> Report {
    let mut report = Report::new("list-examples", EXAMPLE_COLUMNS);
    for ex in Builtin::ALL {
        for (key, value) in default_params(ex) {
            report.push(vec![ex.name().into(), key.into(), value.into(), describe(ex).into()]);
        }
        report.push(vec![ex.name().into(), "t_max".into(), default_t_max(ex).into(), describe(ex).into()]);
    }
    report
}
