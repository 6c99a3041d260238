use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Fails,
    Inconclusive,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of a numerical condition check together with the series that
/// justified it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub status: Status,
    /// (parameter, value) pairs; the parameter is usually a time or horizon.
    pub diagnostic_series: Vec<(f64, f64)>,
    pub tolerance_used: f64,
    pub note: String,
}

impl ConditionVerdict {
    pub fn new(status: Status, tolerance_used: f64, note: impl Into<String>) -> Self {
        Self { status, diagnostic_series: Vec::new(), tolerance_used, note: note.into() }
    }

    pub fn with_series(mut self, series: Vec<(f64, f64)>) -> Self {
        self.diagnostic_series = series;
        self
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    pub fn fails(&self) -> bool {
        self.status == Status::Fails
    }

    /// Holds iff every part holds; fails if any part fails; otherwise inconclusive.
    pub fn aggregate<'a>(
        parts: impl IntoIterator<Item = &'a ConditionVerdict>,
        tolerance_used: f64,
        note: impl Into<String>,
    ) -> Self {
        let mut any_fail = false;
        let mut all_hold = true;
        for p in parts {
            any_fail |= p.status == Status::Fails;
            all_hold &= p.status == Status::Holds;
        }
        let status = if any_fail {
            Status::Fails
        } else if all_hold {
            Status::Holds
        } else {
            Status::Inconclusive
        };
        Self::new(status, tolerance_used, note)
    }
}
