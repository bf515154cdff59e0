//! Step accounting and the normalized time/space cost model.

use serde::{Deserialize, Serialize};

use crate::codec::{traversal_steps, CostDescriptor};
use crate::error::{Error, Result};
use crate::monitor::Strategy;

/// Steps an operation costs with no detection at all: one traversal of the word.
pub fn baseline_steps(width: u32) -> u64 {
    traversal_steps(width)
}

/// Per-operation steps for the parity scheme.
///
/// With `B = ceil(width / 2)`: `None` costs `B`, `Full` costs `2B + 2`, and
/// `Enhanced` costs `2B + 2` for priority operations and `B` otherwise. The
/// `+ 2` is the write and the read of the priority bit.
pub fn step_cost(strategy: Strategy, priority: bool, width: u32) -> u64 {
    let base = baseline_steps(width);
    if strategy.protects(priority) {
        base + base + 2
    } else {
        base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostFormula {
    /// `base + P * technique`: every operation pays the baseline and priority
    /// operations additionally pay the full technique cost.
    #[default]
    Additive,
    /// `(1 - P) * base + P * technique`: priority operations pay only the
    /// technique cost.
    Blended,
}

impl std::str::FromStr for CostFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(CostFormula::Additive),
            "blended" => Ok(CostFormula::Blended),
            other => Err(Error::InvalidConfig(format!("unknown cost formula {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub time: f64,
    pub space: f64,
}

impl CostRow {
    pub const BASELINE: CostRow = CostRow { time: 100.0, space: 100.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostModelResult {
    pub priority_fraction: f64,
    pub formula: CostFormula,
    pub none: CostRow,
    pub technique: CostRow,
    pub msms: CostRow,
}

pub fn theoretical_cost(
    priority_fraction: f64,
    technique: &CostDescriptor,
    base: CostRow,
    formula: CostFormula,
) -> Result<CostModelResult> {
    if !(0.0..=1.0).contains(&priority_fraction) {
        return Err(Error::InvalidConfig(format!("priority fraction {priority_fraction} outside [0, 1]")));
    }
    let p = priority_fraction;
    let row = CostRow { time: base.time * technique.time_multiplier, space: base.space * technique.space_multiplier };
    let msms = match formula {
        CostFormula::Additive => CostRow { time: base.time + p * row.time, space: base.space + p * row.space },
        CostFormula::Blended => {
            CostRow { time: (1.0 - p) * base.time + p * row.time, space: (1.0 - p) * base.space + p * row.space }
        }
    };
    Ok(CostModelResult { priority_fraction: p, formula, none: base, technique: row, msms })
}
