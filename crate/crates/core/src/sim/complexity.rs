//! Checks that per-operation work is linear in word width and that the
//! stored check does not grow with the number of operations.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{OperationRecord, SimulationConfig};
use crate::error::{Error, Result};
use crate::word::Word;

const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    /// `(width, mean steps per operation)`, ascending width.
    pub steps_per_width: Vec<(u32, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub linear: bool,
    /// `(width, check bits per protected word)`.
    pub check_bits_per_width: Vec<(u32, u32)>,
    pub constant_check_storage: bool,
}

/// Fits mean per-operation steps against word width over runs at three or
/// more widths, and measures the codec's check size at each width.
pub fn complexity_audit(runs: &[(SimulationConfig, Vec<OperationRecord>)]) -> Result<ComplexityReport> {
    let mut by_width: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    let mut check_bits = BTreeMap::new();
    for (config, records) in runs {
        let entry = by_width.entry(config.word_width).or_default();
        entry.0 += records.iter().map(|r| r.steps).sum::<u64>();
        entry.1 += records.len() as u64;
        let codec = config.codec.build()?;
        let probe = Word::zero(config.word_width)?;
        check_bits.insert(config.word_width, codec.encode(&probe).payload_bits());
    }
    if by_width.len() < 3 {
        return Err(Error::InvalidConfig("complexity audit needs runs at three or more widths".into()));
    }
    if by_width.values().any(|&(_, n)| n == 0) {
        return Err(Error::InvalidConfig("complexity audit got a run with no records".into()));
    }

    let points: Vec<(u32, f64)> = by_width.iter().map(|(&w, &(steps, n))| (w, steps as f64 / n as f64)).collect();
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| f64::from(p.0)).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (f64::from(p.0) - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (f64::from(p.0) - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let max_residual = points.iter().map(|p| (p.1 - (slope * f64::from(p.0) + intercept)).abs()).fold(0.0, f64::max);
    let scale = points.iter().map(|p| p.1.abs()).fold(1.0, f64::max);

    let check_bits_per_width: Vec<(u32, u32)> = check_bits.into_iter().collect();
    let constant_check_storage = check_bits_per_width.windows(2).all(|w| w[0].1 == w[1].1);
    Ok(ComplexityReport {
        steps_per_width: points,
        slope,
        intercept,
        max_residual,
        linear: max_residual <= RESIDUAL_TOLERANCE * scale,
        check_bits_per_width,
        constant_check_storage,
    })
}
