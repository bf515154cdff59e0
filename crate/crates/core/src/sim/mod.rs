//! The overhead/detection experiment.
//!
//! A run performs `n_ops` operations against a [`ProtectedStore`]. Each
//! operation draws a random word, classifies it as priority or not, writes it
//! through the monitor, gives the soft-error model one chance to flip a bit,
//! and reads the word back. Every operation lands in an [`OperationRecord`].
//!
//! Words and priorities come from stream 0 of the run seed and injections
//! from stream 1, so runs that differ only in strategy or codec see the same
//! words, priorities and faults.

mod complexity;
mod cost;
mod csv;

use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::codec::{Codec, CodecKind};
use crate::error::{Error, Result};
use crate::fault::{FaultZone, SoftErrorModel, DEFAULT_ERROR_PROBABILITY, FULL_RUN_OPS};
use crate::monitor::{
    Address, Digest, ProtectedStore, ReadPolicy, StoreConfig, Strategy, Validity, DEFAULT_WORDS_PER_PAGE,
    DIGEST_ALGORITHM,
};
use crate::rng::{RandomSource, ALGORITHM as RNG_ALGORITHM};
use crate::word::{Word, DEFAULT_WIDTH};

pub use complexity::{complexity_audit, ComplexityReport};
pub use cost::{baseline_steps, step_cost, theoretical_cost, CostFormula, CostModelResult, CostRow};
pub use csv::{CsvWriter, CSV_HEADER};

pub const DEFAULT_PRIORITY_FRACTION: f64 = 0.15;

const WORD_STREAM: u64 = 0;
const FAULT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityMode {
    /// Each operation is priority with probability `P`, independently.
    #[default]
    Bernoulli,
    /// Exactly `floor(n * P)` priority operations, evenly spread.
    Quota,
}

impl std::str::FromStr for PriorityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(PriorityMode::Bernoulli),
            "quota" => Ok(PriorityMode::Quota),
            other => Err(Error::InvalidConfig(format!("unknown priority mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_ops: u64,
    pub word_width: u32,
    pub priority_fraction: f64,
    pub per_op_probability: f64,
    pub strategy: Strategy,
    pub codec: CodecKind,
    pub seed: u64,
    pub priority_mode: PriorityMode,
    pub read_policy: ReadPolicy,
    pub check_zone_injection: bool,
    pub words_per_page: u32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_ops: FULL_RUN_OPS,
            word_width: DEFAULT_WIDTH,
            priority_fraction: DEFAULT_PRIORITY_FRACTION,
            per_op_probability: DEFAULT_ERROR_PROBABILITY,
            strategy: Strategy::Enhanced,
            codec: CodecKind::Parity,
            seed: 0,
            priority_mode: PriorityMode::Bernoulli,
            read_policy: ReadPolicy::ReturnMarkedInvalid,
            check_zone_injection: false,
            words_per_page: DEFAULT_WORDS_PER_PAGE,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ops == 0 {
            return Err(Error::InvalidConfig("n_ops must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.priority_fraction) {
            return Err(Error::InvalidConfig(format!("priority fraction {} outside [0, 1]", self.priority_fraction)));
        }
        if !(0.0..=1.0).contains(&self.per_op_probability) {
            return Err(Error::InvalidConfig(format!("error probability {} outside [0, 1]", self.per_op_probability)));
        }
        self.store_config().validate()?;
        self.codec.build().map(drop)
    }

    pub fn store_config(&self) -> StoreConfig {
        StoreConfig {
            words_per_page: self.words_per_page,
            word_width: self.word_width,
            strategy: self.strategy,
            read_policy: self.read_policy,
            check_zone_injection: self.check_zone_injection,
        }
    }

    pub fn with_strategy(self, strategy: Strategy) -> Self {
        Self { strategy, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationRecord {
    pub op_id: u64,
    pub priority: bool,
    pub strategy: Strategy,
    pub error_injected: bool,
    /// Flipped bit. Check-zone faults are numbered from `word_width` upward.
    pub error_bit: Option<u32>,
    pub detected: bool,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Totals {
    pub ops: u64,
    pub priority_ops: u64,
    pub errors_injected: u64,
    pub errors_detected: u64,
    pub errors_missed: u64,
    #[serde(serialize_with = "serialize_miss_rate")]
    pub miss_rate: Option<f64>,
    pub total_steps: u64,
}

fn serialize_miss_rate<S: Serializer>(rate: &Option<f64>, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    match rate {
        Some(rate) => serializer.serialize_f64(*rate),
        None => serializer.serialize_str("n/a"),
    }
}

impl Totals {
    pub fn detection_fraction(&self) -> Option<f64> {
        (self.errors_injected > 0).then(|| self.errors_detected as f64 / self.errors_injected as f64)
    }

    /// Miss rate as a percentage, or `n/a` when nothing was injected.
    pub fn miss_rate_display(&self) -> String {
        self.miss_rate.map_or_else(|| "n/a".to_owned(), |r| format!("{:.1}%", r * 100.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditSummary {
    pub digest_algorithm: &'static str,
    pub entries: u64,
    pub head: Digest,
    /// Verification result for the entries still held at the end of the run.
    pub intact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub seed: u64,
    pub rng: &'static str,
    pub totals: Totals,
    pub audit: AuditSummary,
}

/// A finished run: report plus the store as it was left.
#[derive(Debug)]
pub struct SimulationRun {
    pub report: SimulationReport,
    pub store: ProtectedStore,
}

fn quota_hit(op: u64, fraction: f64) -> bool {
    ((op + 1) as f64 * fraction).floor() > (op as f64 * fraction).floor()
}

/// Runs the experiment, handing each record to `sink` as it is produced.
///
/// Pages are released once all their slots have been used and the audit log
/// is offloaded at the same point, so memory stays bounded for long runs.
pub fn execute(config: &SimulationConfig, mut sink: impl FnMut(&OperationRecord)) -> Result<SimulationRun> {
    config.validate()?;
    let codec: Arc<dyn Codec> = config.codec.build()?;
    let extra_steps = codec.cost(config.word_width).per_op_extra_steps;
    let base_steps = baseline_steps(config.word_width);
    let mut store = ProtectedStore::new(config.store_config(), codec)?;
    let seed = RandomSource::new(config.seed);
    let mut draws = seed.derive(WORD_STREAM);
    let mut faults = SoftErrorModel::new(config.per_op_probability, seed.derive(FAULT_STREAM))?;

    let mut totals = Totals {
        ops: 0,
        priority_ops: 0,
        errors_injected: 0,
        errors_detected: 0,
        errors_missed: 0,
        miss_rate: None,
        total_steps: 0,
    };
    let mut offloaded = 0u64;
    let mut page = store.map_page();

    for op_id in 0..config.n_ops {
        let offset = (op_id % u64::from(config.words_per_page)) as u32;
        if offset == 0 && op_id > 0 {
            store.release_page(page)?;
            offloaded += store.offload_audit().len() as u64;
            page = store.map_page();
        }
        let addr = Address::new(page, offset);
        let word: Word = draws.word(config.word_width);
        let priority = match config.priority_mode {
            PriorityMode::Bernoulli => draws.bernoulli(config.priority_fraction),
            PriorityMode::Quota => quota_hit(op_id, config.priority_fraction),
        };

        store.write(addr, word, priority)?;
        let fault = faults.maybe_inject(&mut store, addr)?;
        let outcome = store.read(addr)?;

        let protected = config.strategy.protects(priority);
        let detected = fault.is_some() && outcome.validity == Validity::Invalid;
        let record = OperationRecord {
            op_id,
            priority,
            strategy: config.strategy,
            error_injected: fault.is_some(),
            error_bit: fault.map(|f| match f.zone {
                FaultZone::Data => f.bit,
                FaultZone::Check => config.word_width + f.bit,
            }),
            detected,
            steps: base_steps + if protected { extra_steps } else { 0 },
        };

        totals.ops += 1;
        totals.priority_ops += u64::from(priority);
        totals.errors_injected += u64::from(record.error_injected);
        totals.errors_detected += u64::from(detected);
        totals.total_steps += record.steps;
        sink(&record);
    }

    totals.errors_missed = totals.errors_injected - totals.errors_detected;
    totals.miss_rate = totals.detection_fraction().map(|d| 1.0 - d);
    let audit = AuditSummary {
        digest_algorithm: DIGEST_ALGORITHM,
        entries: offloaded + store.audit().entries().len() as u64,
        head: store.audit().head(),
        intact: store.verify_audit_chain().intact,
    };
    let report = SimulationReport { config: *config, seed: config.seed, rng: RNG_ALGORITHM, totals, audit };
    Ok(SimulationRun { report, store })
}

/// Runs the experiment and collects every record.
pub fn run_simulation(config: &SimulationConfig) -> Result<(SimulationReport, Vec<OperationRecord>)> {
    let mut records = Vec::with_capacity(config.n_ops.min(1 << 24) as usize);
    let run = execute(config, |r| records.push(*r))?;
    Ok((run.report, records))
}

/// Runs the experiment keeping only the aggregate report.
pub fn simulate(config: &SimulationConfig) -> Result<SimulationReport> {
    Ok(execute(config, |_| {})?.report)
}
