//! Fault injection: random soft errors, targeted flips, and the
//! dedup-then-hammer attack scenario.
//!
//! Every fault here bypasses the store's write path. The store records an
//! `InjectedFault` audit entry for each one so runs can be reconstructed.

use serde::{Deserialize, Serialize};

use crate::codec::Parity;
use crate::error::{Error, Result};
use crate::monitor::{
    Address, AuditEntry, PhysicalPageId, ProtectedStore, ReadPolicy, StoreConfig, Strategy, Validity, VirtualPageId,
};
use crate::rng::RandomSource;
use crate::word::{BitIndex, Word, DEFAULT_WIDTH};

/// Per-operation factor as originally quoted alongside the 7.5 expected errors.
pub const QUOTED_ERROR_PROBABILITY: f64 = 1.6e-5;

/// Expected injected errors over a full-length run.
pub const EXPECTED_ERRORS: f64 = 7.5;

/// Operation count of a full-length run.
pub const FULL_RUN_OPS: u64 = 4_729_000;

/// Per-operation probability that makes a full-length run inject
/// [`EXPECTED_ERRORS`] on average (about 1.586e-6).
pub const DEFAULT_ERROR_PROBABILITY: f64 = EXPECTED_ERRORS / FULL_RUN_OPS as f64;

/// Audit tail length included in scenario outcomes.
pub const AUDIT_TAIL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultZone {
    Data,
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedFault {
    pub zone: FaultZone,
    /// Bit within the data word, or within the check payload for check-zone faults.
    pub bit: u32,
}

/// Independent single-bit soft errors at a fixed per-operation probability.
#[derive(Debug, Clone)]
pub struct SoftErrorModel {
    per_op_probability: f64,
    rng: RandomSource,
}

impl SoftErrorModel {
    pub fn new(per_op_probability: f64, rng: RandomSource) -> Result<Self> {
        if !(0.0..=1.0).contains(&per_op_probability) {
            return Err(Error::InvalidConfig(format!("error probability {per_op_probability} outside [0, 1]")));
        }
        Ok(Self { per_op_probability, rng })
    }

    pub fn per_op_probability(&self) -> f64 {
        self.per_op_probability
    }

    /// With probability `p`, flips one uniformly chosen bit of the word at
    /// `addr`.
    ///
    /// When the store allows check-zone injection the bit is drawn over the
    /// data word and its stored check together.
    pub fn maybe_inject(&mut self, store: &mut ProtectedStore, addr: Address) -> Result<Option<InjectedFault>> {
        if !store.is_written(addr)? {
            return Err(Error::Unwritten(addr));
        }
        if !self.rng.bernoulli(self.per_op_probability) {
            return Ok(None);
        }
        let width = store.config().word_width;
        let span = if store.config().check_zone_injection { width + store.check_bits_at(addr) } else { width };
        let pos = self.rng.below(span);
        if pos < width {
            let physical = store.physical_page_of(addr.page)?;
            store.corrupt_physical(physical, addr.offset, BitIndex(pos))?;
            Ok(Some(InjectedFault { zone: FaultZone::Data, bit: pos }))
        } else {
            store.corrupt_check(addr, pos - width)?;
            Ok(Some(InjectedFault { zone: FaultZone::Check, bit: pos - width }))
        }
    }
}

pub fn maybe_inject(
    model: &mut SoftErrorModel,
    store: &mut ProtectedStore,
    addr: Address,
) -> Result<Option<InjectedFault>> {
    model.maybe_inject(store, addr)
}

/// Physical coordinates of one bit in the data zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetedFlip {
    pub physical_page: PhysicalPageId,
    pub word_offset: u32,
    pub bit: BitIndex,
}

/// Flips exactly the targeted bit. Returns the virtual pages that see it.
pub fn rowhammer_flip(store: &mut ProtectedStore, target: TargetedFlip) -> Result<Vec<VirtualPageId>> {
    store.corrupt_physical(target.physical_page, target.word_offset, target.bit)
}

/// Flips one bit of the stored check at `addr`; requires check-zone injection.
pub fn flip_check_bit(store: &mut ProtectedStore, addr: Address, bit: u32) -> Result<()> {
    store.corrupt_check(addr, bit)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioOutcome {
    /// Attacker and victim pages ended up on the same physical page.
    pub merged: bool,
    /// The hammered bit landed in the victim's word.
    pub flip_applied: bool,
    /// The victim's read came back invalid.
    pub detected: bool,
    pub audit_tail: Vec<AuditEntry>,
}

impl ScenarioOutcome {
    /// Corrupted data reached the victim without being flagged.
    pub fn attack_succeeded(&self) -> bool {
        self.flip_applied && !self.detected
    }
}

/// Copies the victim's page into a fresh attacker page, lets deduplication
/// run, hammers bit `bit` of the victim word through the shared physical page
/// if the merge happened, then has the victim read it back.
///
/// Without a merge the attacker has no physical path to the victim word,
/// so nothing is flipped.
pub fn flip_feng_shui_scenario(
    store: &mut ProtectedStore,
    attacker_page_content: &[Word],
    victim: Address,
    bit: BitIndex,
) -> Result<ScenarioOutcome> {
    if attacker_page_content.len() > store.config().words_per_page as usize {
        return Err(Error::InvalidConfig("attacker content larger than a page".into()));
    }
    if !store.is_written(victim)? {
        return Err(Error::Unwritten(victim));
    }
    let attacker = store.map_page();
    for (offset, word) in attacker_page_content.iter().enumerate() {
        store.write(Address::new(attacker, offset as u32), *word, false)?;
    }
    store.dedup_scan();

    let victim_physical = store.physical_page_of(victim.page)?;
    let merged = store.physical_page_of(attacker)? == victim_physical;
    let flip_applied = merged && {
        let target = TargetedFlip { physical_page: victim_physical, word_offset: victim.offset, bit };
        rowhammer_flip(store, target)?.contains(&victim.page)
    };
    let detected = store.read(victim)?.validity == Validity::Invalid;
    Ok(ScenarioOutcome { merged, flip_applied, detected, audit_tail: store.audit().tail(AUDIT_TAIL).to_vec() })
}

/// Knobs for a self-contained attack run with a parity-checked store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSetup {
    pub strategy: Strategy,
    pub protect_page: bool,
    pub priority_victim: bool,
    pub read_policy: ReadPolicy,
    pub words_per_page: u32,
    pub word_width: u32,
    pub seed: u64,
}

impl Default for AttackSetup {
    fn default() -> Self {
        Self {
            strategy: Strategy::None,
            protect_page: false,
            priority_victim: false,
            read_policy: ReadPolicy::ReturnMarkedInvalid,
            words_per_page: 64,
            word_width: DEFAULT_WIDTH,
            seed: 0,
        }
    }
}

/// Builds a victim page of seeded random words, then runs
/// [`flip_feng_shui_scenario`] against a seeded victim word and bit.
pub fn run_attack(setup: &AttackSetup) -> Result<(ScenarioOutcome, ProtectedStore)> {
    let config = StoreConfig {
        words_per_page: setup.words_per_page,
        word_width: setup.word_width,
        strategy: setup.strategy,
        read_policy: setup.read_policy,
        check_zone_injection: false,
    };
    let mut store = ProtectedStore::new(config, std::sync::Arc::new(Parity))?;
    let mut rng = RandomSource::new(setup.seed);
    let content: Vec<Word> = (0..setup.words_per_page).map(|_| rng.word(setup.word_width)).collect();
    let victim_offset = rng.below(setup.words_per_page);
    let bit = BitIndex(rng.below(setup.word_width));

    let page = store.map_page();
    for (offset, word) in content.iter().enumerate() {
        let priority = setup.priority_victim && offset as u32 == victim_offset;
        store.write(Address::new(page, offset as u32), *word, priority)?;
    }
    if setup.protect_page {
        store.protect_page(page)?;
    }
    let outcome = flip_feng_shui_scenario(&mut store, &content, Address::new(page, victim_offset), bit)?;
    Ok((outcome, store))
}
