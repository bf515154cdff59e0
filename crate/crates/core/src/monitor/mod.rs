//! The protected store and the reference monitor in front of it.
//!
//! A [`ProtectedStore`] keeps four isolated zones: word data (held in
//! physical pages), codec checks, priority flags, and the audit log. None of
//! them is reachable except through the store's methods, and no method hands
//! out a mutable reference into a zone. Fault injection lives in
//! [`crate::fault`] and reaches the data zone through crate-private hooks.
//!
//! Integrity is tracked per word, deduplication per page. A protected page is
//! never merged. Priority flags only ever go from 0 to 1.

mod audit;
mod dump;
mod pages;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codec::{Codec, CodecCheck};
use crate::error::{Error, Result};
use crate::word::{BitIndex, Word, DEFAULT_WIDTH};

pub use audit::{verify_chain, AuditEntry, AuditEvent, AuditLog, ChainVerdict, Digest, DIGEST_ALGORITHM};
pub use dump::{AuditDump, CheckDump, FlagDump, MappingDump, PhysicalPageDump, StateDump, DUMP_FORMAT};
pub use pages::{Address, Mapping, PageTable, PhysicalPage, PhysicalPageId, VirtualPageId};

use pages::DataZone;

pub const DEFAULT_WORDS_PER_PAGE: u32 = 512;

/// Which operations get integrity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    None,
    #[default]
    Enhanced,
    Full,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::None, Strategy::Enhanced, Strategy::Full];

    /// Whether a write with this priority gets a stored check.
    pub fn protects(self, priority: bool) -> bool {
        match self {
            Strategy::None => false,
            Strategy::Enhanced => priority,
            Strategy::Full => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Enhanced => "enhanced",
            Strategy::Full => "full",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "enhanced" => Ok(Strategy::Enhanced),
            "full" => Ok(Strategy::Full),
            other => Err(Error::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

/// What a read does when a check fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadPolicy {
    /// Skip verification entirely and return the word.
    ReturnUnchecked,
    /// Return the word, marked invalid.
    #[default]
    ReturnMarkedInvalid,
    /// Withhold the word and report it invalid.
    SuppressOnInvalid,
}

impl ReadPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ReadPolicy::ReturnUnchecked => "return-unchecked",
            ReadPolicy::ReturnMarkedInvalid => "return-marked-invalid",
            ReadPolicy::SuppressOnInvalid => "suppress-on-invalid",
        }
    }
}

impl fmt::Display for ReadPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReadPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "return-unchecked" | "unchecked" => Ok(ReadPolicy::ReturnUnchecked),
            "return-marked-invalid" | "mark" => Ok(ReadPolicy::ReturnMarkedInvalid),
            "suppress-on-invalid" | "suppress" => Ok(ReadPolicy::SuppressOnInvalid),
            other => Err(Error::InvalidConfig(format!("unknown read policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Valid,
    Invalid,
    Unchecked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReadOutcome {
    pub word: Option<Word>,
    pub validity: Validity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub words_per_page: u32,
    pub word_width: u32,
    pub strategy: Strategy,
    pub read_policy: ReadPolicy,
    /// Lets fault injection reach the check zone as well as the data zone.
    pub check_zone_injection: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            words_per_page: DEFAULT_WORDS_PER_PAGE,
            word_width: DEFAULT_WIDTH,
            strategy: Strategy::default(),
            read_policy: ReadPolicy::default(),
            check_zone_injection: false,
        }
    }
}

impl StoreConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self { strategy, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        Word::zero(self.word_width)?;
        if self.words_per_page == 0 {
            return Err(Error::InvalidConfig("words_per_page must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Merge {
    pub survivor: PhysicalPageId,
    pub freed: PhysicalPageId,
    pub remapped: Vec<VirtualPageId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    pub merges: Vec<Merge>,
    pub pages_freed: usize,
}

type CheckZone = BTreeMap<VirtualPageId, Vec<Option<CodecCheck>>>;
type FlagZone = BTreeMap<VirtualPageId, Vec<bool>>;

#[derive(Debug)]
pub struct ProtectedStore {
    config: StoreConfig,
    codec: Arc<dyn Codec>,
    table: PageTable,
    data: DataZone,
    checks: BTreeMap<VirtualPageId, Vec<Option<CodecCheck>>>,
    flags: BTreeMap<VirtualPageId, Vec<bool>>,
    audit: AuditLog,
}

impl ProtectedStore {
    pub fn new(config: StoreConfig, codec: Arc<dyn Codec>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            codec,
            table: PageTable::default(),
            data: DataZone::default(),
            checks: BTreeMap::new(),
            flags: BTreeMap::new(),
            audit: AuditLog::new(),
        })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn codec(&self) -> &dyn Codec {
        self.codec.as_ref()
    }

    /// Maps a fresh virtual page onto a fresh, unwritten physical page.
    pub fn map_page(&mut self) -> VirtualPageId {
        let physical = self.data.allocate(vec![None; self.config.words_per_page as usize]);
        let page = self.table.allocate(physical);
        let slots = self.config.words_per_page as usize;
        self.checks.insert(page, vec![None; slots]);
        self.flags.insert(page, vec![false; slots]);
        page
    }

    /// Unmaps a virtual page and drops its checks and flags. The id is never
    /// handed out again, so no address can come back with a lower flag.
    pub fn release_page(&mut self, page: VirtualPageId) -> Result<()> {
        let mapping = self.table.mappings.remove(&page).ok_or(Error::UnmappedPage(page))?;
        let physical = self.data.get_mut(mapping.physical).expect("mapped page exists");
        physical.refcount -= 1;
        if physical.refcount == 0 {
            self.data.pages.remove(&mapping.physical);
        }
        self.checks.remove(&page);
        self.flags.remove(&page);
        self.audit.append(AuditEvent::Release, Address::new(page, 0));
        Ok(())
    }

    /// Excludes `page` from deduplication from now on. A page that is
    /// currently shared gets a private copy first.
    pub fn protect_page(&mut self, page: VirtualPageId) -> Result<()> {
        self.mapping(page)?;
        self.break_cow(page);
        self.table.mappings.get_mut(&page).expect("checked").protected = true;
        Ok(())
    }

    fn mapping(&self, page: VirtualPageId) -> Result<&Mapping> {
        self.table.get(page).ok_or(Error::UnmappedPage(page))
    }

    fn validate(&self, addr: Address) -> Result<&Mapping> {
        let mapping = self.mapping(addr.page)?;
        if addr.offset >= self.config.words_per_page {
            return Err(Error::OffsetOutOfRange { offset: addr.offset, words_per_page: self.config.words_per_page });
        }
        Ok(mapping)
    }

    fn flag_slot(&self, addr: Address) -> bool {
        self.flags[&addr.page][addr.offset as usize]
    }

    fn stored_word(&self, addr: Address, mapping: &Mapping) -> Option<Word> {
        self.data.get(mapping.physical).expect("mapped page exists").words[addr.offset as usize]
    }

    fn break_cow(&mut self, page: VirtualPageId) {
        let mapping = self.table.mappings.get_mut(&page).expect("caller validated mapping");
        if !mapping.cow {
            return;
        }
        mapping.cow = false;
        let shared = self.data.get_mut(mapping.physical).expect("mapped page exists");
        if shared.refcount > 1 {
            shared.refcount -= 1;
            let copy = shared.words.clone();
            mapping.physical = self.data.allocate(copy);
            self.audit.append(AuditEvent::CowBreak, Address::new(page, 0));
        }
    }

    /// Stores `word` at `addr`.
    ///
    /// When the strategy protects this write, the codec check goes to the
    /// check zone. `priority = true` raises the slot's flag; writing a flagged
    /// slot with `priority = false` would lower it and is rejected.
    pub fn write(&mut self, addr: Address, word: Word, priority: bool) -> Result<()> {
        self.validate(addr)?;
        if word.width() != self.config.word_width {
            return Err(Error::WidthMismatch { left: word.width(), right: self.config.word_width });
        }
        if self.flag_slot(addr) && !priority {
            return Err(Error::MonotonicityViolation(addr));
        }
        self.break_cow(addr.page);

        let physical = self.table.mappings[&addr.page].physical;
        self.data.get_mut(physical).expect("mapped page exists").words[addr.offset as usize] = Some(word);

        let check = self.config.strategy.protects(priority).then(|| self.codec.encode(&word));
        self.checks.get_mut(&addr.page).expect("zones track mappings")[addr.offset as usize] = check;
        if priority {
            self.flags.get_mut(&addr.page).expect("zones track mappings")[addr.offset as usize] = true;
        }
        self.audit.append(AuditEvent::Write, addr);
        Ok(())
    }

    pub fn read(&mut self, addr: Address) -> Result<ReadOutcome> {
        self.read_with_policy(addr, self.config.read_policy)
    }

    /// Reads `addr`, verifying it when its flag and the strategy call for a
    /// check and `policy` is not [`ReadPolicy::ReturnUnchecked`].
    pub fn read_with_policy(&mut self, addr: Address, policy: ReadPolicy) -> Result<ReadOutcome> {
        let mapping = self.validate(addr)?;
        let word = self.stored_word(addr, mapping).ok_or(Error::Unwritten(addr))?;
        let check = self.checks[&addr.page][addr.offset as usize].as_ref();
        let wants_check = match self.config.strategy {
            Strategy::None => false,
            Strategy::Enhanced => self.flag_slot(addr),
            Strategy::Full => true,
        };

        let verdict = match check {
            Some(check) if wants_check && policy != ReadPolicy::ReturnUnchecked => {
                Some(self.codec.verify(&word, check)?.valid)
            }
            _ => None,
        };
        self.audit.append(AuditEvent::Read, addr);

        Ok(match verdict {
            None => ReadOutcome { word: Some(word), validity: Validity::Unchecked },
            Some(true) => ReadOutcome { word: Some(word), validity: Validity::Valid },
            Some(false) => {
                self.audit.append(AuditEvent::IntegrityFailure, addr);
                let word = (policy != ReadPolicy::SuppressOnInvalid).then_some(word);
                ReadOutcome { word, validity: Validity::Invalid }
            }
        })
    }

    /// Raises the priority flag at `addr`. Returns whether the flag changed.
    ///
    /// A word already written there gets its check computed now, unless the
    /// strategy is `None`.
    pub fn set_priority(&mut self, addr: Address) -> Result<bool> {
        let mapping = self.validate(addr)?;
        if self.flag_slot(addr) {
            return Ok(false);
        }
        let stored = self.stored_word(addr, mapping);
        self.flags.get_mut(&addr.page).expect("zones track mappings")[addr.offset as usize] = true;
        if let Some(word) = stored {
            if self.config.strategy != Strategy::None {
                let slot = &mut self.checks.get_mut(&addr.page).expect("zones track mappings")[addr.offset as usize];
                if slot.is_none() {
                    *slot = Some(self.codec.encode(&word));
                }
            }
        }
        self.audit.append(AuditEvent::FlagSet, addr);
        Ok(true)
    }

    /// Merges content-identical physical pages, skipping protected ones.
    ///
    /// Within a group the lowest physical id survives. Every mapping onto the
    /// survivor becomes copy-on-write.
    pub fn dedup_scan(&mut self) -> MergeReport {
        let protected: BTreeSet<PhysicalPageId> =
            self.table.iter().filter(|(_, m)| m.protected).map(|(_, m)| m.physical).collect();
        let mut candidates: Vec<&PhysicalPage> =
            self.data.pages.values().filter(|p| !protected.contains(&p.id())).collect();
        candidates.sort_by(|a, b| a.words.cmp(&b.words).then(a.id().cmp(&b.id())));
        let groups: Vec<Vec<PhysicalPageId>> = candidates
            .chunk_by(|a, b| a.words == b.words)
            .filter(|group| group.len() > 1)
            .map(|group| group.iter().map(|p| p.id()).collect())
            .collect();

        let mut report = MergeReport::default();
        for group in groups {
            let survivor = group[0];
            for &freed in &group[1..] {
                let remapped = self.table.mapped_to(freed);
                for page in &remapped {
                    let mapping = self.table.mappings.get_mut(page).expect("listed mapping");
                    mapping.physical = survivor;
                }
                let gone = self.data.pages.remove(&freed).expect("candidate exists");
                self.data.get_mut(survivor).expect("candidate exists").refcount += gone.refcount;
                let logged = remapped.first().copied().expect("physical pages are always mapped");
                self.audit.append(AuditEvent::Merge, Address::new(logged, 0));
                report.merges.push(Merge { survivor, freed, remapped });
                report.pages_freed += 1;
            }
            for mapping in self.table.mappings.values_mut().filter(|m| m.physical == survivor) {
                mapping.cow = true;
            }
        }
        report
    }

    pub fn flag(&self, addr: Address) -> Result<bool> {
        self.validate(addr)?;
        Ok(self.flag_slot(addr))
    }

    pub fn check(&self, addr: Address) -> Result<Option<&CodecCheck>> {
        self.validate(addr)?;
        Ok(self.checks[&addr.page][addr.offset as usize].as_ref())
    }

    pub fn is_written(&self, addr: Address) -> Result<bool> {
        let mapping = self.validate(addr)?;
        Ok(self.stored_word(addr, mapping).is_some())
    }

    pub fn page_table(&self) -> &PageTable {
        &self.table
    }

    pub fn physical_page_of(&self, page: VirtualPageId) -> Result<PhysicalPageId> {
        Ok(self.mapping(page)?.physical)
    }

    pub fn physical_page(&self, id: PhysicalPageId) -> Option<&PhysicalPage> {
        self.data.get(id)
    }

    pub fn physical_pages(&self) -> impl Iterator<Item = &PhysicalPage> {
        self.data.pages.values()
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn verify_audit_chain(&self) -> ChainVerdict {
        self.audit.verify()
    }

    /// Ships all held audit entries out of the store.
    pub fn offload_audit(&mut self) -> Vec<AuditEntry> {
        self.audit.offload()
    }

    pub fn dump(&self) -> StateDump {
        StateDump::capture(self)
    }

    /// Flips one data bit in a physical page, bypassing the write path.
    /// Returns the virtual pages that observe the change.
    pub(crate) fn corrupt_physical(
        &mut self,
        id: PhysicalPageId,
        offset: u32,
        bit: BitIndex,
    ) -> Result<Vec<VirtualPageId>> {
        let page = self.data.get_mut(id).ok_or(Error::UnresolvableTarget { page: id, offset })?;
        let slot = page
            .words
            .get_mut(offset as usize)
            .and_then(Option::as_mut)
            .ok_or(Error::UnresolvableTarget { page: id, offset })?;
        *slot = slot.flip_bit(bit)?;
        let observers = self.table.mapped_to(id);
        for page in &observers {
            self.audit.append(AuditEvent::InjectedFault, Address::new(*page, offset));
        }
        Ok(observers)
    }

    /// Flips one bit of the stored check at `addr`.
    pub(crate) fn corrupt_check(&mut self, addr: Address, bit: u32) -> Result<()> {
        if !self.config.check_zone_injection {
            return Err(Error::CheckZoneLocked);
        }
        self.validate(addr)?;
        let check = self.checks.get_mut(&addr.page).expect("zones track mappings")[addr.offset as usize]
            .as_mut()
            .ok_or(Error::Unwritten(addr))?;
        check.flip_payload_bit(bit)?;
        self.audit.append(AuditEvent::InjectedFault, addr);
        Ok(())
    }

    pub(crate) fn check_bits_at(&self, addr: Address) -> u32 {
        self.checks[&addr.page][addr.offset as usize].as_ref().map_or(0, CodecCheck::payload_bits)
    }

    pub(crate) fn zones(&self) -> (&CheckZone, &FlagZone) {
        (&self.checks, &self.flags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{CodecKind, Parity};

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn store(strategy: Strategy, words_per_page: u32, width: u32) -> ProtectedStore {
        let config = StoreConfig { words_per_page, word_width: width, strategy, ..StoreConfig::default() };
        ProtectedStore::new(config, Arc::new(Parity)).unwrap()
    }

    #[test]
    fn priority_write_stores_parity_and_flag() {
        let mut s = store(Strategy::Enhanced, 4, 5);
        let page = s.map_page();
        let a = Address::new(page, 1);
        s.write(a, w("10110"), true).unwrap();
        assert_eq!(s.check(a).unwrap().unwrap().render_payload(), "1");
        assert!(s.flag(a).unwrap());
    }

    #[test]
    fn plain_write_under_enhanced_has_no_check() {
        let mut s = store(Strategy::Enhanced, 4, 5);
        let a = Address::new(s.map_page(), 0);
        s.write(a, w("10110"), false).unwrap();
        assert!(s.check(a).unwrap().is_none());
        assert!(!s.flag(a).unwrap());
        assert_eq!(s.read(a).unwrap(), ReadOutcome { word: Some(w("10110")), validity: Validity::Unchecked });
    }

    #[test]
    fn round_trip_is_valid() {
        let mut s = store(Strategy::Full, 4, 5);
        let a = Address::new(s.map_page(), 3);
        s.write(a, w("11100"), false).unwrap();
        assert_eq!(s.read(a).unwrap(), ReadOutcome { word: Some(w("11100")), validity: Validity::Valid });
        let events: Vec<_> = s.audit().entries().iter().map(|e| e.event).collect();
        assert_eq!(events, [AuditEvent::Write, AuditEvent::Read]);
    }

    #[test]
    fn lowering_a_flag_is_rejected() {
        let mut s = store(Strategy::Enhanced, 4, 5);
        let a = Address::new(s.map_page(), 0);
        s.write(a, w("10110"), true).unwrap();
        assert_eq!(s.write(a, w("00000"), false), Err(Error::MonotonicityViolation(a)));
        assert!(s.flag(a).unwrap());
        s.write(a, w("00000"), true).unwrap();
    }

    #[test]
    fn addressing_errors() {
        let mut s = store(Strategy::Full, 4, 5);
        let page = s.map_page();
        assert!(matches!(s.write(Address::new(page, 4), w("10110"), false), Err(Error::OffsetOutOfRange { .. })));
        assert!(matches!(s.read(Address::new(VirtualPageId(9), 0)), Err(Error::UnmappedPage(_))));
        assert_eq!(s.read(Address::new(page, 0)), Err(Error::Unwritten(Address::new(page, 0))));
        assert!(matches!(s.write(Address::new(page, 0), w("101"), false), Err(Error::WidthMismatch { .. })));
    }

    #[test]
    fn read_policies_on_corrupted_word() {
        for (policy, expected) in [
            (ReadPolicy::SuppressOnInvalid, ReadOutcome { word: None, validity: Validity::Invalid }),
            (ReadPolicy::ReturnMarkedInvalid, ReadOutcome { word: Some(w("10010")), validity: Validity::Invalid }),
            (ReadPolicy::ReturnUnchecked, ReadOutcome { word: Some(w("10010")), validity: Validity::Unchecked }),
        ] {
            let mut s = store(Strategy::Enhanced, 4, 5);
            let a = Address::new(s.map_page(), 0);
            s.write(a, w("10110"), true).unwrap();
            let physical = s.physical_page_of(a.page).unwrap();
            s.corrupt_physical(physical, 0, BitIndex(2)).unwrap();
            assert_eq!(s.read_with_policy(a, policy).unwrap(), expected, "{policy}");
            let failures = s.audit().entries().iter().filter(|e| e.event == AuditEvent::IntegrityFailure).count();
            assert_eq!(failures, usize::from(expected.validity == Validity::Invalid));
        }
    }

    #[test]
    fn set_priority_is_idempotent_and_logged_once() {
        let mut s = store(Strategy::Enhanced, 4, 5);
        let a = Address::new(s.map_page(), 2);
        s.write(a, w("00111"), false).unwrap();
        assert!(s.set_priority(a).unwrap());
        assert!(!s.set_priority(a).unwrap());
        assert!(s.flag(a).unwrap());
        assert_eq!(s.check(a).unwrap().unwrap().render_payload(), "1");
        let flag_sets = s.audit().entries().iter().filter(|e| e.event == AuditEvent::FlagSet).count();
        assert_eq!(flag_sets, 1);
        assert_eq!(s.read(a).unwrap().validity, Validity::Valid);
    }

    #[test]
    fn none_strategy_never_checks() {
        let mut s = store(Strategy::None, 4, 5);
        let a = Address::new(s.map_page(), 0);
        s.write(a, w("10110"), true).unwrap();
        assert!(s.flag(a).unwrap());
        assert!(s.check(a).unwrap().is_none());
        s.corrupt_physical(s.physical_page_of(a.page).unwrap(), 0, BitIndex(0)).unwrap();
        assert_eq!(s.read(a).unwrap().validity, Validity::Unchecked);
    }

    fn fill(s: &mut ProtectedStore, page: VirtualPageId, words: &[&str]) {
        for (i, word) in words.iter().enumerate() {
            s.write(Address::new(page, i as u32), w(word), false).unwrap();
        }
    }

    #[test]
    fn two_identical_pages_merge() {
        let mut s = store(Strategy::Enhanced, 2, 5);
        let (a, b) = (s.map_page(), s.map_page());
        fill(&mut s, a, &["10110", "00001"]);
        fill(&mut s, b, &["10110", "00001"]);
        let report = s.dedup_scan();
        assert_eq!(report.pages_freed, 1);
        assert_eq!(s.physical_pages().count(), 1);
        let shared = s.physical_page_of(a).unwrap();
        assert_eq!(s.physical_page_of(b).unwrap(), shared);
        assert_eq!(s.physical_page(shared).unwrap().refcount(), 2);
        assert!(s.page_table().get(a).unwrap().cow && s.page_table().get(b).unwrap().cow);
    }

    #[test]
    fn protected_page_is_not_merged() {
        let mut s = store(Strategy::Enhanced, 2, 5);
        let (a, b) = (s.map_page(), s.map_page());
        fill(&mut s, a, &["10110", "00001"]);
        fill(&mut s, b, &["10110", "00001"]);
        s.protect_page(a).unwrap();
        assert_eq!(s.dedup_scan(), MergeReport::default());
        assert_ne!(s.physical_page_of(a).unwrap(), s.physical_page_of(b).unwrap());
    }

    #[test]
    fn three_identical_pages_leave_one_survivor() {
        let mut s = store(Strategy::Enhanced, 1, 5);
        let pages: Vec<_> = (0..3).map(|_| s.map_page()).collect();
        for &p in &pages {
            fill(&mut s, p, &["01010"]);
        }
        let report = s.dedup_scan();
        assert_eq!(report.pages_freed, 2);
        assert_eq!(report.merges.len(), 2);
        let survivor = s.physical_page_of(pages[0]).unwrap();
        assert_eq!(s.physical_page(survivor).unwrap().refcount(), 3);
        assert_eq!(s.audit().entries().iter().filter(|e| e.event == AuditEvent::Merge).count(), 2);
    }

    #[test]
    fn write_to_shared_page_breaks_sharing() {
        let mut s = store(Strategy::Enhanced, 2, 5);
        let (a, b) = (s.map_page(), s.map_page());
        fill(&mut s, a, &["10110", "00001"]);
        fill(&mut s, b, &["10110", "00001"]);
        s.dedup_scan();
        let shared = s.physical_page_of(a).unwrap();
        s.write(Address::new(b, 0), w("11111"), false).unwrap();
        assert_eq!(s.physical_page(shared).unwrap().refcount(), 1);
        assert_ne!(s.physical_page_of(b).unwrap(), shared);
        assert!(!s.page_table().get(b).unwrap().cow);
        assert_eq!(s.read(Address::new(a, 0)).unwrap().word, Some(w("10110")));
        assert_eq!(s.read(Address::new(b, 0)).unwrap().word, Some(w("11111")));
        assert_eq!(s.read(Address::new(b, 1)).unwrap().word, Some(w("00001")));
        assert!(s.audit().entries().iter().any(|e| e.event == AuditEvent::CowBreak));

        // The remaining sharer is now alone: no copy, flag cleared.
        s.write(Address::new(a, 1), w("00011"), false).unwrap();
        assert_eq!(s.physical_page_of(a).unwrap(), shared);
        assert!(!s.page_table().get(a).unwrap().cow);
    }

    #[test]
    fn protecting_a_shared_page_unshares_it() {
        let mut s = store(Strategy::Enhanced, 1, 5);
        let (a, b) = (s.map_page(), s.map_page());
        fill(&mut s, a, &["01010"]);
        fill(&mut s, b, &["01010"]);
        s.dedup_scan();
        s.protect_page(a).unwrap();
        assert_ne!(s.physical_page_of(a).unwrap(), s.physical_page_of(b).unwrap());
        assert_eq!(s.dedup_scan(), MergeReport::default());
    }

    #[test]
    fn release_frees_the_slot_for_good() {
        let mut s = store(Strategy::Enhanced, 2, 5);
        let a = s.map_page();
        fill(&mut s, a, &["10110", "00001"]);
        s.release_page(a).unwrap();
        assert_eq!(s.physical_pages().count(), 0);
        assert!(matches!(s.read(Address::new(a, 0)), Err(Error::UnmappedPage(_))));
        assert_ne!(s.map_page(), a);
        assert!(matches!(s.release_page(a), Err(Error::UnmappedPage(_))));
    }

    #[test]
    fn check_zone_is_locked_by_default() {
        let mut s = store(Strategy::Full, 2, 5);
        let a = Address::new(s.map_page(), 0);
        s.write(a, w("10110"), false).unwrap();
        assert_eq!(s.corrupt_check(a, 0), Err(Error::CheckZoneLocked));
    }

    #[test]
    fn check_zone_flip_fails_verification_when_unlocked() {
        let config = StoreConfig { check_zone_injection: true, ..StoreConfig::with_strategy(Strategy::Full) };
        let mut s = ProtectedStore::new(config, CodecKind::Berger.build().unwrap()).unwrap();
        let a = Address::new(s.map_page(), 0);
        s.write(a, w("10110000"), false).unwrap();
        s.corrupt_check(a, 1).unwrap();
        assert_eq!(s.read(a).unwrap().validity, Validity::Invalid);
    }

    #[test]
    fn rejects_bad_configs() {
        let config = StoreConfig { words_per_page: 0, ..StoreConfig::default() };
        assert!(ProtectedStore::new(config, Arc::new(Parity)).is_err());
        let config = StoreConfig { word_width: 65, ..StoreConfig::default() };
        assert!(ProtectedStore::new(config, Arc::new(Parity)).is_err());
    }
}
