//! JSON snapshot of a store, one section per zone.

use serde::{Deserialize, Serialize};

use super::audit::{verify_chain, AuditEntry, ChainVerdict, Digest, DIGEST_ALGORITHM};
use super::{PhysicalPageId, ProtectedStore, ReadPolicy, Strategy, VirtualPageId};
use crate::word::Word;

pub const DUMP_FORMAT: &str = "msms-state/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingDump {
    pub virtual_page: VirtualPageId,
    pub physical_page: PhysicalPageId,
    pub cow: bool,
    pub protected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalPageDump {
    pub physical_page: PhysicalPageId,
    pub refcount: u32,
    pub words: Vec<Option<Word>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckDump {
    pub virtual_page: VirtualPageId,
    pub offset: u32,
    pub codec: String,
    pub payload: String,
}

/// Flags of one virtual page, one character per slot, offset 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagDump {
    pub virtual_page: VirtualPageId,
    pub flags: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditDump {
    pub digest_algorithm: String,
    /// Digest the first held entry chains from.
    pub anchor: Digest,
    pub first_sequence: u64,
    pub entries: Vec<AuditEntry>,
}

impl AuditDump {
    pub fn verify(&self) -> ChainVerdict {
        verify_chain(self.anchor, self.first_sequence, &self.entries)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub format: String,
    pub codec: String,
    pub strategy: Strategy,
    pub read_policy: ReadPolicy,
    pub word_width: u32,
    pub words_per_page: u32,
    pub page_table: Vec<MappingDump>,
    pub data_zone: Vec<PhysicalPageDump>,
    pub check_zone: Vec<CheckDump>,
    pub flag_zone: Vec<FlagDump>,
    pub audit: AuditDump,
}

impl StateDump {
    pub(super) fn capture(store: &ProtectedStore) -> Self {
        let config = store.config();
        let (checks, flags) = store.zones();
        let page_table = store
            .page_table()
            .iter()
            .map(|(virtual_page, m)| MappingDump {
                virtual_page,
                physical_page: m.physical,
                cow: m.cow,
                protected: m.protected,
            })
            .collect();
        let data_zone = store
            .physical_pages()
            .map(|p| PhysicalPageDump { physical_page: p.id(), refcount: p.refcount(), words: p.words().to_vec() })
            .collect();
        let check_zone = checks
            .iter()
            .flat_map(|(page, slots)| {
                slots.iter().enumerate().filter_map(move |(offset, check)| {
                    check.as_ref().map(|c| CheckDump {
                        virtual_page: *page,
                        offset: offset as u32,
                        codec: c.codec.name().to_owned(),
                        payload: c.render_payload(),
                    })
                })
            })
            .collect();
        let flag_zone = flags
            .iter()
            .map(|(page, bits)| FlagDump {
                virtual_page: *page,
                flags: bits.iter().map(|&f| if f { '1' } else { '0' }).collect(),
            })
            .collect();
        let log = store.audit();
        Self {
            format: DUMP_FORMAT.to_owned(),
            codec: store.codec().id().name().to_owned(),
            strategy: config.strategy,
            read_policy: config.read_policy,
            word_width: config.word_width,
            words_per_page: config.words_per_page,
            page_table,
            data_zone,
            check_zone,
            flag_zone,
            audit: AuditDump {
                digest_algorithm: DIGEST_ALGORITHM.to_owned(),
                anchor: log.anchor(),
                first_sequence: log.first_sequence(),
                entries: log.entries().to_vec(),
            },
        }
    }

    pub fn verify_audit(&self) -> ChainVerdict {
        self.audit.verify()
    }
}
