//! Hash-chained access log.
//!
//! Each entry commits to its own fields and to the digest of the entry before
//! it, so editing any committed entry invalidates it and breaks the link to
//! every later one. Entries can be offloaded; the log then keeps the digest of
//! the last offloaded entry as the anchor for what remains.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use super::Address;

pub const DIGEST_ALGORITHM: &str = "sha256";

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    /// Anchor of a log that has never been offloaded.
    pub const GENESIS: Digest = Digest([0; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Digest(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditEvent {
    Write,
    Read,
    FlagSet,
    IntegrityFailure,
    Merge,
    CowBreak,
    InjectedFault,
    Release,
}

impl AuditEvent {
    fn code(self) -> u8 {
        match self {
            AuditEvent::Write => 1,
            AuditEvent::Read => 2,
            AuditEvent::FlagSet => 3,
            AuditEvent::IntegrityFailure => 4,
            AuditEvent::Merge => 5,
            AuditEvent::CowBreak => 6,
            AuditEvent::InjectedFault => 7,
            AuditEvent::Release => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub sequence: u64,
    pub event: AuditEvent,
    pub address: Address,
    pub digest_prev: Digest,
    pub digest_self: Digest,
}

impl AuditEntry {
    /// SHA-256 over `sequence (LE u64) | event code (u8) | page (LE u64) |
    /// offset (LE u32) | digest_prev`.
    pub fn compute_digest(sequence: u64, event: AuditEvent, address: Address, prev: &Digest) -> Digest {
        let mut buf = [0u8; 53];
        buf[..8].copy_from_slice(&sequence.to_le_bytes());
        buf[8] = event.code();
        buf[9..17].copy_from_slice(&address.page.0.to_le_bytes());
        buf[17..21].copy_from_slice(&address.offset.to_le_bytes());
        buf[21..].copy_from_slice(&prev.0);
        Digest(Sha256::digest(buf).into())
    }

    pub fn recompute(&self) -> Digest {
        Self::compute_digest(self.sequence, self.event, self.address, &self.digest_prev)
    }
}

/// Outcome of walking a chain segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainVerdict {
    pub intact: bool,
    /// Sequence number of the first entry that fails, when not intact.
    pub first_break: Option<u64>,
    pub entries_checked: usize,
}

/// Verifies `entries` as a contiguous segment starting at `first_sequence`
/// and chained from `anchor`.
///
/// A break is reported at the position where the segment first disagrees
/// with the chain rule, even if the entry's own `sequence` field was altered.
pub fn verify_chain(anchor: Digest, first_sequence: u64, entries: &[AuditEntry]) -> ChainVerdict {
    let mut prev = anchor;
    for (i, entry) in entries.iter().enumerate() {
        let expected_sequence = first_sequence + i as u64;
        if entry.sequence != expected_sequence || entry.digest_prev != prev || entry.recompute() != entry.digest_self {
            return ChainVerdict { intact: false, first_break: Some(expected_sequence), entries_checked: i };
        }
        prev = entry.digest_self;
    }
    ChainVerdict { intact: true, first_break: None, entries_checked: entries.len() }
}

#[derive(Debug, Clone, Default)]
pub struct AuditLog {
    anchor: Digest,
    offloaded: u64,
    entries: Vec<AuditEntry>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn append(&mut self, event: AuditEvent, address: Address) -> u64 {
        let sequence = self.next_sequence();
        let digest_prev = self.head();
        let digest_self = AuditEntry::compute_digest(sequence, event, address, &digest_prev);
        self.entries.push(AuditEntry { sequence, event, address, digest_prev, digest_self });
        sequence
    }

    pub fn next_sequence(&self) -> u64 {
        self.offloaded + self.entries.len() as u64
    }

    /// Digest the next entry will chain from.
    pub fn head(&self) -> Digest {
        self.entries.last().map_or(self.anchor, |e| e.digest_self)
    }

    pub fn anchor(&self) -> Digest {
        self.anchor
    }

    /// Sequence number of the oldest entry still held.
    pub fn first_sequence(&self) -> u64 {
        self.offloaded
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn tail(&self, n: usize) -> &[AuditEntry] {
        &self.entries[self.entries.len().saturating_sub(n)..]
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn verify(&self) -> ChainVerdict {
        verify_chain(self.anchor, self.offloaded, &self.entries)
    }

    /// Hands over every held entry. The chain continues from the current head.
    pub fn offload(&mut self) -> Vec<AuditEntry> {
        self.anchor = self.head();
        self.offloaded += self.entries.len() as u64;
        let capacity = self.entries.capacity();
        std::mem::replace(&mut self.entries, Vec::with_capacity(capacity))
    }
}
