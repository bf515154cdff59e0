use thiserror::Error;

use crate::codec::CodecId;
use crate::monitor::{Address, PhysicalPageId, VirtualPageId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("bit index {index} out of range for a {width}-bit word")]
    BitIndexOutOfRange { index: u32, width: u32 },

    #[error("word width {0} is not supported (expected 1..=64)")]
    InvalidWidth(u32),

    #[error("value {bits:#x} does not fit in {width} bits")]
    NonCanonical { bits: u64, width: u32 },

    #[error("word widths differ: {left} vs {right}")]
    WidthMismatch { left: u32, right: u32 },

    #[error("invalid bit string {0:?}")]
    InvalidBitString(String),

    #[error("check produced by {found} handed to the {expected} codec")]
    CodecMismatch { expected: CodecId, found: CodecId },

    #[error("replication factor must be at least 1")]
    InvalidReplication,

    #[error("unknown codec {0:?}")]
    UnknownCodec(String),

    #[error("priority flag at {0} is set and cannot be lowered")]
    MonotonicityViolation(Address),

    #[error("offset {offset} is outside a {words_per_page}-word page")]
    OffsetOutOfRange { offset: u32, words_per_page: u32 },

    #[error("virtual page {0} is not mapped")]
    UnmappedPage(VirtualPageId),

    #[error("address {0} has never been written")]
    Unwritten(Address),

    #[error("no written word at physical page {page}, offset {offset}")]
    UnresolvableTarget { page: PhysicalPageId, offset: u32 },

    #[error("check zone injection is disabled for this store")]
    CheckZoneLocked,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
