//! Error-detecting codecs.
//!
//! A codec turns a [`Word`] into check data on write and re-derives it on
//! read. Codecs detect, they never correct. Each one also reports a
//! [`CostDescriptor`] consumed by the step accounting in [`crate::sim`].
//!
//! The set is open: anything implementing [`Codec`] can back a store, and a
//! [`CodecRegistry`] maps names to codecs for command-line selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::word::{BitIndex, Word};

/// Copies kept by the duplication codec when none is specified.
pub const DEFAULT_COPIES: u32 = 2;

/// Time and space factors cited for software-implemented error detection.
pub const SIED_TIME_MULTIPLIER: f64 = 3.0;
pub const SIED_SPACE_MULTIPLIER: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodecId {
    None,
    Parity,
    Berger,
    Duplication,
    Custom(&'static str),
}

impl CodecId {
    pub fn name(&self) -> &'static str {
        match self {
            CodecId::None => "none",
            CodecId::Parity => "parity",
            CodecId::Berger => "berger",
            CodecId::Duplication => "dup",
            CodecId::Custom(name) => name,
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for CodecId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Check data produced by a codec, kept in the store's check zone.
///
/// The payload is a sequence of fixed-width chunks; its bit length is the sum
/// of the chunk widths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodecCheck {
    pub codec: CodecId,
    pub payload: SmallVec<[Word; 2]>,
}

impl CodecCheck {
    pub fn payload_bits(&self) -> u32 {
        self.payload.iter().map(Word::width).sum()
    }

    /// Payload as a bit string, chunks in order, each most-significant first.
    pub fn render_payload(&self) -> String {
        self.payload.iter().map(Word::to_string).collect()
    }

    /// Flips bit `index` of the payload, counted from the least significant
    /// bit of the last chunk.
    pub(crate) fn flip_payload_bit(&mut self, index: u32) -> Result<()> {
        let total = self.payload_bits();
        let mut remaining = index;
        for chunk in self.payload.iter_mut().rev() {
            if remaining < chunk.width() {
                *chunk = chunk.flip_bit(BitIndex(remaining))?;
                return Ok(());
            }
            remaining -= chunk.width();
        }
        Err(Error::BitIndexOutOfRange { index, width: total })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerifyResult {
    pub valid: bool,
    pub codec: CodecId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostDescriptor {
    pub time_multiplier: f64,
    pub space_multiplier: f64,
    /// Steps a protected operation pays on top of the baseline word traversal.
    pub per_op_extra_steps: u64,
    /// Check-zone bits stored per protected word.
    pub check_bits: u32,
}

impl CostDescriptor {
    pub const NONE: CostDescriptor =
        CostDescriptor { time_multiplier: 1.0, space_multiplier: 1.0, per_op_extra_steps: 0, check_bits: 0 };

    /// A bare multiplier pair, for the theoretical cost model.
    pub fn multipliers(time: f64, space: f64) -> Self {
        Self { time_multiplier: time, space_multiplier: space, ..Self::NONE }
    }
}

/// Steps spent traversing a word once: half its width, rounded up.
pub fn traversal_steps(width: u32) -> u64 {
    u64::from(width.div_ceil(2))
}

/// Bits needed to hold a zero count between 0 and `width`.
pub fn berger_check_width(width: u32) -> u32 {
    u32::BITS - width.leading_zeros()
}

pub trait Codec: fmt::Debug + Send + Sync {
    fn id(&self) -> CodecId;

    fn encode(&self, word: &Word) -> CodecCheck;

    /// Recomputes the check for `word` and compares it against `check`.
    fn verify(&self, word: &Word, check: &CodecCheck) -> Result<VerifyResult> {
        expect_codec(self.id(), check)?;
        Ok(VerifyResult { valid: self.encode(word) == *check, codec: self.id() })
    }

    fn cost(&self, width: u32) -> CostDescriptor;
}

fn expect_codec(expected: CodecId, check: &CodecCheck) -> Result<()> {
    if check.codec == expected {
        Ok(())
    } else {
        Err(Error::CodecMismatch { expected, found: check.codec })
    }
}

/// Stores nothing and accepts every word.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoCheck;

impl Codec for NoCheck {
    fn id(&self) -> CodecId {
        CodecId::None
    }

    fn encode(&self, _word: &Word) -> CodecCheck {
        CodecCheck { codec: CodecId::None, payload: SmallVec::new() }
    }

    fn cost(&self, _width: u32) -> CostDescriptor {
        CostDescriptor::NONE
    }
}

/// Single stored bit: the XOR of all data bits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parity;

impl Codec for Parity {
    fn id(&self) -> CodecId {
        CodecId::Parity
    }

    fn encode(&self, word: &Word) -> CodecCheck {
        let bit = u64::from(word.count_ones() & 1);
        CodecCheck { codec: CodecId::Parity, payload: smallvec![Word::new(bit, 1).expect("one bit")] }
    }

    fn cost(&self, width: u32) -> CostDescriptor {
        CostDescriptor { per_op_extra_steps: traversal_steps(width) + 2, check_bits: 1, ..CostDescriptor::NONE }
    }
}

/// Count of zero bits, stored in binary.
#[derive(Debug, Clone, Copy, Default)]
pub struct Berger;

impl Codec for Berger {
    fn id(&self) -> CodecId {
        CodecId::Berger
    }

    fn encode(&self, word: &Word) -> CodecCheck {
        let width = berger_check_width(word.width());
        let zeros = u64::from(word.count_zeros());
        CodecCheck {
            codec: CodecId::Berger,
            payload: smallvec![Word::new(zeros, width).expect("zero count fits its check width")],
        }
    }

    fn cost(&self, width: u32) -> CostDescriptor {
        CostDescriptor {
            per_op_extra_steps: traversal_steps(width) + 2,
            check_bits: berger_check_width(width),
            ..CostDescriptor::NONE
        }
    }
}

/// Keeps `copies` verbatim replicas and compares all of them on read.
///
/// Stands in for software-implemented error detection, so its cost carries
/// the cited 3x time / 4x space factors rather than its own measured cost.
#[derive(Debug, Clone, Copy)]
pub struct Duplication {
    copies: u32,
}

impl Duplication {
    pub fn new(copies: u32) -> Result<Self> {
        if copies == 0 {
            return Err(Error::InvalidReplication);
        }
        Ok(Self { copies })
    }

    pub fn copies(&self) -> u32 {
        self.copies
    }
}

impl Default for Duplication {
    fn default() -> Self {
        Self { copies: DEFAULT_COPIES }
    }
}

impl Codec for Duplication {
    fn id(&self) -> CodecId {
        CodecId::Duplication
    }

    fn encode(&self, word: &Word) -> CodecCheck {
        CodecCheck { codec: CodecId::Duplication, payload: (0..self.copies).map(|_| *word).collect() }
    }

    fn verify(&self, word: &Word, check: &CodecCheck) -> Result<VerifyResult> {
        expect_codec(CodecId::Duplication, check)?;
        let valid = !check.payload.is_empty() && check.payload.iter().all(|copy| copy == word);
        Ok(VerifyResult { valid, codec: CodecId::Duplication })
    }

    fn cost(&self, width: u32) -> CostDescriptor {
        CostDescriptor {
            time_multiplier: SIED_TIME_MULTIPLIER,
            space_multiplier: SIED_SPACE_MULTIPLIER,
            per_op_extra_steps: u64::from(self.copies) * traversal_steps(width) + 2,
            check_bits: self.copies * width,
        }
    }
}

pub fn parity_encode(word: Word) -> CodecCheck {
    Parity.encode(&word)
}

pub fn parity_verify(word: Word, check: &CodecCheck) -> Result<VerifyResult> {
    Parity.verify(&word, check)
}

pub fn berger_encode(word: Word) -> CodecCheck {
    Berger.encode(&word)
}

pub fn berger_verify(word: Word, check: &CodecCheck) -> Result<VerifyResult> {
    Berger.verify(&word, check)
}

pub fn duplication_encode(word: Word, copies: u32) -> Result<CodecCheck> {
    Ok(Duplication::new(copies)?.encode(&word))
}

pub fn duplication_verify(word: Word, check: &CodecCheck) -> Result<VerifyResult> {
    Duplication::default().verify(&word, check)
}

/// Hamming-1 neighbours of `word`, split by flip direction.
///
/// The first set holds words where a 1-bit was cleared, the second words
/// where a 0-bit was set.
pub fn single_flip_error_sets(word: Word) -> (BTreeSet<Word>, BTreeSet<Word>) {
    word.neighbors().partition(|n| n.count_ones() < word.count_ones())
}

/// Selectable built-in codecs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodecKind {
    None,
    #[default]
    Parity,
    Berger,
    Duplication {
        copies: u32,
    },
}

impl CodecKind {
    pub fn id(&self) -> CodecId {
        match self {
            CodecKind::None => CodecId::None,
            CodecKind::Parity => CodecId::Parity,
            CodecKind::Berger => CodecId::Berger,
            CodecKind::Duplication { .. } => CodecId::Duplication,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Codec>> {
        Ok(match *self {
            CodecKind::None => Arc::new(NoCheck),
            CodecKind::Parity => Arc::new(Parity),
            CodecKind::Berger => Arc::new(Berger),
            CodecKind::Duplication { copies } => Arc::new(Duplication::new(copies)?),
        })
    }
}

impl fmt::Display for CodecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecKind::Duplication { copies } if *copies != DEFAULT_COPIES => write!(f, "dup:{copies}"),
            other => f.write_str(other.id().name()),
        }
    }
}

impl FromStr for CodecKind {
    type Err = Error;

    /// Accepts `none`, `parity`, `berger`, `dup` and `dup:<copies>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CodecKind::None),
            "parity" => Ok(CodecKind::Parity),
            "berger" => Ok(CodecKind::Berger),
            "dup" => Ok(CodecKind::Duplication { copies: DEFAULT_COPIES }),
            other => match other.strip_prefix("dup:").map(str::parse::<u32>) {
                Some(Ok(0)) => Err(Error::InvalidReplication),
                Some(Ok(copies)) => Ok(CodecKind::Duplication { copies }),
                _ => Err(Error::UnknownCodec(other.to_owned())),
            },
        }
    }
}

impl Serialize for CodecKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CodecKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Cost of protecting one `width`-bit word with a built-in codec.
pub fn codec_cost(kind: CodecKind, width: u32) -> Result<CostDescriptor> {
    Ok(kind.build()?.cost(width))
}

/// Name-to-codec table used for command-line selection.
#[derive(Debug, Clone)]
pub struct CodecRegistry {
    codecs: BTreeMap<String, Arc<dyn Codec>>,
}

impl CodecRegistry {
    pub fn empty() -> Self {
        Self { codecs: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        registry.register("none", Arc::new(NoCheck));
        registry.register("parity", Arc::new(Parity));
        registry.register("berger", Arc::new(Berger));
        registry.register("dup", Arc::new(Duplication::default()));
        registry
    }

    /// Adds or replaces the codec registered under `name`.
    pub fn register(&mut self, name: impl Into<String>, codec: Arc<dyn Codec>) {
        self.codecs.insert(name.into(), codec);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Codec>> {
        self.codecs.get(name).cloned().ok_or_else(|| Error::UnknownCodec(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.codecs.keys().map(String::as_str)
    }
}

impl Default for CodecRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
