//! Fixed-width bit vectors and single-bit flips.
//!
//! Bits are indexed from the least-significant end (`BitIndex(0)` is the
//! rightmost bit). Rendering and parsing go most-significant-first, so the
//! word with bits `0b10110` prints as `"10110"`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: u32 = 8;
pub const MAX_WIDTH: u32 = 64;

/// Position of a bit inside a [`Word`], 0 = least significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitIndex(pub u32);

impl fmt::Display for BitIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A value of 1 to 64 bits. Bits above `width` are always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Word {
    bits: u64,
    width: u8,
}

fn mask(width: u32) -> u64 {
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn check_width(width: u32) -> Result<()> {
    if (1..=MAX_WIDTH).contains(&width) {
        Ok(())
    } else {
        Err(Error::InvalidWidth(width))
    }
}

impl Word {
    /// Builds a word, rejecting values with bits set above `width`.
    pub fn new(bits: u64, width: u32) -> Result<Self> {
        check_width(width)?;
        if bits & !mask(width) != 0 {
            return Err(Error::NonCanonical { bits, width });
        }
        Ok(Self { bits, width: width as u8 })
    }

    /// Builds a word from the low `width` bits of `bits`.
    pub fn truncating(bits: u64, width: u32) -> Result<Self> {
        check_width(width)?;
        Ok(Self { bits: bits & mask(width), width: width as u8 })
    }

    pub fn zero(width: u32) -> Result<Self> {
        Self::new(0, width)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn width(&self) -> u32 {
        u32::from(self.width)
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn count_zeros(&self) -> u32 {
        self.width() - self.count_ones()
    }

    fn check_index(&self, pos: BitIndex) -> Result<()> {
        if pos.0 < self.width() {
            Ok(())
        } else {
            Err(Error::BitIndexOutOfRange { index: pos.0, width: self.width() })
        }
    }

    pub fn bit(&self, pos: BitIndex) -> Result<bool> {
        self.check_index(pos)?;
        Ok(self.bits >> pos.0 & 1 == 1)
    }

    /// Returns a copy of this word with bit `pos` inverted.
    pub fn flip_bit(&self, pos: BitIndex) -> Result<Word> {
        self.check_index(pos)?;
        Ok(Word { bits: self.bits ^ (1u64 << pos.0), width: self.width })
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming_distance(&self, other: &Word) -> Result<u32> {
        if self.width != other.width {
            return Err(Error::WidthMismatch { left: self.width(), right: other.width() });
        }
        Ok((self.bits ^ other.bits).count_ones())
    }

    /// All words at Hamming distance one, ordered by flipped bit index.
    pub fn neighbors(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.width()).map(move |k| Word { bits: self.bits ^ (1u64 << k), width: self.width })
    }
}

pub fn flip_bit(word: Word, pos: BitIndex) -> Result<Word> {
    word.flip_bit(pos)
}

pub fn hamming_distance(a: Word, b: Word) -> Result<u32> {
    a.hamming_distance(&b)
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.width, self.bits).cmp(&(other.width, other.bits))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.width as usize)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let width = s.len() as u32;
        if width == 0 || width > MAX_WIDTH || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::InvalidBitString(s.to_owned()));
        }
        let bits = u64::from_str_radix(s, 2).map_err(|_| Error::InvalidBitString(s.to_owned()))?;
        Word::new(bits, width)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
