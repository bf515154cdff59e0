//! A memory store that checks only what it has been told matters.
//!
//! Words carry a one-way priority flag. Under the `Enhanced` strategy only
//! flagged words get a codec check on write and a verification on read; under
//! `Full` every word does; under `None` nothing is checked. All access goes
//! through [`monitor::ProtectedStore`], which keeps data, checks, flags, and a
//! hash-chained audit log in separate zones and exempts protected pages from
//! deduplication.
//!
//! Around the store:
//!
//! - [`codec`]: parity, Berger, and duplication codecs behind one trait.
//! - [`fault`]: random single-bit soft errors, targeted flips, and a
//!   dedup-then-hammer attack scenario.
//! - [`sim`]: the detection-vs-overhead experiment with step accounting and
//!   the normalized cost model.
//! - [`sweep`]: independent runs across seeds, parallel with the `parallel`
//!   feature.

pub mod codec;
pub mod error;
pub mod fault;
pub mod monitor;
pub mod rng;
pub mod sim;
pub mod sweep;
pub mod word;

pub use error::{Error, Result};
pub use word::{BitIndex, Word};
