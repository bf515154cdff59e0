//! Virtual-to-physical page model used for deduplication and copy-on-write.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VirtualPageId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhysicalPageId(pub u64);

impl fmt::Display for VirtualPageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for PhysicalPageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A word slot: virtual page plus word offset inside the page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Address {
    pub page: VirtualPageId,
    pub offset: u32,
}

impl Address {
    pub fn new(page: VirtualPageId, offset: u32) -> Self {
        Self { page, offset }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.page, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysicalPage {
    id: PhysicalPageId,
    pub(crate) words: Vec<Option<Word>>,
    pub(crate) refcount: u32,
}

impl PhysicalPage {
    pub fn id(&self) -> PhysicalPageId {
        self.id
    }

    /// Slot contents; `None` for slots never written.
    pub fn words(&self) -> &[Option<Word>] {
        &self.words
    }

    pub fn refcount(&self) -> u32 {
        self.refcount
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Mapping {
    pub physical: PhysicalPageId,
    pub cow: bool,
    /// Excluded from deduplication, both as a source and as a merge target.
    pub protected: bool,
}

#[derive(Debug, Clone, Default)]
pub struct PageTable {
    pub(crate) mappings: BTreeMap<VirtualPageId, Mapping>,
    next_virtual: u64,
}

impl PageTable {
    /// Virtual page ids are never reused once released.
    pub(crate) fn allocate(&mut self, physical: PhysicalPageId) -> VirtualPageId {
        let id = VirtualPageId(self.next_virtual);
        self.next_virtual += 1;
        self.mappings.insert(id, Mapping { physical, cow: false, protected: false });
        id
    }

    pub fn get(&self, page: VirtualPageId) -> Option<&Mapping> {
        self.mappings.get(&page)
    }

    pub fn iter(&self) -> impl Iterator<Item = (VirtualPageId, &Mapping)> {
        self.mappings.iter().map(|(k, v)| (*k, v))
    }

    /// Virtual pages currently backed by `physical`, in id order.
    pub fn mapped_to(&self, physical: PhysicalPageId) -> Vec<VirtualPageId> {
        self.iter().filter(|(_, m)| m.physical == physical).map(|(v, _)| v).collect()
    }

    pub fn len(&self) -> usize {
        self.mappings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mappings.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct DataZone {
    pub(crate) pages: BTreeMap<PhysicalPageId, PhysicalPage>,
    next_physical: u64,
}

impl DataZone {
    pub(crate) fn allocate(&mut self, words: Vec<Option<Word>>) -> PhysicalPageId {
        let id = PhysicalPageId(self.next_physical);
        self.next_physical += 1;
        self.pages.insert(id, PhysicalPage { id, words, refcount: 1 });
        id
    }

    pub(crate) fn get(&self, id: PhysicalPageId) -> Option<&PhysicalPage> {
        self.pages.get(&id)
    }

    pub(crate) fn get_mut(&mut self, id: PhysicalPageId) -> Option<&mut PhysicalPage> {
        self.pages.get_mut(&id)
    }
}
