//! Visited-node set for graph exploration.
//!
//! A power-of-two table indexed by `id & (s - 1)`. The first id landing on a
//! slot is stored inline; later colliders go to a per-slot overflow list.
//! Lookups check the inline slot first, which answers most queries.

use crate::NodeId;

/// Default exponent offset for [`hash_size`].
pub const DEFAULT_HASH_BITS: u32 = 11;

const EMPTY: NodeId = NodeId::MAX;

/// Table size for a graph of `n` nodes: `2^floor((floor(log2 n) + b) / 2)`.
pub fn hash_size(n: usize, b: u32) -> usize {
    let log2 = n.max(1).ilog2();
    1usize << ((log2 + b) / 2)
}

#[derive(Debug, Clone)]
pub struct VisitedSet {
    mask: usize,
    slots: Vec<NodeId>,
    overflow: Vec<Vec<NodeId>>,
    /// Slots written since the last reset.
    dirty: Vec<u32>,
}

impl VisitedSet {
    /// A set sized for a graph of `n` nodes with the default `b`.
    pub fn for_nodes(n: usize) -> Self {
        Self::with_table_size(hash_size(n, DEFAULT_HASH_BITS))
    }

    /// `size` must be a power of two.
    pub fn with_table_size(size: usize) -> Self {
        assert!(size.is_power_of_two(), "table size {size} is not a power of two");
        VisitedSet {
            mask: size - 1,
            slots: vec![EMPTY; size],
            overflow: vec![Vec::new(); size],
            dirty: Vec::new(),
        }
    }

    pub fn table_size(&self) -> usize {
        self.mask + 1
    }

    #[inline]
    pub fn mark(&mut self, id: NodeId) {
        debug_assert_ne!(id, EMPTY);
        let h = id as usize & self.mask;
        let slot = &mut self.slots[h];
        if *slot == EMPTY {
            *slot = id;
            self.dirty.push(h as u32);
        } else if *slot != id {
            let list = &mut self.overflow[h];
            if !list.contains(&id) {
                list.push(id);
            }
        }
    }

    #[inline]
    pub fn is_marked(&self, id: NodeId) -> bool {
        let h = id as usize & self.mask;
        if self.slots[h] == id {
            return true;
        }
        self.overflow[h].contains(&id)
    }

    /// Marks `id` and reports whether it was unmarked before.
    #[inline]
    pub fn insert(&mut self, id: NodeId) -> bool {
        if self.is_marked(id) {
            false
        } else {
            self.mark(id);
            true
        }
    }

    /// Empties the set, touching only slots written since the last reset.
    pub fn clear(&mut self) {
        for &h in &self.dirty {
            self.slots[h as usize] = EMPTY;
            self.overflow[h as usize].clear();
        }
        self.dirty.clear();
    }

    /// Inline occupant of slot `h`.
    pub fn slot(&self, h: usize) -> Option<NodeId> {
        let v = self.slots[h];
        (v != EMPTY).then_some(v)
    }

    /// Overflow list of slot `h`, in insertion order.
    pub fn overflow(&self, h: usize) -> &[NodeId] {
        &self.overflow[h]
    }
}
