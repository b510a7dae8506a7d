//! Player sets encoded as bitmasks.
//!
//! Bit 0 is always the infrastructure provider; bit `i` (for `i >= 1`) is
//! service provider `SP_i`. Enumeration order over coalitions is plain
//! integer order of the mask, which keeps every scan deterministic.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Hard bound on the number of players handled by exhaustive enumeration.
pub const MAX_PLAYERS: usize = 20;

pub const INP_INDEX: usize = 0;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_bits(bits: u32) -> Self {
        Coalition(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// All players `0..n`.
    pub fn grand(n_players: usize) -> Self {
        debug_assert!(n_players <= MAX_PLAYERS);
        if n_players == 0 {
            Coalition(0)
        } else {
            Coalition(((1u64 << n_players) - 1) as u32)
        }
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        Coalition(members.into_iter().fold(0u32, |acc, i| acc | (1 << i)))
    }

    pub fn singleton(i: usize) -> Self {
        Coalition(1 << i)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        Coalition(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        Coalition(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Coalition) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn difference(self, other: Coalition) -> Self {
        Coalition(self.0 & !other.0)
    }

    pub fn has_inp(self) -> bool {
        self.contains(INP_INDEX)
    }

    pub fn has_sp(self) -> bool {
        self.0 & !1 != 0
    }

    /// A coalition that can generate value: the provider plus at least one SP.
    pub fn is_viable(self) -> bool {
        self.has_inp() && self.has_sp()
    }

    /// Member indices in increasing order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    /// SP indices (1-based) in increasing order.
    pub fn sps(self) -> Members {
        Members(self.0 & !1)
    }

    /// Every subset of `self`, including the empty set and `self`, in
    /// increasing mask order.
    pub fn subsets(self) -> Subsets {
        Subsets {
            full: self.0,
            next: Some(0),
        }
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.members().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            if i == INP_INDEX {
                write!(f, "InP")?;
            } else {
                write!(f, "SP{i}")?;
            }
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub struct Members(u32);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

/// Subset enumeration via the `(sub - full) & full` successor trick.
pub struct Subsets {
    full: u32,
    next: Option<u32>,
}

impl Iterator for Subsets {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        let cur = self.next?;
        self.next = if cur == self.full {
            None
        } else {
            Some((cur.wrapping_sub(self.full)) & self.full)
        };
        Some(Coalition(cur))
    }
}
