//! Players, coalitions and the exact-enumeration lattice.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

/// Hard ceiling on players: coalitions are `u64` bitmasks.
pub const MAX_PLAYERS: usize = 64;

/// Default cap on `n` for every path that enumerates the coalition lattice.
pub const DEFAULT_ENUM_LIMIT: usize = 20;

/// Largest value the enumeration cap can be raised to.
pub const MAX_ENUM_LIMIT: usize = 30;

static ENUM_LIMIT: AtomicUsize = AtomicUsize::new(DEFAULT_ENUM_LIMIT);

/// Current exact-enumeration cap.
pub fn enum_limit() -> usize {
    ENUM_LIMIT.load(Ordering::Relaxed)
}

/// Sets the exact-enumeration cap for the process. Values above
/// [`MAX_ENUM_LIMIT`] are rejected.
pub fn set_enum_limit(limit: usize) -> Result<()> {
    if limit == 0 || limit > MAX_ENUM_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "enumeration limit must be in 1..={MAX_ENUM_LIMIT}, got {limit}"
        )));
    }
    ENUM_LIMIT.store(limit, Ordering::Relaxed);
    Ok(())
}

pub(crate) fn check_enumerable(n: usize) -> Result<()> {
    let limit = enum_limit();
    if n > limit {
        return Err(Error::TooManyPlayers { n, limit });
    }
    Ok(())
}

/// A subset of the players `0..n`, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    mask: u64,
    n: u8,
}

impl Coalition {
    pub fn empty(n_players: usize) -> Result<Self> {
        if n_players == 0 || n_players > MAX_PLAYERS {
            return Err(Error::InvalidArgument(format!(
                "player count must be in 1..={MAX_PLAYERS}, got {n_players}"
            )));
        }
        Ok(Self {
            mask: 0,
            n: n_players as u8,
        })
    }

    /// The grand coalition `[n]`.
    pub fn grand(n_players: usize) -> Result<Self> {
        let mut c = Self::empty(n_players)?;
        c.mask = full_mask(n_players);
        Ok(c)
    }

    pub fn from_mask(n_players: usize, mask: u64) -> Result<Self> {
        let mut c = Self::empty(n_players)?;
        if mask & !full_mask(n_players) != 0 {
            return Err(Error::IndexOutOfRange {
                index: 63 - mask.leading_zeros() as usize,
                n_players,
            });
        }
        c.mask = mask;
        Ok(c)
    }

    /// Builds a coalition from member indices. Duplicates are rejected.
    pub fn from_members<I: IntoIterator<Item = usize>>(n_players: usize, members: I) -> Result<Self> {
        let mut c = Self::empty(n_players)?;
        for i in members {
            c = c.insert(i)?;
        }
        Ok(c)
    }

    pub fn n_players(&self) -> usize {
        self.n as usize
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n_players() && self.mask & (1 << i) != 0
    }

    /// `S ∪ {i}`; `self` is left untouched.
    pub fn insert(&self, i: usize) -> Result<Self> {
        if i >= self.n_players() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n_players: self.n_players(),
            });
        }
        if self.contains(i) {
            return Err(Error::AlreadyMember(i));
        }
        Ok(Self {
            mask: self.mask | (1 << i),
            n: self.n,
        })
    }

    /// `S \ {i}`, a no-op when `i` is absent.
    pub fn remove(&self, i: usize) -> Self {
        let bit = if i < 64 { 1u64 << i } else { 0 };
        Self {
            mask: self.mask & !bit,
            n: self.n,
        }
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mut m = self.mask;
        std::iter::from_fn(move || {
            if m == 0 {
                return None;
            }
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        })
    }

    pub fn members(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Stable key: ascending comma-joined indices, `""` for the empty set.
    pub fn key(&self) -> String {
        self.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses a key produced by [`Coalition::key`].
    pub fn from_key(n_players: usize, key: &str) -> Result<Self> {
        let key = key.trim();
        let mut c = Self::empty(n_players)?;
        if key.is_empty() {
            return Ok(c);
        }
        let mut last: Option<usize> = None;
        for part in key.split(',') {
            let i: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::BadCoalitionKey(key.to_string()))?;
            if last.is_some_and(|l| i <= l) {
                return Err(Error::BadCoalitionKey(key.to_string()));
            }
            last = Some(i);
            c = c.insert(i)?;
        }
        Ok(c)
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Spreads the low `n-1` bits of `m` around a zero at bit `hole`.
#[inline]
pub(crate) fn insert_zero_bit(m: u64, hole: usize) -> u64 {
    let low = (1u64 << hole) - 1;
    (m & low) | ((m & !low) << 1)
}

/// All `2^(n-1)` subsets of `[n] \ {excluded}`, in ascending bitmask order.
pub fn enumerate_subsets(n: usize, excluded: usize) -> Result<SubsetIter> {
    if n == 0 || n > MAX_PLAYERS {
        return Err(Error::InvalidArgument(format!("player count {n}")));
    }
    check_enumerable(n)?;
    if excluded >= n {
        return Err(Error::IndexOutOfRange {
            index: excluded,
            n_players: n,
        });
    }
    Ok(SubsetIter {
        n,
        excluded,
        next: 0,
        end: 1u64 << (n - 1),
    })
}

/// Iterator returned by [`enumerate_subsets`].
#[derive(Debug, Clone)]
pub struct SubsetIter {
    n: usize,
    excluded: usize,
    next: u64,
    end: u64,
}

impl Iterator for SubsetIter {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        if self.next >= self.end {
            return None;
        }
        let mask = insert_zero_bit(self.next, self.excluded);
        self.next += 1;
        Some(Coalition {
            mask,
            n: self.n as u8,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SubsetIter {}
