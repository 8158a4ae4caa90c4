//! Finite multisets over a totally ordered domain.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BagError {
    #[error("multiset underflow: cannot subtract {needed} from {held}")]
    Underflow { held: u64, needed: u64 },
    #[error("multiplicity overflow")]
    Overflow,
}

/// A multiset. Absent elements have multiplicity 0; no zero entry is ever stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bag<E: Ord> {
    entries: BTreeMap<E, u64>,
}

impl<E: Ord> Default for Bag<E> {
    fn default() -> Self {
        Bag { entries: BTreeMap::new() }
    }
}

impl<E: Ord + Clone> Bag<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(e: E, k: u64) -> Self {
        let mut b = Self::new();
        if k > 0 {
            b.entries.insert(e, k);
        }
        b
    }

    /// Builds a bag from (element, multiplicity) pairs; repeated elements accumulate.
    pub fn from_pairs<I: IntoIterator<Item = (E, u64)>>(pairs: I) -> Result<Self, BagError> {
        let mut b = Self::new();
        for (e, k) in pairs {
            b.insert(e, k)?;
        }
        Ok(b)
    }

    /// Adds `k` copies of `e` in place.
    pub fn insert(&mut self, e: E, k: u64) -> Result<(), BagError> {
        if k == 0 {
            return Ok(());
        }
        let slot = self.entries.entry(e).or_insert(0);
        *slot = slot.checked_add(k).ok_or(BagError::Overflow)?;
        Ok(())
    }

    /// Removes `k` copies of `e` in place.
    pub fn remove(&mut self, e: &E, k: u64) -> Result<(), BagError> {
        if k == 0 {
            return Ok(());
        }
        let held = self.multiplicity(e);
        if held < k {
            return Err(BagError::Underflow { held, needed: k });
        }
        if held == k {
            self.entries.remove(e);
        } else {
            *self.entries.get_mut(e).unwrap() = held - k;
        }
        Ok(())
    }

    /// Drops every copy of `e`, returning how many there were.
    pub fn take_all(&mut self, e: &E) -> u64 {
        self.entries.remove(e).unwrap_or(0)
    }

    pub fn add(&self, other: &Bag<E>) -> Result<Bag<E>, BagError> {
        let mut out = self.clone();
        for (e, &k) in &other.entries {
            out.insert(e.clone(), k)?;
        }
        Ok(out)
    }

    pub fn subtract(&self, other: &Bag<E>) -> Result<Bag<E>, BagError> {
        let mut out = self.clone();
        for (e, &k) in &other.entries {
            out.remove(e, k)?;
        }
        Ok(out)
    }

    /// Applies `f` to every element. Elements that collide after mapping accumulate.
    pub fn map<F: Ord + Clone>(&self, mut f: impl FnMut(&E) -> F) -> Result<Bag<F>, BagError> {
        let mut out = Bag::new();
        for (e, &k) in &self.entries {
            out.insert(f(e), k)?;
        }
        Ok(out)
    }

    /// Keeps the entries whose element satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&E) -> bool) -> Bag<E> {
        Bag {
            entries: self
                .entries
                .iter()
                .filter(|(e, _)| keep(e))
                .map(|(e, &k)| (e.clone(), k))
                .collect(),
        }
    }
}

impl<E: Ord> Bag<E> {
    pub fn multiplicity(&self, e: &E) -> u64 {
        self.entries.get(e).copied().unwrap_or(0)
    }

    /// a ≤ b component-wise.
    pub fn leq(&self, other: &Bag<E>) -> bool {
        self.entries.iter().all(|(e, &k)| other.multiplicity(e) >= k)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct elements.
    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Sum of all multiplicities.
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn contains(&self, e: &E) -> bool {
        self.entries.contains_key(e)
    }

    /// Entries in ascending element order.
    pub fn iter(&self) -> impl Iterator<Item = (&E, u64)> + '_ {
        self.entries.iter().map(|(e, &k)| (e, k))
    }

    pub fn elements(&self) -> impl Iterator<Item = &E> + '_ {
        self.entries.keys()
    }
}

impl<E: Ord + fmt::Display> fmt::Display for Bag<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("nilP");
        }
        for (i, (e, k)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{k} . {e}")?;
        }
        Ok(())
    }
}

impl<E: Ord + fmt::Debug> fmt::Debug for Bag<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter()).finish()
    }
}
