//! Multi-indices addressing entries of a tensor on a product grid.
//!
//! Mode indices are 1-based in every external interface: a full index for a
//! `d`-dimensional tensor with mode sizes `n_1..n_d` has entries
//! `i_k in {1..n_k}`.

use crate::error::{CrossError, Result};
use std::fmt;

/// Ordered tuple of 1-based mode indices. Also used for the partial prefix
/// and suffix indices that make up nested cross sets; the empty index stands
/// for the trivial boundary set.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Box<[u16]>);

impl MultiIndex {
    /// Index with no entries (the boundary prefix/suffix of rank 1).
    pub fn empty() -> Self {
        MultiIndex(Box::new([]))
    }

    /// Builds from 1-based entries. Entries must fit a u16 and be >= 1;
    /// range checks against mode sizes happen in [`MultiIndex::validate`].
    pub fn new(entries: &[usize]) -> Result<Self> {
        let mut v = Vec::with_capacity(entries.len());
        for &e in entries {
            if e == 0 || e > u16::MAX as usize {
                return Err(CrossError::invalid(format!(
                    "mode index {e} outside 1..={}",
                    u16::MAX
                )));
            }
            v.push(e as u16);
        }
        Ok(MultiIndex(v.into_boxed_slice()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based entry at position `k` (0-based position).
    pub fn get(&self, k: usize) -> usize {
        self.0[k] as usize
    }

    pub fn as_u16s(&self) -> &[u16] {
        &self.0
    }

    pub fn entries(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&e| e as usize)
    }

    /// Checks length and per-mode ranges against `dims` (mode sizes).
    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.0.len() != dims.len() {
            return Err(CrossError::invalid(format!(
                "index length {} does not match dimension {}",
                self.0.len(),
                dims.len()
            )));
        }
        for (k, &e) in self.0.iter().enumerate() {
            if e == 0 || e as usize > dims[k] {
                return Err(CrossError::invalid(format!(
                    "mode index {} at position {} outside 1..={}",
                    e,
                    k + 1,
                    dims[k]
                )));
            }
        }
        Ok(())
    }

    /// `self` followed by `tail`.
    pub fn concat(&self, tail: &MultiIndex) -> MultiIndex {
        let mut v = Vec::with_capacity(self.0.len() + tail.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&tail.0);
        MultiIndex(v.into_boxed_slice())
    }

    /// `self` with one 1-based entry appended.
    pub fn extended_back(&self, i: usize) -> MultiIndex {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(i as u16);
        MultiIndex(v.into_boxed_slice())
    }

    /// `self` with one 1-based entry prepended.
    pub fn extended_front(&self, i: usize) -> MultiIndex {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(i as u16);
        v.extend_from_slice(&self.0);
        MultiIndex(v.into_boxed_slice())
    }

    /// Splits into the prefix of length `k` and the suffix of length `d-k`.
    pub fn split_at(&self, k: usize) -> Result<(MultiIndex, MultiIndex)> {
        if k == 0 || k >= self.0.len() {
            return Err(CrossError::invalid(format!(
                "split position {k} outside 1..={}",
                self.0.len().saturating_sub(1)
            )));
        }
        let (a, b) = self.0.split_at(k);
        Ok((MultiIndex(a.into()), MultiIndex(b.into())))
    }

    /// Prefix of length `k` (0 <= k <= len).
    pub fn prefix(&self, k: usize) -> MultiIndex {
        MultiIndex(self.0[..k].into())
    }

    /// Suffix starting at position `k`.
    pub fn suffix(&self, k: usize) -> MultiIndex {
        MultiIndex(self.0[k..].into())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (p, e) in self.0.iter().enumerate() {
            if p > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Splits a full index into `(i_1..i_k, i_{k+1}..i_d)`, both halves nonempty.
pub fn split_index(idx: &MultiIndex, k: usize) -> Result<(MultiIndex, MultiIndex)> {
    idx.split_at(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_definition() {
        let idx = MultiIndex::new(&[7, 8]).unwrap();
        let (a, b) = split_index(&idx, 1).unwrap();
        assert_eq!(a, MultiIndex::new(&[7]).unwrap());
        assert_eq!(b, MultiIndex::new(&[8]).unwrap());
    }

    #[test]
    fn split_rejects_boundaries() {
        let idx = MultiIndex::new(&[5]).unwrap();
        assert!(split_index(&idx, 1).is_err());
        let idx = MultiIndex::new(&[5, 6, 7]).unwrap();
        assert!(split_index(&idx, 0).is_err());
        assert!(split_index(&idx, 3).is_err());
    }

    #[test]
    fn validate_ranges() {
        let idx = MultiIndex::new(&[1, 4]).unwrap();
        assert!(idx.validate(&[2, 4]).is_ok());
        assert!(idx.validate(&[2, 3]).is_err());
        assert!(idx.validate(&[2]).is_err());
        assert!(MultiIndex::new(&[0]).is_err());
    }

    #[test]
    fn concat_and_extend() {
        let a = MultiIndex::new(&[1, 2]).unwrap();
        let b = MultiIndex::new(&[3]).unwrap();
        assert_eq!(a.concat(&b), MultiIndex::new(&[1, 2, 3]).unwrap());
        assert_eq!(a.extended_back(9), MultiIndex::new(&[1, 2, 9]).unwrap());
        assert_eq!(a.extended_front(9), MultiIndex::new(&[9, 1, 2]).unwrap());
        assert_eq!(MultiIndex::empty().extended_back(4).len(), 1);
    }

    proptest! {
        #[test]
        fn split_concat_roundtrip(entries in prop::collection::vec(1usize..100, 2..12),
                                  kfrac in 0.0f64..1.0) {
            let idx = MultiIndex::new(&entries).unwrap();
            let k = 1 + ((entries.len() - 1) as f64 * kfrac) as usize;
            let k = k.min(entries.len() - 1);
            let (a, b) = split_index(&idx, k).unwrap();
            prop_assert_eq!(a.concat(&b), idx);
        }
    }
}
