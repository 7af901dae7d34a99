//! Nested cross index sets for a tensor-train interpolation.
//!
//! For each interface `k = 1..d-1` the structure holds the left set
//! `I_{<=k}` (prefix indices of length k) and the right set `I_{>k}`
//! (suffix indices of length d-k), with equal cardinality `r_k`. Nestedness
//! means `I_{<=k+1}` extends members of `I_{<=k}` by one mode index and
//! `I_{>k}` extends members of `I_{>k+1}` by one mode index in front; it is
//! the precondition for the interpolation property of the TT cross model.

use crate::error::{CrossError, Result};
use crate::index::MultiIndex;
use std::collections::HashSet;
use std::fmt;

/// Which family of sets a pivot extends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A counterexample to nestedness or set well-formedness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestednessViolation {
    /// 1-based interface whose set contains the offending index.
    pub interface: usize,
    pub side: Side,
    pub index: MultiIndex,
    pub reason: &'static str,
}

impl fmt::Display for NestednessViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} set at interface {}: {} ({:?})",
            match self.side {
                Side::Left => "left",
                Side::Right => "right",
            },
            self.interface,
            self.reason,
            self.index
        )
    }
}

/// Left and right cross index sets for every interface of a d-mode tensor.
#[derive(Clone, Debug)]
pub struct NestedIndexSets {
    dims: Vec<usize>,
    /// left[k-1] = I_{<=k}, members of length k, for k = 1..d-1.
    left: Vec<Vec<MultiIndex>>,
    /// right[k-1] = I_{>k}, members of length d-k, for k = 1..d-1.
    right: Vec<Vec<MultiIndex>>,
    root: [MultiIndex; 1],
}

impl NestedIndexSets {
    /// Rank-1 sets pinned at the mid-grid index of every mode,
    /// `i_k = ceil(n_k / 2)`.
    pub fn rank_one_midgrid(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(CrossError::invalid("tensor must have at least one mode"));
        }
        let mid: Vec<usize> = dims.iter().map(|&n| n.div_ceil(2)).collect();
        let d = dims.len();
        let mut left = Vec::with_capacity(d.saturating_sub(1));
        let mut right = Vec::with_capacity(d.saturating_sub(1));
        for k in 1..d {
            left.push(vec![MultiIndex::new(&mid[..k])?]);
            right.push(vec![MultiIndex::new(&mid[k..])?]);
        }
        Ok(NestedIndexSets {
            dims: dims.to_vec(),
            left,
            right,
            root: [MultiIndex::empty()],
        })
    }

    /// Builds from explicit per-interface sets. Lengths and ranges are
    /// validated; nestedness is not (call [`Self::check_nestedness`]).
    pub fn from_sets(
        dims: &[usize],
        left: Vec<Vec<MultiIndex>>,
        right: Vec<Vec<MultiIndex>>,
    ) -> Result<Self> {
        let d = dims.len();
        if d == 0 || left.len() != d.saturating_sub(1) || right.len() != d.saturating_sub(1) {
            return Err(CrossError::invalid(
                "need exactly d-1 left and right sets for a d-mode tensor",
            ));
        }
        for k in 1..d {
            let (l, r) = (&left[k - 1], &right[k - 1]);
            if l.is_empty() || l.len() != r.len() {
                return Err(CrossError::invalid(format!(
                    "interface {k}: left and right sets must be nonempty and equal-sized"
                )));
            }
            for m in l {
                m.validate(&dims[..k])?;
            }
            for m in r {
                m.validate(&dims[k..])?;
            }
        }
        Ok(NestedIndexSets {
            dims: dims.to_vec(),
            left,
            right,
            root: [MultiIndex::empty()],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes d.
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Number of interfaces, d-1.
    pub fn interfaces(&self) -> usize {
        self.dims.len() - 1
    }

    /// Rank r_k for k in 0..=d; boundary ranks are 1.
    pub fn rank(&self, k: usize) -> usize {
        if k == 0 || k == self.dims.len() {
            1
        } else {
            self.left[k - 1].len()
        }
    }

    pub fn max_rank(&self) -> usize {
        (0..=self.dims.len()).map(|k| self.rank(k)).max().unwrap()
    }

    /// All ranks r_0..r_d (boundaries included).
    pub fn ranks(&self) -> Vec<usize> {
        (0..=self.dims.len()).map(|k| self.rank(k)).collect()
    }

    /// I_{<=k} for k in 1..=d-1.
    pub fn left(&self, k: usize) -> &[MultiIndex] {
        &self.left[k - 1]
    }

    /// I_{>k} for k in 1..=d-1.
    pub fn right(&self, k: usize) -> &[MultiIndex] {
        &self.right[k - 1]
    }

    /// I_{<=k} for k in 0..=d-1, where k = 0 is the trivial root set
    /// containing one empty index.
    pub fn left_or_root(&self, k: usize) -> &[MultiIndex] {
        if k == 0 {
            &self.root
        } else {
            &self.left[k - 1]
        }
    }

    /// I_{>k} for k in 1..=d, where k = d is the trivial root set.
    pub fn right_or_root(&self, k: usize) -> &[MultiIndex] {
        if k == self.dims.len() {
            &self.root
        } else {
            &self.right[k - 1]
        }
    }

    /// Appends a new left index at interface k (validated, must be new).
    pub fn push_left(&mut self, k: usize, idx: MultiIndex) -> Result<()> {
        idx.validate(&self.dims[..k])?;
        if self.left[k - 1].contains(&idx) {
            return Err(CrossError::invalid(format!(
                "duplicate left index {idx:?} at interface {k}"
            )));
        }
        self.left[k - 1].push(idx);
        Ok(())
    }

    /// Appends a new right index at interface k (validated, must be new).
    pub fn push_right(&mut self, k: usize, idx: MultiIndex) -> Result<()> {
        idx.validate(&self.dims[k..])?;
        if self.right[k - 1].contains(&idx) {
            return Err(CrossError::invalid(format!(
                "duplicate right index {idx:?} at interface {k}"
            )));
        }
        self.right[k - 1].push(idx);
        Ok(())
    }

    /// Replaces both sets at interface k (used by the rank-adapting sweeps).
    pub fn replace(
        &mut self,
        k: usize,
        left: Vec<MultiIndex>,
        right: Vec<MultiIndex>,
    ) -> Result<()> {
        if left.is_empty() || left.len() != right.len() {
            return Err(CrossError::invalid(format!(
                "interface {k}: replacement sets must be nonempty and equal-sized"
            )));
        }
        for m in &left {
            m.validate(&self.dims[..k])?;
        }
        for m in &right {
            m.validate(&self.dims[k..])?;
        }
        self.left[k - 1] = left;
        self.right[k - 1] = right;
        Ok(())
    }

    /// Replaces only the left set at interface k, keeping the right set.
    pub fn replace_left(&mut self, k: usize, left: Vec<MultiIndex>) -> Result<()> {
        if left.len() != self.right[k - 1].len() {
            return Err(CrossError::invalid(format!(
                "interface {k}: left replacement must match right cardinality"
            )));
        }
        for m in &left {
            m.validate(&self.dims[..k])?;
        }
        self.left[k - 1] = left;
        Ok(())
    }

    /// Replaces only the right set at interface k.
    pub fn replace_right(&mut self, k: usize, right: Vec<MultiIndex>) -> Result<()> {
        if right.len() != self.left[k - 1].len() {
            return Err(CrossError::invalid(format!(
                "interface {k}: right replacement must match left cardinality"
            )));
        }
        for m in &right {
            m.validate(&self.dims[k..])?;
        }
        self.right[k - 1] = right;
        Ok(())
    }

    /// Verifies duplicates-free sets and the nestedness relations
    /// `I_{<=k+1} subset I_{<=k} x I_{k+1}` and
    /// `I_{>k} subset I_{k+1} x I_{>k+1}`, returning the first
    /// counterexample found.
    pub fn check_nestedness(&self) -> std::result::Result<(), NestednessViolation> {
        let d = self.dims.len();
        for k in 1..d {
            for (side, set) in [(Side::Left, self.left(k)), (Side::Right, self.right(k))] {
                let mut seen = HashSet::new();
                for m in set {
                    if !seen.insert(m.clone()) {
                        return Err(NestednessViolation {
                            interface: k,
                            side,
                            index: m.clone(),
                            reason: "duplicate member",
                        });
                    }
                }
            }
        }
        for k in 1..d - 1 {
            let parents: HashSet<&MultiIndex> = self.left(k).iter().collect();
            for m in self.left(k + 1) {
                if !parents.contains(&m.prefix(k)) {
                    return Err(NestednessViolation {
                        interface: k + 1,
                        side: Side::Left,
                        index: m.clone(),
                        reason: "prefix not in the previous left set",
                    });
                }
            }
            let parents: HashSet<&MultiIndex> = self.right(k + 1).iter().collect();
            for m in self.right(k) {
                if !parents.contains(&m.suffix(1)) {
                    return Err(NestednessViolation {
                        interface: k,
                        side: Side::Right,
                        index: m.clone(),
                        reason: "suffix not in the next right set",
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[usize]) -> MultiIndex {
        MultiIndex::new(e).unwrap()
    }

    #[test]
    fn midgrid_init_is_nested_rank_one() {
        let sets = NestedIndexSets::rank_one_midgrid(&[4, 5, 6]).unwrap();
        assert_eq!(sets.ranks(), vec![1, 1, 1, 1]);
        assert_eq!(sets.left(1), &[mi(&[2])]);
        assert_eq!(sets.left(2), &[mi(&[2, 3])]);
        assert_eq!(sets.right(2), &[mi(&[3])]);
        assert_eq!(sets.right(1), &[mi(&[3, 3])]);
        sets.check_nestedness().unwrap();
    }

    #[test]
    fn rank_one_product_sets_are_nested() {
        let left = vec![vec![mi(&[1])], vec![mi(&[1, 1])]];
        let right = vec![vec![mi(&[1, 1])], vec![mi(&[1])]];
        let sets = NestedIndexSets::from_sets(&[2, 2, 2], left, right).unwrap();
        sets.check_nestedness().unwrap();
    }

    #[test]
    fn prefix_mismatch_detected() {
        let left = vec![vec![mi(&[1])], vec![mi(&[2, 1])]];
        let right = vec![vec![mi(&[1, 1])], vec![mi(&[1])]];
        let sets = NestedIndexSets::from_sets(&[2, 2, 2], left, right).unwrap();
        let v = sets.check_nestedness().unwrap_err();
        assert_eq!(v.interface, 2);
        assert_eq!(v.side, Side::Left);
        assert_eq!(v.index, mi(&[2, 1]));
    }

    #[test]
    fn suffix_mismatch_detected() {
        let left = vec![vec![mi(&[1])], vec![mi(&[1, 1])]];
        let right = vec![vec![mi(&[1, 2])], vec![mi(&[1])]];
        let sets = NestedIndexSets::from_sets(&[2, 2, 2], left, right).unwrap();
        let v = sets.check_nestedness().unwrap_err();
        assert_eq!(v.interface, 1);
        assert_eq!(v.side, Side::Right);
    }

    #[test]
    fn push_rejects_duplicates_and_bad_ranges() {
        let mut sets = NestedIndexSets::rank_one_midgrid(&[4, 4]).unwrap();
        assert!(sets.push_left(1, mi(&[2])).is_err());
        assert!(sets.push_left(1, mi(&[5])).is_err());
        assert!(sets.push_left(1, mi(&[1, 1])).is_err());
        sets.push_left(1, mi(&[3])).unwrap();
        assert_eq!(sets.rank(1), 2);
    }
}
