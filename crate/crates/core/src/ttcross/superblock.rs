//! The two-mode superblock seen by interface k of a d-mode tensor.
//!
//! Rows enumerate pairs of a left parent `a` from `I_{<=k-1}` and a grid
//! index `i_k`; columns enumerate pairs of a grid index `i_{k+1}` and a
//! right parent `b` from `I_{>k+1}`. Flat layouts are fixed so positions
//! are reproducible:
//!
//! - `row_flat = a_pos + r_left * (i_k - 1)` (parent position fastest),
//! - `col_flat = (i_{k+1} - 1) + n_{k+1} * b_pos` (grid index fastest).
//!
//! Entries are oracle evaluations of the concatenated full index, so a
//! memoizing oracle makes repeated access across sweeps cheap even though
//! flat positions shift as the parent sets grow.

use crate::error::{CrossError, Result};
use crate::index::MultiIndex;
use crate::matcross::MatrixAccess;
use crate::oracle::FunctionOracle;
use crate::sets::NestedIndexSets;
use crate::Scalar;
use nalgebra::DMatrix;
use std::collections::HashMap;

pub(crate) struct Superblock {
    oracle: FunctionOracle,
    /// Interface, 1-based.
    k: usize,
    left: Vec<MultiIndex>,
    right: Vec<MultiIndex>,
    n_k: usize,
    n_k1: usize,
}

impl Superblock {
    pub(crate) fn at_interface(
        oracle: &FunctionOracle,
        sets: &NestedIndexSets,
        k: usize,
    ) -> Self {
        let dims = sets.dims();
        Superblock {
            oracle: oracle.clone(),
            k,
            left: sets.left_or_root(k - 1).to_vec(),
            right: sets.right_or_root(k + 1).to_vec(),
            n_k: dims[k - 1],
            n_k1: dims[k],
        }
    }

    /// Left prefix (length k) encoded by a flat row position.
    pub(crate) fn decode_row(&self, flat: usize) -> Result<MultiIndex> {
        let r_left = self.left.len();
        if flat >= r_left * self.n_k {
            return Err(CrossError::invalid(format!(
                "row {flat} out of range at interface {}",
                self.k
            )));
        }
        let a = flat % r_left;
        let i_k = flat / r_left + 1;
        Ok(self.left[a].extended_back(i_k))
    }

    /// Right suffix (length d-k) encoded by a flat column position.
    pub(crate) fn decode_col(&self, flat: usize) -> Result<MultiIndex> {
        let r_right = self.right.len();
        if flat >= r_right * self.n_k1 {
            return Err(CrossError::invalid(format!(
                "column {flat} out of range at interface {}",
                self.k
            )));
        }
        let i_k1 = flat % self.n_k1 + 1;
        let b = flat / self.n_k1;
        Ok(self.right[b].extended_front(i_k1))
    }

    /// Flat row positions of left-set members (each of length k); fails
    /// if a member's prefix is not among the current left parents.
    pub(crate) fn encode_rows(&self, members: &[MultiIndex]) -> Result<Vec<usize>> {
        let pos: HashMap<&MultiIndex, usize> =
            self.left.iter().enumerate().map(|(p, m)| (m, p)).collect();
        members
            .iter()
            .map(|m| {
                let a = *pos.get(&m.prefix(self.k - 1)).ok_or_else(|| {
                    CrossError::invalid(format!(
                        "left index {m:?} has no parent in I at interface {}",
                        self.k
                    ))
                })?;
                Ok(a + self.left.len() * (m.get(self.k - 1) - 1))
            })
            .collect()
    }

    /// Flat column positions of right-set members (each starting at mode
    /// k+1); fails if a member's tail is not among the current right
    /// parents.
    pub(crate) fn encode_cols(&self, members: &[MultiIndex]) -> Result<Vec<usize>> {
        let pos: HashMap<&MultiIndex, usize> =
            self.right.iter().enumerate().map(|(p, m)| (m, p)).collect();
        members
            .iter()
            .map(|m| {
                let b = *pos.get(&m.suffix(1)).ok_or_else(|| {
                    CrossError::invalid(format!(
                        "right index {m:?} has no parent in I at interface {}",
                        self.k
                    ))
                })?;
                Ok((m.get(0) - 1) + self.n_k1 * b)
            })
            .collect()
    }

    /// Materializes the full superblock, guarded by an entry-count cap.
    pub(crate) fn materialize(&self, cap: usize) -> Result<DMatrix<Scalar>> {
        let (m, n) = (self.nrows(), self.ncols());
        if m.saturating_mul(n) > cap {
            return Err(CrossError::SuperblockTooLarge {
                interface: self.k,
                entries: m.saturating_mul(n),
                cap,
            });
        }
        let mut out = DMatrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                out[(i, j)] = self.entry(i, j)?;
            }
        }
        Ok(out)
    }

    /// Materializes the tall block of all rows against the given flat
    /// columns, in column order.
    pub(crate) fn materialize_columns(&self, cols: &[usize]) -> Result<DMatrix<Scalar>> {
        let m = self.nrows();
        let mut out = DMatrix::zeros(m, cols.len());
        for (p, &j) in cols.iter().enumerate() {
            for i in 0..m {
                out[(i, p)] = self.entry(i, j)?;
            }
        }
        Ok(out)
    }

    /// Materializes the wide block of the given flat rows against all
    /// columns, in row order.
    pub(crate) fn materialize_rows(&self, rows: &[usize]) -> Result<DMatrix<Scalar>> {
        let n = self.ncols();
        let mut out = DMatrix::zeros(rows.len(), n);
        for (p, &i) in rows.iter().enumerate() {
            for j in 0..n {
                out[(p, j)] = self.entry(i, j)?;
            }
        }
        Ok(out)
    }
}

impl MatrixAccess for Superblock {
    fn nrows(&self) -> usize {
        self.left.len() * self.n_k
    }

    fn ncols(&self) -> usize {
        self.n_k1 * self.right.len()
    }

    fn entry(&self, i: usize, j: usize) -> Result<Scalar> {
        let row = self.decode_row(i)?;
        let col = self.decode_col(j)?;
        self.oracle.eval(&row.concat(&col))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn oracle(dims: &[usize]) -> FunctionOracle {
        FunctionOracle::new(
            dims,
            Arc::new(|idx: &MultiIndex| {
                idx.entries()
                    .enumerate()
                    .map(|(k, i)| (i as Scalar) * (10.0 as Scalar).powi(k as i32))
                    .sum()
            }),
        )
        .unwrap()
    }

    fn mi(e: &[usize]) -> MultiIndex {
        MultiIndex::new(e).unwrap()
    }

    #[test]
    fn flat_layout_is_parent_fastest_on_rows_and_grid_fastest_on_columns() {
        let dims = [3usize, 3, 4, 2];
        let orc = oracle(&dims);
        let left = vec![
            vec![mi(&[1]), mi(&[3])],
            vec![mi(&[1, 2]), mi(&[3, 1])],
            vec![mi(&[1, 2, 4]), mi(&[3, 1, 2])],
        ];
        let right = vec![
            vec![mi(&[2, 4, 1]), mi(&[1, 2, 2])],
            vec![mi(&[4, 1]), mi(&[2, 2])],
            vec![mi(&[1]), mi(&[2])],
        ];
        let sets = NestedIndexSets::from_sets(&dims, left, right).unwrap();
        sets.check_nestedness().unwrap();
        let sb = Superblock::at_interface(&orc, &sets, 2);
        assert_eq!(sb.nrows(), 2 * 3);
        assert_eq!(sb.ncols(), 4 * 2);
        // row_flat = a + 2 (i_2 - 1); parent a = 1 and i_2 = 2 give 3.
        assert_eq!(sb.decode_row(3).unwrap(), mi(&[3, 2]));
        // col_flat = (i_3 - 1) + 4 b; i_3 = 3 and parent b = 1 give 6.
        assert_eq!(sb.decode_col(6).unwrap(), mi(&[3, 2]));
        assert_eq!(sb.encode_rows(&[mi(&[3, 2])]).unwrap(), vec![3]);
        assert_eq!(sb.encode_cols(&[mi(&[3, 2])]).unwrap(), vec![6]);
    }

    #[test]
    fn entries_equal_oracle_values_at_concatenated_indices() {
        let dims = [2usize, 3, 2];
        let orc = oracle(&dims);
        let sets = NestedIndexSets::rank_one_midgrid(&dims).unwrap();
        let sb = Superblock::at_interface(&orc, &sets, 1);
        for i in 0..sb.nrows() {
            for j in 0..sb.ncols() {
                let full = sb.decode_row(i).unwrap().concat(&sb.decode_col(j).unwrap());
                assert_eq!(sb.entry(i, j).unwrap(), orc.eval(&full).unwrap());
            }
        }
    }

    #[test]
    fn roundtrip_encode_decode_covers_every_position() {
        let dims = [2usize, 4, 3, 2];
        let orc = oracle(&dims);
        let left = vec![
            vec![mi(&[1]), mi(&[2])],
            vec![mi(&[1, 3]), mi(&[2, 1])],
            vec![mi(&[1, 3, 2]), mi(&[2, 1, 1])],
        ];
        let right = vec![
            vec![mi(&[1, 3, 1]), mi(&[4, 2, 2])],
            vec![mi(&[3, 1]), mi(&[2, 2])],
            vec![mi(&[1]), mi(&[2])],
        ];
        let sets = NestedIndexSets::from_sets(&dims, left, right).unwrap();
        for k in 1..dims.len() {
            let sb = Superblock::at_interface(&orc, &sets, k);
            for flat in 0..sb.nrows() {
                let idx = sb.decode_row(flat).unwrap();
                assert_eq!(sb.encode_rows(&[idx]).unwrap()[0], flat);
            }
            for flat in 0..sb.ncols() {
                let idx = sb.decode_col(flat).unwrap();
                assert_eq!(sb.encode_cols(&[idx]).unwrap()[0], flat);
            }
        }
    }

    #[test]
    fn materialize_respects_the_entry_cap() {
        let dims = [4usize, 5, 4];
        let orc = oracle(&dims);
        let sets = NestedIndexSets::rank_one_midgrid(&dims).unwrap();
        let sb = Superblock::at_interface(&orc, &sets, 2);
        assert!(matches!(
            sb.materialize(10),
            Err(CrossError::SuperblockTooLarge { interface: 2, .. })
        ));
        let full = sb.materialize(1_000).unwrap();
        assert_eq!((full.nrows(), full.ncols()), (5, 4));
    }
}
