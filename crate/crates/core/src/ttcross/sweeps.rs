//! Alternating sweep strategies over the interfaces of the tensor.
//!
//! The fixed-rank strategy re-selects dominant rows (left to right) or
//! columns (right to left) of each interface unfolding by maxvol, keeping
//! cardinalities unchanged. The rank-adaptive strategy materializes each
//! interface superblock, truncates its SVD at a relative accuracy, and
//! replaces both index sets with maxvol selections from the singular
//! factors. Replacements always decode to one-step extensions of current
//! neighbor sets, so the side being rebuilt ends the pass nested; a final
//! fixed-rank pass in the opposite direction restores nestedness on the
//! other side after rank adaptation.

use crate::error::Result;
use crate::matcross::maxvol_rows;
use crate::oracle::FunctionOracle;
use crate::sets::NestedIndexSets;
use crate::svd::truncated_svd;
use crate::ttcross::superblock::Superblock;
use crate::Scalar;

/// Swap acceptance slack of the maxvol iteration.
pub(crate) const MAXVOL_SWAP_TOL: Scalar = 1e-2;

/// One fixed-rank half sweep. Left to right it replaces each left set by
/// the maxvol rows of the tall unfolding against the current right set;
/// right to left it mirrors this for the right sets.
pub(crate) fn als_half_sweep(
    oracle: &FunctionOracle,
    sets: &mut NestedIndexSets,
    left_to_right: bool,
    swap_tol: Scalar,
) -> Result<()> {
    let d = sets.dim();
    if left_to_right {
        for k in 1..d {
            let sb = Superblock::at_interface(oracle, sets, k);
            let cols = sb.encode_cols(sets.right(k))?;
            let tall = sb.materialize_columns(&cols)?;
            let picked = maxvol_rows(&tall, swap_tol)?;
            let new_left = picked
                .into_iter()
                .map(|flat| sb.decode_row(flat))
                .collect::<Result<Vec<_>>>()?;
            sets.replace_left(k, new_left)?;
        }
    } else {
        for k in (1..d).rev() {
            let sb = Superblock::at_interface(oracle, sets, k);
            let rows = sb.encode_rows(sets.left(k))?;
            let wide = sb.materialize_rows(&rows)?;
            let picked = maxvol_rows(&wide.transpose(), swap_tol)?;
            let new_right = picked
                .into_iter()
                .map(|flat| sb.decode_col(flat))
                .collect::<Result<Vec<_>>>()?;
            sets.replace_right(k, new_right)?;
        }
    }
    Ok(())
}

/// One rank-adaptive half sweep: per interface, materialize the
/// superblock (bounded by `cap` entries), truncate its SVD at relative
/// accuracy `eps` (rank clamped to `[1, max_rank]`), and replace both
/// index sets with maxvol selections from the left and right singular
/// factors.
pub(crate) fn dmrg_half_sweep(
    oracle: &FunctionOracle,
    sets: &mut NestedIndexSets,
    left_to_right: bool,
    eps: Scalar,
    max_rank: usize,
    cap: usize,
    swap_tol: Scalar,
) -> Result<()> {
    let d = sets.dim();
    let order: Vec<usize> = if left_to_right {
        (1..d).collect()
    } else {
        (1..d).rev().collect()
    };
    for k in order {
        let sb = Superblock::at_interface(oracle, sets, k);
        let block = sb.materialize(cap)?;
        let svd = truncated_svd(&block, eps, Some(max_rank))?;
        let row_flats = maxvol_rows(&svd.u, swap_tol)?;
        let col_flats = maxvol_rows(&svd.v_t.transpose(), swap_tol)?;
        let new_left = row_flats
            .into_iter()
            .map(|flat| sb.decode_row(flat))
            .collect::<Result<Vec<_>>>()?;
        let new_right = col_flats
            .into_iter()
            .map(|flat| sb.decode_col(flat))
            .collect::<Result<Vec<_>>>()?;
        sets.replace(k, new_left, new_right)?;
    }
    Ok(())
}
