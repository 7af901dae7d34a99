//! Greedy pivot engine: one cross-expansion step per interface per sweep.
//!
//! Each visit rebuilds the interface's cross state from the current index
//! sets (flat positions shift as neighboring sets grow, while the
//! underlying entries stay memoized), runs one greedy expansion step on
//! the superblock, and on acceptance pushes the decoded pivot into both
//! index sets. Pivots decode as one-step extensions of existing members,
//! so nestedness is preserved by construction.
//!
//! Every interface draws randomness from its own counter-based stream, so
//! the pivot history does not depend on how interfaces are partitioned
//! among workers.

use crate::error::Result;
use crate::index::MultiIndex;
use crate::matcross::{CrossState, ExpandConfig, ExpandOutcome};
use crate::oracle::FunctionOracle;
use crate::sets::NestedIndexSets;
use crate::ttcross::superblock::Superblock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-interface random stream: a fixed seed with the interface number as
/// the stream identifier.
pub(crate) fn interface_rng(seed: u64, interface: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(interface as u64);
    rng
}

/// A pivot accepted at one interface: the new left and right set members.
pub(crate) type AcceptedPivot = (MultiIndex, MultiIndex);

/// One greedy expansion attempt at interface k. Returns the accepted
/// pivot, or `None` when the interface is rank-capped or no residual
/// exceeds the threshold.
pub(crate) fn greedy_interface_step(
    oracle: &FunctionOracle,
    sets: &mut NestedIndexSets,
    k: usize,
    expand: &ExpandConfig,
    max_rank: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<AcceptedPivot>> {
    if sets.rank(k) >= max_rank {
        return Ok(None);
    }
    let sb = Superblock::at_interface(oracle, sets, k);
    let rows = sb.encode_rows(sets.left(k))?;
    let cols = sb.encode_cols(sets.right(k))?;
    let mut state = CrossState::with_cross(&sb, &rows, &cols)?;
    match state.expand_step(&sb, expand, rng)? {
        ExpandOutcome::Accepted { row, col, .. } => {
            let left = sb.decode_row(row)?;
            let right = sb.decode_col(col)?;
            sets.push_left(k, left.clone())?;
            sets.push_right(k, right.clone())?;
            Ok(Some((left, right)))
        }
        ExpandOutcome::NoPivot { .. } => Ok(None),
    }
}

/// One greedy sweep over the contiguous interface range
/// `first..=last`, visited in ascending or descending order. `rngs` holds
/// one stream per interface in the range, indexed by `k - first`.
/// Returns `(interface, pivot)` for every acceptance, in visit order.
pub(crate) fn greedy_local_sweep(
    oracle: &FunctionOracle,
    sets: &mut NestedIndexSets,
    first: usize,
    last: usize,
    left_to_right: bool,
    expand: &ExpandConfig,
    max_rank: usize,
    rngs: &mut [ChaCha8Rng],
) -> Result<Vec<(usize, AcceptedPivot)>> {
    debug_assert_eq!(rngs.len(), last - first + 1);
    let order: Vec<usize> = if left_to_right {
        (first..=last).collect()
    } else {
        (first..=last).rev().collect()
    };
    let mut accepted = Vec::new();
    for k in order {
        let rng = &mut rngs[k - first];
        if let Some(pivot) = greedy_interface_step(oracle, sets, k, expand, max_rank, rng)? {
            accepted.push((k, pivot));
        }
    }
    Ok(accepted)
}
