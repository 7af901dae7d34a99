//! Contiguous partitioning of tensor interfaces among workers.

use crate::error::{CrossError, Result};

/// Splits the `d - 1` interfaces of a d-mode tensor into at most
/// `workers` contiguous blocks, larger blocks first. Returns inclusive
/// `(first, last)` interface ranges; fewer blocks than requested are
/// returned when there are not enough interfaces to go around.
pub fn partition_interfaces(d: usize, workers: usize) -> Result<Vec<(usize, usize)>> {
    if d < 2 {
        return Err(CrossError::invalid(
            "interface partitioning needs at least two modes",
        ));
    }
    if workers == 0 {
        return Err(CrossError::invalid("need at least one worker"));
    }
    let n = d - 1;
    let p = workers.min(n);
    let base = n / p;
    let rem = n % p;
    let mut out = Vec::with_capacity(p);
    let mut first = 1;
    for block in 0..p {
        let size = if block < rem { base + 1 } else { base };
        out.push((first, first + size - 1));
        first += size;
    }
    Ok(out)
}
