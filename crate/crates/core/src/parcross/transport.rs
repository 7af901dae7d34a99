//! Messages and channel plumbing of the dimension-parallel driver.
//!
//! Adjacent workers exchange boundary pivots once per sweep through
//! dedicated channels, always sending an explicit marker (possibly empty)
//! so receivers never block on a silent neighbor longer than the
//! timeout. Workers report per-sweep chunk products to the orchestrator
//! and receive continue/stop verdicts back.

use crate::error::{CrossError, Result};
use crate::index::MultiIndex;
use crate::sets::NestedIndexSets;
use crate::Scalar;
use nalgebra::DMatrix;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Duration;

/// The set member accepted at the sender's boundary interface this sweep,
/// or an explicit "no pivot" marker.
pub(crate) type BoundaryMsg = Option<MultiIndex>;

/// Channel ends connecting one worker to its chain neighbors.
#[derive(Default)]
pub(crate) struct NeighborLinks {
    pub to_left: Option<Sender<BoundaryMsg>>,
    pub from_left: Option<Receiver<BoundaryMsg>>,
    pub to_right: Option<Sender<BoundaryMsg>>,
    pub from_right: Option<Receiver<BoundaryMsg>>,
}

/// Builds the bidirectional chain topology for `p` workers.
pub(crate) fn neighbor_chain(p: usize) -> Vec<NeighborLinks> {
    let mut links: Vec<NeighborLinks> = (0..p).map(|_| NeighborLinks::default()).collect();
    for i in 0..p.saturating_sub(1) {
        let (tx_r, rx_r) = channel();
        links[i].to_right = Some(tx_r);
        links[i + 1].from_left = Some(rx_r);
        let (tx_l, rx_l) = channel();
        links[i + 1].to_left = Some(tx_l);
        links[i].from_right = Some(rx_l);
    }
    links
}

/// One worker's per-sweep contribution.
pub(crate) struct ChunkReport {
    pub worker: usize,
    /// Chunk product of the worker's weighted cores and inverses.
    pub chunk: DMatrix<Scalar>,
    /// Left and right sets of every owned interface, in interface order.
    pub owned_left: Vec<Vec<MultiIndex>>,
    pub owned_right: Vec<Vec<MultiIndex>>,
    /// Fiber cores of the owned modes (the last worker appends mode d).
    pub cores: Vec<Vec<DMatrix<Scalar>>>,
    /// Intersection matrices of the owned interfaces.
    pub intersections: Vec<DMatrix<Scalar>>,
    /// Boundary messages sent this sweep.
    pub messages_sent: u64,
    pub warnings: Vec<String>,
}

pub(crate) enum WorkerMsg {
    Sweep(Box<ChunkReport>),
    Failed { worker: usize, error: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Verdict {
    Continue,
    Stop,
}

/// Receives with a timeout, mapping both timeout and disconnection onto
/// the exchange error.
pub(crate) fn recv_with_timeout<T>(
    rx: &Receiver<T>,
    timeout: Duration,
    what: &str,
) -> Result<T> {
    rx.recv_timeout(timeout)
        .map_err(|e| CrossError::Exchange(format!("{what}: {e}")))
}

/// Applies a neighbor's boundary pivot to the local mirror of the
/// neighbor-owned set. An invalid pivot (out of range, duplicate) is
/// dropped and reported as a warning instead of poisoning the run.
pub(crate) fn apply_boundary_growth(
    sets: &mut NestedIndexSets,
    interface: usize,
    grows_left_set: bool,
    member: MultiIndex,
) -> Option<String> {
    let outcome = if grows_left_set {
        sets.push_left(interface, member.clone())
    } else {
        sets.push_right(interface, member.clone())
    };
    match outcome {
        Ok(()) => None,
        Err(e) => Some(format!(
            "dropped boundary pivot {member:?} for interface {interface}: {e}"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[usize]) -> MultiIndex {
        MultiIndex::new(e).unwrap()
    }

    #[test]
    fn chain_links_connect_adjacent_workers_only() {
        let links = neighbor_chain(3);
        assert!(links[0].to_left.is_none() && links[0].from_left.is_none());
        assert!(links[2].to_right.is_none() && links[2].from_right.is_none());
        links[0].to_right.as_ref().unwrap().send(Some(mi(&[1]))).unwrap();
        assert_eq!(
            links[1].from_left.as_ref().unwrap().recv().unwrap(),
            Some(mi(&[1]))
        );
        links[1].to_left.as_ref().unwrap().send(None).unwrap();
        assert_eq!(links[0].from_right.as_ref().unwrap().recv().unwrap(), None);
    }

    #[test]
    fn valid_boundary_growth_is_applied() {
        let mut sets = NestedIndexSets::rank_one_midgrid(&[4, 4, 4]).unwrap();
        assert!(apply_boundary_growth(&mut sets, 1, true, mi(&[4])).is_none());
        assert_eq!(sets.left(1).len(), 2);
    }

    #[test]
    fn duplicate_or_invalid_growth_is_dropped_with_a_warning() {
        let mut sets = NestedIndexSets::rank_one_midgrid(&[4, 4, 4]).unwrap();
        let dup = apply_boundary_growth(&mut sets, 1, true, mi(&[2]));
        assert!(dup.is_some_and(|w| w.contains("dropped")));
        let bad = apply_boundary_growth(&mut sets, 1, true, mi(&[7]));
        assert!(bad.is_some());
        let wrong_len = apply_boundary_growth(&mut sets, 2, false, mi(&[1, 1]));
        assert!(wrong_len.is_some());
        assert_eq!(sets.left(1).len(), 1);
    }

    #[test]
    fn timeout_on_a_silent_channel_is_an_exchange_error() {
        let (_tx, rx) = channel::<BoundaryMsg>();
        let err = recv_with_timeout(&rx, Duration::from_millis(10), "boundary").unwrap_err();
        assert!(matches!(err, CrossError::Exchange(_)));
    }
}
