//! The per-worker loop of the dimension-parallel driver.
//!
//! Each worker owns a contiguous block of interfaces. Per sweep it runs
//! the greedy local sweep over its block, exchanges boundary pivots with
//! its chain neighbors, rebuilds its owned cores and intersections from
//! the memoizing oracle, folds them into the chunk product, and ships
//! everything to the orchestrator, then waits for the verdict.

use crate::error::{CrossError, Result};
use crate::lu::PivotedLu;
use crate::matcross::ExpandConfig;
use crate::model::{build_core_slices, build_intersection, weighted_chunk_product};
use crate::oracle::FunctionOracle;
use crate::parcross::transport::{
    apply_boundary_growth, recv_with_timeout, ChunkReport, NeighborLinks, Verdict, WorkerMsg,
};
use crate::sets::NestedIndexSets;
use crate::ttcross::engine::{greedy_local_sweep, interface_rng};
use crate::Scalar;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use std::sync::mpsc::{Receiver, Sender};
use std::time::Duration;

pub(crate) struct WorkerTask {
    pub id: usize,
    /// Owned interfaces, inclusive.
    pub first: usize,
    pub last: usize,
    /// The rightmost worker also carries the final mode's core.
    pub is_last: bool,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_worker(
    task: WorkerTask,
    oracle: FunctionOracle,
    rel_tol: Scalar,
    max_rank: usize,
    seed: u64,
    weights: Vec<Vec<Scalar>>,
    links: NeighborLinks,
    report_tx: Sender<WorkerMsg>,
    verdict_rx: Receiver<Verdict>,
    timeout: Duration,
) {
    let id = task.id;
    if let Err(e) = worker_loop(
        task, oracle, rel_tol, max_rank, seed, weights, links, report_tx.clone(), verdict_rx,
        timeout,
    ) {
        let _ = report_tx.send(WorkerMsg::Failed {
            worker: id,
            error: e.to_string(),
        });
    }
}

#[allow(clippy::too_many_arguments)]
fn worker_loop(
    task: WorkerTask,
    oracle: FunctionOracle,
    rel_tol: Scalar,
    max_rank: usize,
    seed: u64,
    weights: Vec<Vec<Scalar>>,
    links: NeighborLinks,
    report_tx: Sender<WorkerMsg>,
    verdict_rx: Receiver<Verdict>,
    timeout: Duration,
) -> Result<()> {
    let dims = oracle.dims().to_vec();
    let d = dims.len();
    let mut sets = NestedIndexSets::rank_one_midgrid(&dims)?;
    let mut rngs: Vec<ChaCha8Rng> = (task.first..=task.last)
        .map(|k| interface_rng(seed, k))
        .collect();
    let expand = ExpandConfig {
        rel_tol,
        ..ExpandConfig::default()
    };
    for sweep in 1usize.. {
        let left_to_right = sweep % 2 == 1;
        let accepted = greedy_local_sweep(
            &oracle,
            &mut sets,
            task.first,
            task.last,
            left_to_right,
            &expand,
            max_rank,
            &mut rngs,
        )?;

        let mut messages_sent = 0u64;
        let mut warnings = Vec::new();
        if let Some(tx) = &links.to_right {
            let growth = accepted
                .iter()
                .find(|(k, _)| *k == task.last)
                .map(|(_, (left, _))| left.clone());
            tx.send(growth)
                .map_err(|_| CrossError::Exchange("right neighbor hung up".into()))?;
            messages_sent += 1;
        }
        if let Some(tx) = &links.to_left {
            let growth = accepted
                .iter()
                .find(|(k, _)| *k == task.first)
                .map(|(_, (_, right))| right.clone());
            tx.send(growth)
                .map_err(|_| CrossError::Exchange("left neighbor hung up".into()))?;
            messages_sent += 1;
        }
        if let Some(rx) = &links.from_left {
            if let Some(member) = recv_with_timeout(rx, timeout, "boundary pivot from the left")? {
                if let Some(w) = apply_boundary_growth(&mut sets, task.first - 1, true, member) {
                    warnings.push(w);
                }
            }
        }
        if let Some(rx) = &links.from_right {
            if let Some(member) = recv_with_timeout(rx, timeout, "boundary pivot from the right")?
            {
                if let Some(w) = apply_boundary_growth(&mut sets, task.last + 1, false, member) {
                    warnings.push(w);
                }
            }
        }

        let mut cores = Vec::with_capacity(task.last - task.first + 2);
        for mode in task.first..=task.last {
            cores.push(build_core_slices(&oracle, &sets, mode)?);
        }
        let mut intersections = Vec::with_capacity(task.last - task.first + 1);
        let mut lus = Vec::with_capacity(task.last - task.first + 1);
        for k in task.first..=task.last {
            let m = build_intersection(&oracle, &sets, k)?;
            let lu = PivotedLu::factor(&m).map_err(|e| match e {
                CrossError::DegenerateIntersection { .. } => {
                    CrossError::DegenerateIntersection { interface: k }
                }
                other => other,
            })?;
            intersections.push(m);
            lus.push(lu);
        }
        let tail_core = if task.is_last {
            Some(build_core_slices(&oracle, &sets, d)?)
        } else {
            None
        };
        let chunk: DMatrix<Scalar> = {
            let core_refs: Vec<&[DMatrix<Scalar>]> =
                cores.iter().map(|c| c.as_slice()).collect();
            let weight_refs: Vec<&[Scalar]> = (task.first..=task.last)
                .map(|mode| weights[mode - 1].as_slice())
                .collect();
            let lu_refs: Vec<&PivotedLu> = lus.iter().collect();
            let tail = tail_core
                .as_ref()
                .map(|c| (c.as_slice(), weights[d - 1].as_slice()));
            weighted_chunk_product(&core_refs, &weight_refs, &lu_refs, tail)?
        };

        let mut shipped_cores = cores;
        if let Some(t) = tail_core {
            shipped_cores.push(t);
        }
        report_tx
            .send(WorkerMsg::Sweep(Box::new(ChunkReport {
                worker: task.id,
                chunk,
                owned_left: (task.first..=task.last)
                    .map(|k| sets.left(k).to_vec())
                    .collect(),
                owned_right: (task.first..=task.last)
                    .map(|k| sets.right(k).to_vec())
                    .collect(),
                cores: shipped_cores,
                intersections,
                messages_sent,
                warnings,
            })))
            .map_err(|_| CrossError::Exchange("orchestrator hung up".into()))?;

        match recv_with_timeout(&verdict_rx, timeout, "sweep verdict")? {
            Verdict::Continue => (),
            Verdict::Stop => break,
        }
    }
    Ok(())
}
