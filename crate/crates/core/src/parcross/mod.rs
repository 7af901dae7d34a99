//! Dimension-parallel cross interpolation.
//!
//! The tensor's interfaces are split into contiguous blocks, one per
//! worker. Each sweep every worker expands its own interfaces with the
//! greedy engine, trades boundary pivots with its chain neighbors, and
//! ships the weighted product of its cores and interface inverses to the
//! orchestrator, which multiplies the chunks pairwise in worker order
//! into the global estimate and broadcasts whether to continue.
//!
//! Per-interface random streams and a shared deterministic fold make a
//! single-worker run reproduce the sequential driver's arithmetic
//! exactly; multi-worker runs agree up to pivot-order effects.

pub mod partition;
pub(crate) mod transport;
pub(crate) mod worker;

pub use partition::partition_interfaces;

use crate::convergence::{ConvergenceLog, SweepRecord};
use crate::error::{CrossError, Result};
use crate::model::TTCrossModel;
use crate::oracle::FunctionOracle;
use crate::sets::NestedIndexSets;
use crate::ttcross::{
    cross_interpolate, validate_config, ConvergenceTracker, CrossConfig, SweepReport,
    SweepStrategy,
};
use crate::Scalar;
use nalgebra::DMatrix;
use serde::Serialize;
use std::sync::mpsc::channel;
use std::thread;
use std::time::{Duration, Instant};
use transport::{neighbor_chain, recv_with_timeout, ChunkReport, Verdict, WorkerMsg};
use worker::{run_worker, WorkerTask};

/// How long any party waits on a peer before declaring the exchange dead.
const EXCHANGE_TIMEOUT: Duration = Duration::from_secs(120);

/// Run report of a parallel interpolation.
#[derive(Clone, Debug, Serialize)]
pub struct ParallelReport {
    pub sweep_report: SweepReport,
    /// Workers actually used (at most one per interface).
    pub workers: usize,
    /// Total boundary pivot messages exchanged between neighbors.
    pub boundary_messages: u64,
}

/// A finished parallel interpolation: the merged model, the merged index
/// sets, and the run report.
#[derive(Clone, Debug)]
pub struct ParallelCrossResult {
    pub model: TTCrossModel,
    pub sets: NestedIndexSets,
    pub report: ParallelReport,
}

fn merged_ranks(reports: &[&ChunkReport], d: usize) -> Vec<usize> {
    let mut ranks = Vec::with_capacity(d + 1);
    ranks.push(1);
    for report in reports {
        ranks.extend(report.owned_left.iter().map(|s| s.len()));
    }
    ranks.push(1);
    ranks
}

/// Multiplies the per-worker chunk matrices pairwise in worker order
/// until a single 1 x 1 product remains.
fn reduce_chunks(mut mats: Vec<DMatrix<Scalar>>) -> DMatrix<Scalar> {
    while mats.len() > 1 {
        mats = mats
            .chunks(2)
            .map(|pair| {
                if pair.len() == 2 {
                    &pair[0] * &pair[1]
                } else {
                    pair[0].clone()
                }
            })
            .collect();
    }
    mats.into_iter().next().unwrap()
}

/// Runs greedy cross interpolation with the interfaces split among up to
/// `workers` threads. Only the greedy strategy supports the
/// dimension-parallel protocol.
pub fn parallel_cross_interpolate(
    oracle: &FunctionOracle,
    config: &CrossConfig,
    workers: usize,
) -> Result<ParallelCrossResult> {
    if !matches!(config.strategy, SweepStrategy::Greedy) {
        return Err(CrossError::invalid(
            "the dimension-parallel driver supports only the greedy strategy",
        ));
    }
    if workers == 0 {
        return Err(CrossError::invalid("need at least one worker"));
    }
    validate_config(oracle, config)?;
    let dims = oracle.dims().to_vec();
    let d = dims.len();
    if d == 1 {
        let result = cross_interpolate(oracle, config)?;
        return Ok(ParallelCrossResult {
            model: result.model,
            sets: result.sets,
            report: ParallelReport {
                sweep_report: result.report,
                workers: 1,
                boundary_messages: 0,
            },
        });
    }
    let blocks = partition_interfaces(d, workers)?;
    let p = blocks.len();
    let weights: Vec<Vec<Scalar>> = match &config.weights {
        Some(w) => w.clone(),
        None => dims.iter().map(|&n| vec![1.0 / n as Scalar; n]).collect(),
    };
    let t0 = Instant::now();

    let (model, sets, sweep_report, boundary_messages) = thread::scope(|scope| {
        let links = neighbor_chain(p);
        let (report_tx, report_rx) = channel::<WorkerMsg>();
        let mut verdict_txs = Vec::with_capacity(p);
        for (w, (&(first, last), link)) in blocks.iter().zip(links).enumerate() {
            let (verdict_tx, verdict_rx) = channel::<Verdict>();
            verdict_txs.push(verdict_tx);
            let task = WorkerTask {
                id: w,
                first,
                last,
                is_last: w == p - 1,
            };
            let worker_oracle = oracle.clone();
            let worker_weights = weights.clone();
            let report_tx = report_tx.clone();
            let (rel_tol, max_rank, seed) = (config.rel_tol, config.max_rank, config.seed);
            scope.spawn(move || {
                run_worker(
                    task,
                    worker_oracle,
                    rel_tol,
                    max_rank,
                    seed,
                    worker_weights,
                    link,
                    report_tx,
                    verdict_rx,
                    EXCHANGE_TIMEOUT,
                );
            });
        }
        drop(report_tx);

        let mut tracker = ConvergenceTracker::new(config.rel_tol);
        let mut log = ConvergenceLog::new();
        let mut ranks_history: Vec<Vec<usize>> = Vec::new();
        let mut warnings: Vec<String> = Vec::new();
        let mut boundary_messages = 0u64;
        let mut converged = false;
        let mut latest: Vec<Option<ChunkReport>> = (0..p).map(|_| None).collect();

        for sweep in 1..=config.max_sweeps {
            let mut pending = p;
            while pending > 0 {
                match recv_with_timeout(&report_rx, EXCHANGE_TIMEOUT, "worker sweep report")? {
                    WorkerMsg::Sweep(mut report) => {
                        boundary_messages += report.messages_sent;
                        warnings.append(&mut report.warnings);
                        let worker = report.worker;
                        latest[worker] = Some(*report);
                        pending -= 1;
                    }
                    WorkerMsg::Failed { worker, error } => {
                        return Err(CrossError::Exchange(format!(
                            "worker {worker} failed: {error}"
                        )));
                    }
                }
            }
            let reports: Vec<&ChunkReport> = latest.iter().map(|r| r.as_ref().unwrap()).collect();
            let chunks: Vec<DMatrix<Scalar>> = reports.iter().map(|r| r.chunk.clone()).collect();
            let estimate = reduce_chunks(chunks)[(0, 0)];
            let (rel_change, stop) = tracker.update(estimate);
            let ranks = merged_ranks(&reports, d);
            log.push(SweepRecord {
                sweep,
                max_rank: ranks.iter().copied().max().unwrap_or(1),
                n_eval: oracle.eval_count(),
                estimate,
                exponent_offset: 0.0,
                internal_rel_change: rel_change,
                wall_s: t0.elapsed().as_secs_f64(),
            });
            ranks_history.push(ranks);
            let budget_hit = config
                .max_evals
                .is_some_and(|cap| oracle.eval_count() >= cap);
            if budget_hit && !stop {
                warnings.push(format!(
                    "evaluation budget of {} exhausted after sweep {sweep}",
                    config.max_evals.unwrap()
                ));
            }
            let stop_now = stop || budget_hit || sweep == config.max_sweeps;
            let verdict = if stop_now {
                Verdict::Stop
            } else {
                Verdict::Continue
            };
            for tx in &verdict_txs {
                tx.send(verdict)
                    .map_err(|_| CrossError::Exchange("a worker exited early".into()))?;
            }
            if stop_now {
                converged = stop;
                break;
            }
        }
        if !converged && warnings.is_empty() {
            warnings.push(format!(
                "sweep budget of {} exhausted before convergence",
                config.max_sweeps
            ));
        }
        if converged
            && ranks_history
                .last()
                .is_some_and(|ranks| ranks.iter().any(|&r| r >= config.max_rank))
        {
            warnings.push(format!("rank cap of {} was reached", config.max_rank));
        }

        let mut cores: Vec<Vec<DMatrix<Scalar>>> = Vec::with_capacity(d);
        let mut intersections: Vec<DMatrix<Scalar>> = Vec::with_capacity(d - 1);
        let mut left: Vec<Vec<crate::index::MultiIndex>> = Vec::with_capacity(d - 1);
        let mut right: Vec<Vec<crate::index::MultiIndex>> = Vec::with_capacity(d - 1);
        for slot in latest {
            let mut report =
                slot.ok_or_else(|| CrossError::Exchange("a worker never reported".into()))?;
            cores.append(&mut report.cores);
            intersections.append(&mut report.intersections);
            left.append(&mut report.owned_left);
            right.append(&mut report.owned_right);
        }
        let model = TTCrossModel::from_parts(dims.clone(), cores, intersections)?;
        let sets = NestedIndexSets::from_sets(&dims, left, right)?;
        let sweep_report = SweepReport {
            log,
            converged,
            n_eval: oracle.eval_count(),
            ranks_history,
            warnings,
            wall_s: t0.elapsed().as_secs_f64(),
        };
        Ok::<_, CrossError>((model, sets, sweep_report, boundary_messages))
    })?;

    Ok(ParallelCrossResult {
        model,
        sets,
        report: ParallelReport {
            sweep_report,
            workers: p,
            boundary_messages,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::MultiIndex;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn oracle_of(
        dims: &[usize],
        f: impl Fn(&MultiIndex) -> Scalar + Send + Sync + 'static,
    ) -> FunctionOracle {
        FunctionOracle::new(dims, Arc::new(f)).unwrap()
    }

    fn wavy(idx: &MultiIndex) -> Scalar {
        let s: Scalar = idx.entries().map(|i| i as Scalar * 0.31).sum();
        let p: Scalar = idx.entries().map(|i| 1.0 + 0.1 * i as Scalar).product();
        (1.3 * s).sin() + p + 2.0
    }

    #[test]
    fn one_worker_reproduces_the_sequential_driver_exactly() {
        let dims = vec![5usize; 6];
        let config = CrossConfig {
            rel_tol: 1e-10,
            seed: 11,
            ..CrossConfig::default()
        };
        let sequential = cross_interpolate(&oracle_of(&dims, wavy), &config).unwrap();
        let parallel =
            parallel_cross_interpolate(&oracle_of(&dims, wavy), &config, 1).unwrap();
        assert_eq!(parallel.report.workers, 1);
        assert_eq!(parallel.report.boundary_messages, 0);
        assert_eq!(
            parallel.report.sweep_report.converged,
            sequential.report.converged
        );
        assert_eq!(
            parallel.report.sweep_report.ranks_history,
            sequential.report.ranks_history
        );
        let seq_estimates: Vec<Scalar> = sequential
            .report
            .log
            .records
            .iter()
            .map(|r| r.estimate)
            .collect();
        let par_estimates: Vec<Scalar> = parallel
            .report
            .sweep_report
            .log
            .records
            .iter()
            .map(|r| r.estimate)
            .collect();
        assert_eq!(seq_estimates, par_estimates, "per-sweep estimates must match bitwise");
        for probe in [
            MultiIndex::new(&[1, 2, 3, 4, 5, 1]).unwrap(),
            MultiIndex::new(&[5, 5, 5, 5, 5, 5]).unwrap(),
            MultiIndex::new(&[2, 4, 1, 3, 2, 4]).unwrap(),
        ] {
            assert_eq!(
                parallel.model.tt_eval(&probe).unwrap().to_bits(),
                sequential.model.tt_eval(&probe).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn worker_counts_agree_on_the_converged_estimate() {
        let dims = vec![4usize; 7];
        let config = CrossConfig {
            rel_tol: 1e-11,
            seed: 3,
            ..CrossConfig::default()
        };
        let mut estimates = Vec::new();
        for workers in [1usize, 2, 4] {
            let result =
                parallel_cross_interpolate(&oracle_of(&dims, wavy), &config, workers).unwrap();
            assert!(result.report.sweep_report.converged);
            result.sets.check_nestedness().unwrap();
            estimates.push(result.report.sweep_report.log.last().unwrap().estimate);
        }
        for e in &estimates[1..] {
            assert_relative_eq!(*e, estimates[0], max_relative = 1e-10);
        }
    }

    #[test]
    fn boundary_messages_count_two_per_interior_edge_per_sweep() {
        let dims = vec![4usize; 7];
        let config = CrossConfig {
            rel_tol: 1e-11,
            seed: 3,
            ..CrossConfig::default()
        };
        let result = parallel_cross_interpolate(&oracle_of(&dims, wavy), &config, 3).unwrap();
        assert_eq!(result.report.workers, 3);
        let sweeps = result.report.sweep_report.log.records.len() as u64;
        assert_eq!(result.report.boundary_messages, 2 * (3 - 1) * sweeps);
    }

    #[test]
    fn non_greedy_strategies_are_rejected() {
        let dims = vec![4usize; 3];
        let config = CrossConfig {
            strategy: SweepStrategy::Als,
            ..CrossConfig::default()
        };
        let err = parallel_cross_interpolate(&oracle_of(&dims, wavy), &config, 2).unwrap_err();
        assert!(matches!(err, CrossError::InvalidInput(_)));
    }

    #[test]
    fn single_mode_tensor_delegates_to_the_sequential_path() {
        let dims = vec![7usize];
        let result = parallel_cross_interpolate(
            &oracle_of(&dims, |idx| idx.get(0) as Scalar),
            &CrossConfig::default(),
            4,
        )
        .unwrap();
        assert_eq!(result.report.workers, 1);
        assert_eq!(result.report.boundary_messages, 0);
        assert_relative_eq!(
            result.report.sweep_report.log.last().unwrap().estimate,
            4.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn surplus_workers_collapse_to_one_block_per_interface() {
        let dims = vec![4usize; 3];
        let result = parallel_cross_interpolate(
            &oracle_of(&dims, wavy),
            &CrossConfig {
                rel_tol: 1e-11,
                ..CrossConfig::default()
            },
            16,
        )
        .unwrap();
        assert_eq!(result.report.workers, 2);
    }
}
