//! Adaptive tensor-train cross interpolation driver.
//!
//! Starting from a rank-1 cross pinned at the mid-grid index, the driver
//! alternates left-to-right and right-to-left sweeps of the chosen
//! strategy, tracks a scalar functional of the model (a weighted
//! contraction, by default the grid mean), and stops when the functional's
//! relative change stays below the tolerance for two consecutive sweeps.
//! Every oracle access is memoized, so per-sweep evaluation counts stay
//! proportional to the newly explored fibers.

pub(crate) mod engine;
pub(crate) mod superblock;
pub(crate) mod sweeps;

use crate::convergence::{ConvergenceLog, SweepRecord};
use crate::error::{CrossError, Result};
use crate::matcross::ExpandConfig;
use crate::model::TTCrossModel;
use crate::oracle::FunctionOracle;
use crate::sets::NestedIndexSets;
use crate::Scalar;
use engine::{greedy_local_sweep, interface_rng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;
use sweeps::{als_half_sweep, dmrg_half_sweep, MAXVOL_SWAP_TOL};

/// How each sweep updates the cross index sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SweepStrategy {
    /// Fixed-rank maxvol re-selection of one side per half sweep.
    Als,
    /// Rank-adaptive superblock SVD truncated at the given relative
    /// accuracy, both sides replaced per interface.
    Dmrg { eps: Scalar },
    /// Rank-adaptive greedy expansion: at most one new pivot per
    /// interface per sweep, ranks never decrease.
    Greedy,
}

/// Configuration of a cross interpolation run.
#[derive(Clone, Debug, Serialize)]
pub struct CrossConfig {
    pub strategy: SweepStrategy,
    /// Pivot acceptance threshold and convergence tolerance.
    pub rel_tol: Scalar,
    pub max_sweeps: usize,
    /// Hard cap on every TT rank.
    pub max_rank: usize,
    /// Optional cap on oracle evaluations, checked between sweeps.
    pub max_evals: Option<u64>,
    /// Seed of the per-interface random streams.
    pub seed: u64,
    /// Per-mode weights of the tracked functional; grid mean when absent.
    pub weights: Option<Vec<Vec<Scalar>>>,
    /// Entry-count cap for materialized superblocks.
    pub superblock_cap: usize,
}

impl Default for CrossConfig {
    fn default() -> Self {
        CrossConfig {
            strategy: SweepStrategy::Greedy,
            rel_tol: 1e-10,
            max_sweeps: 60,
            max_rank: 64,
            max_evals: None,
            seed: 0,
            weights: None,
            superblock_cap: 10_000_000,
        }
    }
}

/// Outcome summary of a run: per-sweep records plus final flags.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub log: ConvergenceLog,
    /// Whether the stopping rule fired before any budget ran out.
    pub converged: bool,
    /// Total oracle evaluations performed.
    pub n_eval: u64,
    /// TT ranks r_0..r_d after every sweep.
    pub ranks_history: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
    pub wall_s: f64,
}

/// A finished interpolation: the model, the index sets that define it,
/// and the run report.
#[derive(Clone, Debug)]
pub struct CrossResult {
    pub model: TTCrossModel,
    pub sets: NestedIndexSets,
    pub report: SweepReport,
}

/// Relative-change stopping rule: fires after the tracked value changes
/// by less than the tolerance over two consecutive updates.
#[derive(Clone, Debug)]
pub(crate) struct ConvergenceTracker {
    rel_tol: Scalar,
    prev: Option<Scalar>,
    streak: usize,
}

impl ConvergenceTracker {
    pub(crate) fn new(rel_tol: Scalar) -> Self {
        ConvergenceTracker {
            rel_tol,
            prev: None,
            streak: 0,
        }
    }

    /// Feeds the next value; returns its relative change and whether the
    /// stopping rule has fired.
    pub(crate) fn update(&mut self, value: Scalar) -> (Scalar, bool) {
        let rel = match self.prev {
            None => Scalar::INFINITY,
            Some(p) if value == p => 0.0,
            Some(p) => (value - p).abs() / value.abs().max(Scalar::MIN_POSITIVE),
        };
        self.prev = Some(value);
        if rel < self.rel_tol {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        (rel, self.streak >= 2)
    }
}

pub(crate) fn functional(
    model: &TTCrossModel,
    weights: &Option<Vec<Vec<Scalar>>>,
) -> Result<Scalar> {
    match weights {
        Some(w) => model.contract_weights(w),
        None => model.contract_grid_mean(),
    }
}

pub(crate) fn validate_config(oracle: &FunctionOracle, config: &CrossConfig) -> Result<()> {
    if !(config.rel_tol >= 0.0) {
        return Err(CrossError::invalid("rel_tol must be >= 0"));
    }
    if config.max_sweeps == 0 || config.max_rank == 0 {
        return Err(CrossError::invalid("max_sweeps and max_rank must be >= 1"));
    }
    if let Some(w) = &config.weights {
        if w.len() != oracle.dim() {
            return Err(CrossError::invalid(format!(
                "got {} weight vectors for a {}-mode tensor",
                w.len(),
                oracle.dim()
            )));
        }
        for (k, wk) in w.iter().enumerate() {
            if wk.len() != oracle.dims()[k] {
                return Err(CrossError::invalid(format!(
                    "weight vector {k} has length {}, expected {}",
                    wk.len(),
                    oracle.dims()[k]
                )));
            }
        }
    }
    Ok(())
}

/// Runs the adaptive cross interpolation until the tracked functional
/// stabilizes or a budget is exhausted.
pub fn cross_interpolate(oracle: &FunctionOracle, config: &CrossConfig) -> Result<CrossResult> {
    validate_config(oracle, config)?;
    let t0 = Instant::now();
    let dims = oracle.dims().to_vec();
    let d = dims.len();
    let mut warnings: Vec<String> = Vec::new();
    let mut log = ConvergenceLog::new();
    let mut ranks_history = Vec::new();
    let mut sets = NestedIndexSets::rank_one_midgrid(&dims)?;

    if d == 1 {
        let model = TTCrossModel::from_oracle(oracle, &sets)?;
        let estimate = functional(&model, &config.weights)?;
        log.push(SweepRecord {
            sweep: 1,
            max_rank: 1,
            n_eval: oracle.eval_count(),
            estimate,
            exponent_offset: 0.0,
            internal_rel_change: 0.0,
            wall_s: t0.elapsed().as_secs_f64(),
        });
        ranks_history.push(sets.ranks());
        let n_eval = oracle.eval_count();
        return Ok(CrossResult {
            model,
            sets,
            report: SweepReport {
                log,
                converged: true,
                n_eval,
                ranks_history,
                warnings,
                wall_s: t0.elapsed().as_secs_f64(),
            },
        });
    }

    let expand = ExpandConfig {
        rel_tol: config.rel_tol,
        ..ExpandConfig::default()
    };
    let mut rngs: Vec<ChaCha8Rng> = (1..d).map(|k| interface_rng(config.seed, k)).collect();
    let mut tracker = ConvergenceTracker::new(config.rel_tol);
    let mut converged = false;
    let mut last_l2r = true;
    for sweep in 1..=config.max_sweeps {
        let l2r = sweep % 2 == 1;
        last_l2r = l2r;
        match config.strategy {
            SweepStrategy::Greedy => {
                greedy_local_sweep(
                    oracle,
                    &mut sets,
                    1,
                    d - 1,
                    l2r,
                    &expand,
                    config.max_rank,
                    &mut rngs,
                )?;
            }
            SweepStrategy::Als => als_half_sweep(oracle, &mut sets, l2r, MAXVOL_SWAP_TOL)?,
            SweepStrategy::Dmrg { eps } => dmrg_half_sweep(
                oracle,
                &mut sets,
                l2r,
                eps,
                config.max_rank,
                config.superblock_cap,
                MAXVOL_SWAP_TOL,
            )?,
        }
        let model = TTCrossModel::from_oracle(oracle, &sets)?;
        let estimate = functional(&model, &config.weights)?;
        let (rel_change, stop) = tracker.update(estimate);
        log.push(SweepRecord {
            sweep,
            max_rank: sets.max_rank(),
            n_eval: oracle.eval_count(),
            estimate,
            exponent_offset: 0.0,
            internal_rel_change: rel_change,
            wall_s: t0.elapsed().as_secs_f64(),
        });
        ranks_history.push(sets.ranks());
        if stop {
            converged = true;
            break;
        }
        if let Some(cap) = config.max_evals {
            if oracle.eval_count() >= cap {
                warnings.push(format!(
                    "evaluation budget of {cap} exhausted after sweep {sweep}"
                ));
                break;
            }
        }
    }
    if !converged && warnings.is_empty() {
        warnings.push(format!(
            "sweep budget of {} exhausted before convergence",
            config.max_sweeps
        ));
    }
    if converged && sets.ranks().iter().any(|&r| r >= config.max_rank) {
        warnings.push(format!("rank cap of {} was reached", config.max_rank));
    }
    if matches!(config.strategy, SweepStrategy::Dmrg { .. }) {
        // Rank adaptation rebuilds one side's nestedness per direction; a
        // fixed-rank pass the other way restores the second side.
        als_half_sweep(oracle, &mut sets, !last_l2r, MAXVOL_SWAP_TOL)?;
    }
    let model = TTCrossModel::from_oracle(oracle, &sets)?;
    let n_eval = oracle.eval_count();
    Ok(CrossResult {
        model,
        sets,
        report: SweepReport {
            log,
            converged,
            n_eval,
            ranks_history,
            warnings,
            wall_s: t0.elapsed().as_secs_f64(),
        },
    })
}
