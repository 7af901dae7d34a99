//! Gauss-Legendre rules on [0,1], the weight-folded tensor oracle, and
//! integral contraction of a cross model.
//!
//! The pipeline approximates an integral over [0,1]^d by a tensor-product
//! quadrature sum, reconstructs the summand tensor with cross
//! interpolation, and contracts the model with the weights as a product
//! of 2d-1 small matrices. Folding the weights into the tensor before
//! interpolation is the default; the raw tensor plus weighted contraction
//! is available through a flag. Integrands whose values underflow the
//! double range are handled in log scale with a base-10 exponent offset
//! carried through the result.

use crate::convergence::ConvergenceLog;
use crate::error::{CrossError, Result};
use crate::index::MultiIndex;
use crate::model::TTCrossModel;
use crate::oracle::FunctionOracle;
use crate::parcross::parallel_cross_interpolate;
use crate::ttcross::{cross_interpolate, CrossConfig, SweepReport, SweepStrategy};
use crate::Scalar;
use serde::Serialize;
use std::f64::consts::{LN_10, PI};
use std::sync::Arc;

const MAX_NODES: usize = 1025;
const NEWTON_ITERS: usize = 20;
const NEWTON_TOL: Scalar = 1e-15;

/// Legendre polynomial P_n and its derivative at x, by the three-term
/// recurrence.
fn legendre(n: usize, x: Scalar) -> (Scalar, Scalar) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as Scalar;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * prev) / kf;
        prev = p;
        p = next;
    }
    let dp = n as Scalar * (x * p - prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre nodes and weights on [0,1]: the degree-(2n-1) exact
/// rule mapped from [-1,1]. Roots are found by Newton iteration from the
/// Chebyshev initial guesses and placed in mirror-symmetric pairs, so
/// `t_i + t_{n+1-i} = 1` holds to rounding.
pub fn gauss_legendre(n: usize) -> Result<(Vec<Scalar>, Vec<Scalar>)> {
    if n == 0 || n > MAX_NODES {
        return Err(CrossError::invalid(format!(
            "node count {n} outside 1..={MAX_NODES}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 1..=n.div_ceil(2) {
        let mut x = (PI * (i as Scalar - 0.25) / (n as Scalar + 0.5)).cos();
        for _ in 0..NEWTON_ITERS {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - i] = 0.5 * (1.0 + x);
        nodes[i - 1] = 0.5 * (1.0 - x);
        weights[n - i] = w;
        weights[i - 1] = w;
    }
    Ok((nodes, weights))
}

/// Tensor-product quadrature grid: per-mode nodes in (0,1) and positive
/// weights summing to 1 per mode.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureGrid {
    nodes: Vec<Vec<Scalar>>,
    weights: Vec<Vec<Scalar>>,
}

impl QuadratureGrid {
    /// Grid with `n` Gauss-Legendre points in each of `d` modes.
    pub fn uniform(d: usize, n: usize) -> Result<Self> {
        QuadratureGrid::from_sizes(&vec![n; d])
    }

    /// Grid with a possibly different node count per mode.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(CrossError::invalid("grid needs at least one mode"));
        }
        let mut nodes = Vec::with_capacity(sizes.len());
        let mut weights = Vec::with_capacity(sizes.len());
        for &n in sizes {
            let (t, w) = gauss_legendre(n)?;
            nodes.push(t);
            weights.push(w);
        }
        Ok(QuadratureGrid { nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(|t| t.len()).collect()
    }

    /// Nodes of 0-based mode k, ascending.
    pub fn nodes(&self, k: usize) -> &[Scalar] {
        &self.nodes[k]
    }

    /// Weights of 0-based mode k.
    pub fn weights(&self, k: usize) -> &[Scalar] {
        &self.weights[k]
    }

    pub fn weight_vectors(&self) -> Vec<Vec<Scalar>> {
        self.weights.clone()
    }

    pub fn unit_weight_vectors(&self) -> Vec<Vec<Scalar>> {
        self.nodes.iter().map(|t| vec![1.0; t.len()]).collect()
    }

    /// Coordinates of one grid multi-index.
    pub fn point(&self, idx: &MultiIndex) -> Result<Vec<Scalar>> {
        idx.validate(&self.sizes())?;
        Ok((0..self.dim())
            .map(|k| self.nodes[k][idx.get(k) - 1])
            .collect())
    }

    /// Log of the product of per-mode weights at one multi-index.
    pub fn ln_weight(&self, idx: &MultiIndex) -> Result<Scalar> {
        idx.validate(&self.sizes())?;
        Ok((0..self.dim())
            .map(|k| self.weights[k][idx.get(k) - 1].ln())
            .sum())
    }

    /// The mid-grid multi-index, matching the cross driver's initial
    /// pivot.
    pub fn midgrid_index(&self) -> MultiIndex {
        MultiIndex::new(&self.sizes().iter().map(|n| n.div_ceil(2)).collect::<Vec<_>>()).unwrap()
    }
}

/// A pointwise integrand on [0,1]^d.
pub type PointFn = Arc<dyn Fn(&[Scalar]) -> Scalar + Send + Sync>;

/// Integrand in direct or log scale. The log form carries ln|f| and is
/// meant for positive integrands whose values underflow the double range.
#[derive(Clone)]
pub enum Integrand {
    Plain(PointFn),
    LogAbs(PointFn),
}

impl Integrand {
    pub fn plain(f: impl Fn(&[Scalar]) -> Scalar + Send + Sync + 'static) -> Self {
        Integrand::Plain(Arc::new(f))
    }

    pub fn log_abs(ln_f: impl Fn(&[Scalar]) -> Scalar + Send + Sync + 'static) -> Self {
        Integrand::LogAbs(Arc::new(ln_f))
    }

    pub fn is_log_scaled(&self) -> bool {
        matches!(self, Integrand::LogAbs(_))
    }
}

/// Oracle for the quadrature tensor on the grid. With folding the entries
/// are `B(i) = w_{i_1} ... w_{i_d} f(t_{i_1},...,t_{i_d})`, otherwise the
/// raw `A(i) = f(t)`. A log-scale integrand is exponentiated after
/// subtracting `exponent_offset` decimal digits, so entries stay
/// representable when the integrand itself is not.
pub fn weighted_oracle(
    f: &Integrand,
    grid: &QuadratureGrid,
    fold: bool,
    exponent_offset: Scalar,
) -> Result<FunctionOracle> {
    let sizes = grid.sizes();
    let nodes = grid.nodes.clone();
    let callback: crate::oracle::OracleFn = match f {
        Integrand::Plain(f) => {
            let f = f.clone();
            let weights = grid.weights.clone();
            Arc::new(move |idx: &MultiIndex| {
                let t: Vec<Scalar> = idx
                    .entries()
                    .enumerate()
                    .map(|(k, i)| nodes[k][i - 1])
                    .collect();
                let mut v = f(&t);
                if fold {
                    for (k, i) in idx.entries().enumerate() {
                        v *= weights[k][i - 1];
                    }
                }
                v
            })
        }
        Integrand::LogAbs(ln_f) => {
            let ln_f = ln_f.clone();
            let ln_weights: Vec<Vec<Scalar>> = grid
                .weights
                .iter()
                .map(|w| w.iter().map(|x| x.ln()).collect())
                .collect();
            Arc::new(move |idx: &MultiIndex| {
                let t: Vec<Scalar> = idx
                    .entries()
                    .enumerate()
                    .map(|(k, i)| nodes[k][i - 1])
                    .collect();
                let mut ln_v = ln_f(&t) - exponent_offset * LN_10;
                if fold {
                    for (k, i) in idx.entries().enumerate() {
                        ln_v += ln_weights[k][i - 1];
                    }
                }
                ln_v.exp()
            })
        }
    };
    FunctionOracle::new(&sizes, callback)
}

/// Contracts a cross model with the grid's weights: the quadrature value
/// of the tensor the model represents. With `folded` the weights are
/// already inside the tensor and unit weights are used. Performs no
/// oracle evaluations.
pub fn tt_integrate(model: &TTCrossModel, grid: &QuadratureGrid, folded: bool) -> Result<Scalar> {
    if model.dims() != grid.sizes().as_slice() {
        return Err(CrossError::invalid(format!(
            "model dims {:?} do not match grid sizes {:?}",
            model.dims(),
            grid.sizes()
        )));
    }
    let weights = if folded {
        grid.unit_weight_vectors()
    } else {
        grid.weight_vectors()
    };
    model.contract_weights(&weights)
}

/// Configuration of one end-to-end integration run.
#[derive(Clone, Debug, Serialize)]
pub struct IntegrateConfig {
    /// Number of integration variables.
    pub dim: usize,
    /// Gauss-Legendre nodes per mode.
    pub n: usize,
    pub strategy: SweepStrategy,
    pub rel_tol: Scalar,
    pub max_rank: usize,
    pub max_sweeps: usize,
    pub max_evals: Option<u64>,
    /// Dimension-parallel workers; 1 runs the sequential driver.
    pub workers: usize,
    pub seed: u64,
    /// Fold quadrature weights into the interpolated tensor.
    pub fold: bool,
}

impl IntegrateConfig {
    pub fn new(dim: usize, n: usize) -> Self {
        let cross = CrossConfig::default();
        IntegrateConfig {
            dim,
            n,
            strategy: cross.strategy,
            rel_tol: cross.rel_tol,
            max_rank: cross.max_rank,
            max_sweeps: cross.max_sweeps,
            max_evals: cross.max_evals,
            workers: 1,
            seed: cross.seed,
            fold: true,
        }
    }
}

/// Result of an end-to-end integration.
#[derive(Clone, Debug, Serialize)]
pub struct IntegralResult {
    /// Integral estimate, scaled by `10^-exponent_offset`.
    pub estimate: Scalar,
    /// Base-10 offset of the estimate; 0 outside log-scaled mode, so the
    /// estimate is then the integral itself.
    pub exponent_offset: Scalar,
    pub n_eval: u64,
    pub converged: bool,
    pub log: ConvergenceLog,
    /// Final TT ranks r_0..r_d.
    pub ranks: Vec<usize>,
    pub warnings: Vec<String>,
    pub wall_s: f64,
}

impl IntegralResult {
    /// The estimate with the offset applied; may overflow or underflow
    /// the double range, which is what the offset exists to avoid.
    pub fn unscaled(&self) -> Scalar {
        self.estimate * (10.0 as Scalar).powf(self.exponent_offset)
    }

    /// Natural log of the (positive) estimate including the offset.
    pub fn ln_abs(&self) -> Scalar {
        self.estimate.abs().ln() + self.exponent_offset * LN_10
    }
}

/// Integrates `f` over [0,1]^dim: builds the grid and the (folded)
/// oracle, runs cross interpolation with the integral estimate as the
/// convergence functional, and contracts the final model.
pub fn integrate(f: &Integrand, config: &IntegrateConfig) -> Result<IntegralResult> {
    let grid = QuadratureGrid::uniform(config.dim, config.n)?;
    let exponent_offset = match f {
        Integrand::Plain(_) => 0.0,
        Integrand::LogAbs(ln_f) => {
            let mid = grid.midgrid_index();
            let t = grid.point(&mid)?;
            let mut ln_center = ln_f(&t);
            if config.fold {
                ln_center += grid.ln_weight(&mid)?;
            }
            if !ln_center.is_finite() {
                return Err(CrossError::invalid(
                    "log-scaled integrand is not finite at the grid center",
                ));
            }
            (ln_center / LN_10).round()
        }
    };
    let oracle = weighted_oracle(f, &grid, config.fold, exponent_offset)?;
    let weights = if config.fold {
        grid.unit_weight_vectors()
    } else {
        grid.weight_vectors()
    };
    let cross = CrossConfig {
        strategy: config.strategy,
        rel_tol: config.rel_tol,
        max_sweeps: config.max_sweeps,
        max_rank: config.max_rank,
        max_evals: config.max_evals,
        seed: config.seed,
        weights: Some(weights.clone()),
        superblock_cap: CrossConfig::default().superblock_cap,
    };
    let (model, report): (TTCrossModel, SweepReport) = if config.workers > 1 {
        let r = parallel_cross_interpolate(&oracle, &cross, config.workers)?;
        (r.model, r.report.sweep_report)
    } else {
        let r = cross_interpolate(&oracle, &cross)?;
        (r.model, r.report)
    };
    let estimate = model.contract_weights(&weights)?;
    let mut log = report.log;
    for record in &mut log.records {
        record.exponent_offset = exponent_offset;
    }
    Ok(IntegralResult {
        estimate,
        exponent_offset,
        n_eval: report.n_eval,
        converged: report.converged,
        log,
        ranks: model.ranks().to_vec(),
        warnings: report.warnings,
        wall_s: report.wall_s,
    })
}
