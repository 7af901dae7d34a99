//! Ising susceptibility integrand family and the growth-rate estimator.
//!
//! The integrals C_d, D_d, E_d are (d-1)-dimensional integrals over
//! [0,1]^(d-1) of 2 B_d, 2 A_d B_d, and 2 A_d respectively, in the
//! variables x_2..x_d:
//!
//! `A_d = prod_{1 <= i < j <= d} ((1 - x_{i+1}...x_j)/(1 + x_{i+1}...x_j))^2`
//! `B_d = (1 + sum_{k=2}^d x_2...x_k)^-1 (1 + sum_{k=2}^d x_k...x_d)^-1`
//!
//! B_d evaluates in O(d) through forward and backward running sums, A_d
//! in O(d^2) by extending each inner product one factor at a time. Both
//! have log-space forms for dimensions where the values underflow
//! doubles; A_d's direct form switches to log accumulation automatically
//! once the running product drops below the switch threshold.

use crate::error::{CrossError, Result};
use crate::quadrature::{Integrand, QuadratureGrid};
use crate::Scalar;
use serde::Serialize;
use std::f64::consts::{LN_10, LN_2};

/// Euler-Mascheroni constant, for the conjectured limit C_inf = 2e^(-2g).
pub const EULER_GAMMA: Scalar = 0.5772156649015329;

/// Running-product magnitude below which A_d's direct evaluation
/// continues in log space.
const LOG_SWITCH: Scalar = 1e-280;

/// Automatic log-scaled mode threshold on ln(f * weights) at the grid
/// center.
const AUTO_LOG_LN_THRESHOLD: Scalar = -575.6462732485114;

/// Multiplication counter for cost assertions; the no-op implementation
/// compiles away.
pub trait OpCount {
    fn muls(&mut self, n: u64);
}

/// Counting disabled.
pub struct NoCount;

impl OpCount for NoCount {
    #[inline(always)]
    fn muls(&mut self, _: u64) {}
}

/// Counting enabled.
#[derive(Clone, Debug, Default)]
pub struct OpCounter {
    pub muls: u64,
}

impl OpCount for OpCounter {
    #[inline(always)]
    fn muls(&mut self, n: u64) {
        self.muls += n;
    }
}

/// B_d at (x_2..x_d) with multiplication counting. O(d).
pub fn eval_b_counted<C: OpCount>(x: &[Scalar], ops: &mut C) -> Scalar {
    let mut forward = 0.0;
    let mut p = 1.0;
    for &xi in x {
        p *= xi;
        ops.muls(1);
        forward += p;
    }
    let mut backward = 0.0;
    p = 1.0;
    for &xi in x.iter().rev() {
        p *= xi;
        ops.muls(1);
        backward += p;
    }
    ops.muls(2);
    1.0 / ((1.0 + forward) * (1.0 + backward))
}

/// B_d at (x_2..x_d). O(d).
pub fn eval_b(x: &[Scalar]) -> Scalar {
    eval_b_counted(x, &mut NoCount)
}

/// ln B_d, stable for any dimension. O(d).
pub fn ln_eval_b(x: &[Scalar]) -> Scalar {
    let mut forward = 0.0;
    let mut p = 1.0;
    for &xi in x {
        p *= xi;
        forward += p;
    }
    let mut backward = 0.0;
    p = 1.0;
    for &xi in x.iter().rev() {
        p *= xi;
        backward += p;
    }
    -(forward.ln_1p() + backward.ln_1p())
}

/// A_d at (x_2..x_d) with multiplication counting. O(d^2); each inner
/// product x_{i+1}...x_j extends the previous one by one factor. When the
/// accumulated value falls below the switch threshold the remaining
/// factors accumulate in log space, widening the representable range to
/// the full double span.
pub fn eval_a_counted<C: OpCount>(x: &[Scalar], ops: &mut C) -> Scalar {
    let m = x.len();
    let mut acc = 1.0;
    let mut ln_acc = 0.0;
    let mut log_mode = false;
    for a in 0..m {
        let mut p = 1.0;
        for &xb in &x[a..m] {
            p *= xb;
            ops.muls(1);
            let ratio = (1.0 - p) / (1.0 + p);
            ops.muls(1);
            if log_mode {
                ln_acc += 2.0 * ratio.ln();
            } else {
                acc *= ratio * ratio;
                ops.muls(2);
                if acc < LOG_SWITCH {
                    log_mode = true;
                    ln_acc = acc.ln();
                }
            }
        }
    }
    if log_mode {
        ln_acc.exp()
    } else {
        acc
    }
}

/// A_d at (x_2..x_d). O(d^2).
pub fn eval_a(x: &[Scalar]) -> Scalar {
    eval_a_counted(x, &mut NoCount)
}

/// ln A_d, stable for any dimension; -inf where A_d = 0. O(d^2).
pub fn ln_eval_a(x: &[Scalar]) -> Scalar {
    let m = x.len();
    let mut ln_acc = 0.0;
    for a in 0..m {
        let mut p = 1.0;
        for &xb in &x[a..m] {
            p *= xb;
            ln_acc += 2.0 * ((1.0 - p) / (1.0 + p)).ln();
        }
    }
    ln_acc
}

/// Integral family: C_d of 2 B_d, D_d of 2 A_d B_d, E_d of 2 A_d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    C,
    D,
    E,
}

impl std::str::FromStr for Family {
    type Err = CrossError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C" => Ok(Family::C),
            "D" => Ok(Family::D),
            "E" => Ok(Family::E),
            other => Err(CrossError::invalid(format!(
                "unknown integral family {other:?}, expected C, D, or E"
            ))),
        }
    }
}

/// How integrand values are represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EvalMode {
    Direct,
    LogScaled,
}

/// One integral of the family: the label d of C_d/D_d/E_d. The
/// integration dimension is d - 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IsingProblem {
    pub family: Family,
    pub d: usize,
}

impl IsingProblem {
    pub fn new(family: Family, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(CrossError::invalid("integral label d must be at least 2"));
        }
        Ok(IsingProblem { family, d })
    }

    /// Number of integration variables, d - 1.
    pub fn integration_dim(&self) -> usize {
        self.d - 1
    }

    /// Integrand value at (x_2..x_d), including the leading factor 2.
    pub fn integrand_value(&self, x: &[Scalar]) -> Scalar {
        2.0 * match self.family {
            Family::C => eval_b(x),
            Family::D => eval_a(x) * eval_b(x),
            Family::E => eval_a(x),
        }
    }

    /// ln of the integrand at (x_2..x_d); -inf where it vanishes.
    pub fn ln_integrand(&self, x: &[Scalar]) -> Scalar {
        LN_2 + match self.family {
            Family::C => ln_eval_b(x),
            Family::D => ln_eval_a(x) + ln_eval_b(x),
            Family::E => ln_eval_a(x),
        }
    }

    /// Picks direct or log-scaled evaluation for the given grid: log
    /// scale once the weight-folded integrand at the grid center leaves
    /// the comfortably representable range.
    pub fn evaluation_mode(&self, grid: &QuadratureGrid) -> Result<EvalMode> {
        if grid.dim() != self.integration_dim() {
            return Err(CrossError::invalid(format!(
                "grid has {} modes, problem integrates over {}",
                grid.dim(),
                self.integration_dim()
            )));
        }
        let mid = grid.midgrid_index();
        let ln_center = self.ln_integrand(&grid.point(&mid)?) + grid.ln_weight(&mid)?;
        if ln_center < AUTO_LOG_LN_THRESHOLD {
            Ok(EvalMode::LogScaled)
        } else {
            Ok(EvalMode::Direct)
        }
    }

    /// The integrand in the requested representation.
    pub fn to_integrand(&self, mode: EvalMode) -> Integrand {
        let problem = *self;
        match mode {
            EvalMode::Direct => Integrand::plain(move |x| problem.integrand_value(x)),
            EvalMode::LogScaled => Integrand::log_abs(move |x| problem.ln_integrand(x)),
        }
    }

    /// The integrand with the representation chosen for the grid.
    pub fn auto_integrand(&self, grid: &QuadratureGrid) -> Result<(Integrand, EvalMode)> {
        let mode = self.evaluation_mode(grid)?;
        Ok((self.to_integrand(mode), mode))
    }
}

/// A positive scalar with a base-10 exponent offset: the represented
/// value is `value * 10^exponent_offset`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScaledValue {
    pub value: Scalar,
    pub exponent_offset: Scalar,
}

impl ScaledValue {
    pub fn new(value: Scalar, exponent_offset: Scalar) -> Self {
        ScaledValue {
            value,
            exponent_offset,
        }
    }

    pub fn from_plain(value: Scalar) -> Self {
        ScaledValue::new(value, 0.0)
    }

    pub fn is_positive(&self) -> bool {
        self.value > 0.0
    }

    pub fn ln(&self) -> Scalar {
        self.value.ln() + self.exponent_offset * LN_10
    }
}

/// Exponential growth-rate estimate from two integral values under the
/// model `D_d ~ Delta^-d`: `Delta = (D_a / D_b)^(1/(b-a))` for b > a.
pub fn delta_estimate(d_a: ScaledValue, a: usize, d_b: ScaledValue, b: usize) -> Result<Scalar> {
    if b <= a {
        return Err(CrossError::invalid(
            "growth-rate estimate needs two distinct dimensions with b > a",
        ));
    }
    if !d_a.is_positive() || !d_b.is_positive() {
        return Err(CrossError::invalid(
            "growth-rate estimate needs positive integral values",
        ));
    }
    Ok(((d_a.ln() - d_b.ln()) / (b - a) as Scalar).exp())
}
