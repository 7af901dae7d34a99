//! Matrix-level cross interpolation: skeleton approximation, dominant-row
//! selection (maxvol), and greedy rank-one expansion with rook pivoting.
//!
//! The skeleton approximation of a matrix `A` from row set `I` and column
//! set `J` is `A(:, J) [A(I, J)]^{-1} A(I, :)`. It reproduces `A` exactly on
//! the chosen rows and columns, and its quality is governed by the volume
//! (absolute determinant) of the intersection `A(I, J)`. All indices at
//! this level are 0-based.

use crate::error::{CrossError, Result};
use crate::lu::{PivotedLu, DEGENERACY_RTOL};
use crate::Scalar;
use nalgebra::DMatrix;
use rand::RngExt;
use std::collections::HashSet;

/// Safety factor between the acceptance-time conditioning check and the
/// degeneracy floor used when an intersection is refactored from scratch.
/// A pivot is admitted only when a fresh factorization of the grown
/// intersection keeps this margin above that floor, so every later
/// rebuild of the same cross is guaranteed to factor.
const REFACTOR_MARGIN: Scalar = 10.0;

/// Read access to a (possibly implicitly defined) matrix whose entries are
/// expensive to evaluate. Implementations are expected to memoize.
pub trait MatrixAccess {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> Result<Scalar>;

    /// Batched entry access; the default evaluates sequentially.
    fn entries_batch(&self, pairs: &[(usize, usize)]) -> Result<Vec<Scalar>> {
        pairs.iter().map(|&(i, j)| self.entry(i, j)).collect()
    }
}

impl MatrixAccess for DMatrix<Scalar> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn entry(&self, i: usize, j: usize) -> Result<Scalar> {
        if i >= self.nrows() || j >= self.ncols() {
            return Err(CrossError::invalid(format!(
                "entry ({i}, {j}) out of bounds for {}x{} matrix",
                self.nrows(),
                self.ncols()
            )));
        }
        Ok(self[(i, j)])
    }
}

/// Tuning knobs for one greedy expansion step.
#[derive(Clone, Debug)]
pub struct ExpandConfig {
    /// Absolute part of the acceptance threshold.
    pub abs_tol: Scalar,
    /// Relative part; compared against the running maximum absolute
    /// sampled value.
    pub rel_tol: Scalar,
    /// Number of random residual probes; defaults to `m + n` when `None`.
    pub probe_count: Option<usize>,
    /// Maximum number of alternating full row/column argmax scans.
    pub rook_budget: usize,
    /// Retries after a degenerate pivot before giving up on the step.
    pub max_retries: usize,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        ExpandConfig {
            abs_tol: 0.0,
            rel_tol: 1e-10,
            probe_count: None,
            rook_budget: 4,
            max_retries: 3,
        }
    }
}

/// Result of one greedy expansion step.
#[derive(Clone, Debug, PartialEq)]
pub enum ExpandOutcome {
    /// A pivot was accepted and the cross grew by one.
    Accepted {
        row: usize,
        col: usize,
        residual: Scalar,
    },
    /// No residual above the acceptance threshold was found.
    NoPivot { best_residual: Scalar },
}

/// Incrementally grown cross of a matrix: pivot-ordered row and column
/// sets, the sampled row and column fibers, and a bordered factorization
/// of the intersection.
#[derive(Clone, Debug)]
pub struct CrossState {
    rows: Vec<usize>,
    cols: Vec<usize>,
    /// `A(:, J)`, one column per accepted pivot, m x r.
    col_fibers: DMatrix<Scalar>,
    /// `A(I, :)`, one row per accepted pivot, r x n.
    row_fibers: DMatrix<Scalar>,
    lu: PivotedLu,
    banned: HashSet<(usize, usize)>,
    log2_volume: Scalar,
    max_abs_sample: Scalar,
}

impl CrossState {
    /// Empty cross over an m x n matrix.
    pub fn new(m: usize, n: usize) -> Self {
        CrossState {
            rows: Vec::new(),
            cols: Vec::new(),
            col_fibers: DMatrix::zeros(m, 0),
            row_fibers: DMatrix::zeros(0, n),
            lu: PivotedLu::empty(),
            banned: HashSet::new(),
            log2_volume: 0.0,
            max_abs_sample: 0.0,
        }
    }

    /// Builds the cross for explicitly given pivot-ordered row and column
    /// sets, sampling the fibers and factoring the intersection.
    pub fn with_cross(a: &dyn MatrixAccess, rows: &[usize], cols: &[usize]) -> Result<Self> {
        if rows.len() != cols.len() {
            return Err(CrossError::invalid(
                "cross needs equally many rows and columns",
            ));
        }
        let (m, n) = (a.nrows(), a.ncols());
        let r = rows.len();
        let mut state = CrossState::new(m, n);
        if r == 0 {
            return Ok(state);
        }
        let mut col_fibers = DMatrix::zeros(m, r);
        for (p, &j) in cols.iter().enumerate() {
            for i in 0..m {
                col_fibers[(i, p)] = a.entry(i, j)?;
            }
        }
        let mut row_fibers = DMatrix::zeros(r, n);
        for (p, &i) in rows.iter().enumerate() {
            for j in 0..n {
                row_fibers[(p, j)] = a.entry(i, j)?;
            }
        }
        let mut intersection = DMatrix::zeros(r, r);
        for (p, &i) in rows.iter().enumerate() {
            for (q, &_j) in cols.iter().enumerate() {
                intersection[(p, q)] = col_fibers[(i, q)];
            }
        }
        state.max_abs_sample = col_fibers
            .iter()
            .chain(row_fibers.iter())
            .fold(0.0 as Scalar, |acc, &v| acc.max(v.abs()));
        state.lu = PivotedLu::factor(&intersection)?;
        state.log2_volume = state.lu.log2_abs_det();
        state.rows = rows.to_vec();
        state.cols = cols.to_vec();
        state.col_fibers = col_fibers;
        state.row_fibers = row_fibers;
        Ok(state)
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Pivot-ordered row indices.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Pivot-ordered column indices.
    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// `A(:, J)` in pivot column order (m x r).
    pub fn col_fibers(&self) -> &DMatrix<Scalar> {
        &self.col_fibers
    }

    /// `A(I, :)` in pivot row order (r x n).
    pub fn row_fibers(&self) -> &DMatrix<Scalar> {
        &self.row_fibers
    }

    pub fn lu(&self) -> &PivotedLu {
        &self.lu
    }

    /// log2 of the tracked intersection volume |det A(I, J)|.
    pub fn log2_volume(&self) -> Scalar {
        self.log2_volume
    }

    /// Largest |A(i, j)| seen across all sampled entries.
    pub fn max_abs_sample(&self) -> Scalar {
        self.max_abs_sample
    }

    pub fn banned(&self) -> &HashSet<(usize, usize)> {
        &self.banned
    }

    fn note_sample(&mut self, v: Scalar) {
        let a = v.abs();
        if a > self.max_abs_sample {
            self.max_abs_sample = a;
        }
    }

    /// Skeleton value at (i, j) from the cached fibers; no fresh entry
    /// evaluations. Zero for an empty cross.
    pub fn skeleton_from_fibers(&self, i: usize, j: usize) -> Result<Scalar> {
        if self.rank() == 0 {
            return Ok(0.0);
        }
        let col = self.row_fibers.column(j).into_owned();
        let v = self.lu.solve(&DMatrix::from_column_slice(self.rank(), 1, col.as_slice()))?;
        let mut acc = 0.0;
        for p in 0..self.rank() {
            acc += self.col_fibers[(i, p)] * v[(p, 0)];
        }
        Ok(acc)
    }

    /// Skeleton approximation `A(i, J) [A(I, J)]^{-1} A(I, j)`.
    pub fn skeleton_eval(&self, a: &dyn MatrixAccess, i: usize, j: usize) -> Result<Scalar> {
        let _ = a;
        self.skeleton_from_fibers(i, j)
    }

    /// Residual `A(i, j)` minus the skeleton value. One fresh entry
    /// evaluation.
    pub fn residual(&mut self, a: &dyn MatrixAccess, i: usize, j: usize) -> Result<Scalar> {
        let v = a.entry(i, j)?;
        self.note_sample(v);
        Ok(v - self.skeleton_from_fibers(i, j)?)
    }

    /// Residuals of the full column j, with entries on cross rows pinned
    /// to exactly zero.
    fn residual_column(&mut self, a: &dyn MatrixAccess, j: usize) -> Result<Vec<Scalar>> {
        let m = a.nrows();
        let r = self.rank();
        let mut vals = Vec::with_capacity(m);
        for i in 0..m {
            let v = a.entry(i, j)?;
            self.note_sample(v);
            vals.push(v);
        }
        if r == 0 {
            return Ok(vals);
        }
        let col = self.row_fibers.column(j).into_owned();
        let w = self.lu.solve(&DMatrix::from_column_slice(r, 1, col.as_slice()))?;
        let skel = &self.col_fibers * &w;
        let mut out: Vec<Scalar> = (0..m).map(|i| vals[i] - skel[(i, 0)]).collect();
        for &i in &self.rows {
            out[i] = 0.0;
        }
        Ok(out)
    }

    /// Residuals of the full row i, with entries on cross columns pinned
    /// to exactly zero.
    fn residual_row(&mut self, a: &dyn MatrixAccess, i: usize) -> Result<Vec<Scalar>> {
        let n = a.ncols();
        let r = self.rank();
        let mut vals = Vec::with_capacity(n);
        for j in 0..n {
            let v = a.entry(i, j)?;
            self.note_sample(v);
            vals.push(v);
        }
        if r == 0 {
            return Ok(vals);
        }
        let row = self.col_fibers.row(i).transpose();
        let w = self
            .lu
            .solve_transposed(&DMatrix::from_column_slice(r, 1, row.as_slice()))?;
        let skel = w.transpose() * &self.row_fibers;
        let mut out: Vec<Scalar> = (0..n).map(|j| vals[j] - skel[(0, j)]).collect();
        for &j in &self.cols {
            out[j] = 0.0;
        }
        Ok(out)
    }

    /// Accepts pivot (i, j): samples its full row and column, borders the
    /// factorization, and grows the fibers. Fails without side effects on
    /// a numerically degenerate pivot.
    fn accept_pivot(&mut self, a: &dyn MatrixAccess, i: usize, j: usize) -> Result<Scalar> {
        let r = self.rank();
        let col_at_rows: Vec<Scalar> = (0..r).map(|p| self.row_fibers[(p, j)]).collect();
        let row_at_cols: Vec<Scalar> = (0..r).map(|p| self.col_fibers[(i, p)]).collect();
        let corner = a.entry(i, j)?;
        self.note_sample(corner);
        let mut lu = self.lu.clone();
        let schur = lu.extend(&col_at_rows, &row_at_cols, corner)?;
        let mut grown = DMatrix::zeros(r + 1, r + 1);
        for p in 0..r {
            let ip = self.rows[p];
            for q in 0..r {
                grown[(p, q)] = self.col_fibers[(ip, q)];
            }
            grown[(p, r)] = col_at_rows[p];
            grown[(r, p)] = row_at_cols[p];
        }
        grown[(r, r)] = corner;
        PivotedLu::factor_with_rtol(&grown, REFACTOR_MARGIN * DEGENERACY_RTOL)?;
        let m = a.nrows();
        let n = a.ncols();
        let mut new_col = Vec::with_capacity(m);
        for ii in 0..m {
            let v = a.entry(ii, j)?;
            self.note_sample(v);
            new_col.push(v);
        }
        let mut new_row = Vec::with_capacity(n);
        for jj in 0..n {
            let v = a.entry(i, jj)?;
            self.note_sample(v);
            new_row.push(v);
        }
        self.lu = lu;
        self.log2_volume += schur.abs().log2();
        self.rows.push(i);
        self.cols.push(j);
        let mut cf = DMatrix::zeros(m, r + 1);
        cf.view_mut((0, 0), (m, r)).copy_from(&self.col_fibers);
        for ii in 0..m {
            cf[(ii, r)] = new_col[ii];
        }
        self.col_fibers = cf;
        let mut rf = DMatrix::zeros(r + 1, n);
        rf.view_mut((0, 0), (r, n)).copy_from(&self.row_fibers);
        for jj in 0..n {
            rf[(r, jj)] = new_row[jj];
        }
        self.row_fibers = rf;
        Ok(schur)
    }

    /// One greedy expansion step: random residual probes, rook refinement
    /// by alternating full column and row argmax scans, threshold check,
    /// and pivot acceptance. Degenerate pivots are banned and the step is
    /// retried with fresh probes.
    pub fn expand_step(
        &mut self,
        a: &dyn MatrixAccess,
        cfg: &ExpandConfig,
        rng: &mut dyn rand::Rng,
    ) -> Result<ExpandOutcome> {
        let mut best_seen: Scalar = 0.0;
        for _attempt in 0..=cfg.max_retries {
            let candidate = self.find_pivot(a, cfg, rng)?;
            let (i, j, res) = match candidate {
                Some(c) => c,
                None => return Ok(ExpandOutcome::NoPivot {
                    best_residual: best_seen,
                }),
            };
            best_seen = best_seen.max(res.abs());
            let threshold = cfg.abs_tol + cfg.rel_tol * self.max_abs_sample;
            if res.abs() <= threshold {
                return Ok(ExpandOutcome::NoPivot {
                    best_residual: res.abs(),
                });
            }
            match self.accept_pivot(a, i, j) {
                Ok(_) => {
                    return Ok(ExpandOutcome::Accepted {
                        row: i,
                        col: j,
                        residual: res,
                    })
                }
                Err(CrossError::DegenerateIntersection { .. }) => {
                    self.banned.insert((i, j));
                    continue;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(ExpandOutcome::NoPivot {
            best_residual: best_seen,
        })
    }

    /// Probes random residuals and refines the best one with rook scans.
    /// Returns the chosen position and its residual, or `None` when every
    /// admissible position is exhausted.
    fn find_pivot(
        &mut self,
        a: &dyn MatrixAccess,
        cfg: &ExpandConfig,
        rng: &mut dyn rand::Rng,
    ) -> Result<Option<(usize, usize, Scalar)>> {
        let (m, n) = (a.nrows(), a.ncols());
        let row_set: HashSet<usize> = self.rows.iter().copied().collect();
        let col_set: HashSet<usize> = self.cols.iter().copied().collect();
        let free_rows: Vec<usize> = (0..m).filter(|i| !row_set.contains(i)).collect();
        let free_cols: Vec<usize> = (0..n).filter(|j| !col_set.contains(j)).collect();
        if free_rows.is_empty() || free_cols.is_empty() {
            return Ok(None);
        }
        let probes = cfg.probe_count.unwrap_or(m + n);
        let mut best: Option<(Scalar, usize, usize)> = None;
        for _ in 0..probes {
            let i = free_rows[rng.random_range(0..free_rows.len())];
            let j = free_cols[rng.random_range(0..free_cols.len())];
            if self.banned.contains(&(i, j)) {
                continue;
            }
            let res = self.residual(a, i, j)?;
            if better(res, i, j, &best) {
                best = Some((res, i, j));
            }
        }
        let (mut res, mut bi, mut bj) = match best {
            Some(b) => b,
            None => return Ok(None),
        };
        let mut scan_col = true;
        for _ in 0..cfg.rook_budget {
            let mut improved = false;
            if scan_col {
                let col = self.residual_column(a, bj)?;
                let mut line_best: Option<(Scalar, usize, usize)> = Some((res, bi, bj));
                for &i in &free_rows {
                    if self.banned.contains(&(i, bj)) {
                        continue;
                    }
                    if better(col[i], i, bj, &line_best) {
                        line_best = Some((col[i], i, bj));
                        improved = true;
                    }
                }
                if let Some((r2, i2, _)) = line_best {
                    res = r2;
                    bi = i2;
                }
            } else {
                let row = self.residual_row(a, bi)?;
                let mut line_best: Option<(Scalar, usize, usize)> = Some((res, bi, bj));
                for &j in &free_cols {
                    if self.banned.contains(&(bi, j)) {
                        continue;
                    }
                    if better(row[j], bi, j, &line_best) {
                        line_best = Some((row[j], bi, j));
                        improved = true;
                    }
                }
                if let Some((r2, _, j2)) = line_best {
                    res = r2;
                    bj = j2;
                }
            }
            scan_col = !scan_col;
            if !improved {
                break;
            }
        }
        Ok(Some((bi, bj, res)))
    }
}

/// Pivot ordering: larger |residual| wins; ties prefer the smaller row,
/// then the smaller column.
fn better(res: Scalar, i: usize, j: usize, current: &Option<(Scalar, usize, usize)>) -> bool {
    match current {
        None => true,
        Some((cr, ci, cj)) => {
            let (a, c) = (res.abs(), cr.abs());
            a > c || (a == c && (i, j) < (*ci, *cj))
        }
    }
}

/// Outcome of dominant-row refinement.
#[derive(Clone, Debug)]
pub struct MaxvolResult {
    /// Selected row indices, in intersection order.
    pub rows: Vec<usize>,
    /// log2 of the total volume gain over the initial selection.
    pub log2_ratio: Scalar,
    /// Number of row swaps performed.
    pub swaps: usize,
}

/// Initial dominant-row guess for a tall m x r matrix: the rows chosen as
/// pivots by Gaussian elimination with partial pivoting.
pub fn dominant_rows_lu(b: &DMatrix<Scalar>) -> Result<Vec<usize>> {
    let (m, r) = (b.nrows(), b.ncols());
    if m < r {
        return Err(CrossError::invalid(format!(
            "need at least as many rows as columns, got {m}x{r}"
        )));
    }
    let mut work = b.clone();
    let mut order: Vec<usize> = (0..m).collect();
    let scale = b.iter().fold(0.0 as Scalar, |acc, &v| acc.max(v.abs()));
    for k in 0..r {
        let mut best = k;
        let mut best_abs = work[(k, k)].abs();
        for i in k + 1..m {
            let v = work[(i, k)].abs();
            if v > best_abs {
                best = i;
                best_abs = v;
            }
        }
        if !best_abs.is_finite() || best_abs <= 1e-13 * scale {
            return Err(CrossError::DegenerateIntersection { interface: 0 });
        }
        if best != k {
            work.swap_rows(k, best);
            order.swap(k, best);
        }
        let piv = work[(k, k)];
        for i in k + 1..m {
            let l = work[(i, k)] / piv;
            work[(i, k)] = l;
            for j in k + 1..r {
                work[(i, j)] -= l * work[(k, j)];
            }
        }
    }
    Ok(order[..r].to_vec())
}

/// Refines a row selection by maxvol swaps: while some entry of
/// `B [B(I, :)]^{-1}` exceeds `1 + swap_tol` in magnitude, the offending
/// row replaces the corresponding selected row, multiplying the
/// intersection volume by that magnitude.
pub fn maxvol_refine(
    b: &DMatrix<Scalar>,
    init: &[usize],
    swap_tol: Scalar,
    max_iters: usize,
) -> Result<MaxvolResult> {
    let (m, r) = (b.nrows(), b.ncols());
    if init.len() != r {
        return Err(CrossError::invalid(format!(
            "initial selection has {} rows, need {r}",
            init.len()
        )));
    }
    let mut rows = init.to_vec();
    let mut log2_ratio = 0.0;
    let mut swaps = 0;
    for _ in 0..max_iters {
        let mut inter = DMatrix::zeros(r, r);
        for (p, &i) in rows.iter().enumerate() {
            for q in 0..r {
                inter[(p, q)] = b[(i, q)];
            }
        }
        let lu = PivotedLu::factor(&inter)?;
        // C = B inter^{-1}, computed as (inter^{-T} B^T)^T.
        let c_t = lu.solve_transposed(&b.transpose())?;
        let mut c = c_t.transpose();
        for (p, &i) in rows.iter().enumerate() {
            for q in 0..r {
                c[(i, q)] = if p == q { 1.0 } else { 0.0 };
            }
        }
        let mut best: Option<(Scalar, usize, usize)> = None;
        for i in 0..m {
            for p in 0..r {
                let v = c[(i, p)].abs();
                let is_better = match best {
                    None => true,
                    Some((bv, bi, bp)) => v > bv || (v == bv && (i, p) < (bi, bp)),
                };
                if is_better {
                    best = Some((v, i, p));
                }
            }
        }
        let (gain, i_star, p_star) = best.unwrap();
        if gain <= 1.0 + swap_tol {
            return Ok(MaxvolResult {
                rows,
                log2_ratio,
                swaps,
            });
        }
        rows[p_star] = i_star;
        log2_ratio += gain.log2();
        swaps += 1;
    }
    Ok(MaxvolResult {
        rows,
        log2_ratio,
        swaps,
    })
}

/// Dominant rows of a tall matrix: LU-based initial guess refined by
/// maxvol swaps with the default `swap_tol = 0.01`.
pub fn maxvol_rows(b: &DMatrix<Scalar>, swap_tol: Scalar) -> Result<Vec<usize>> {
    let init = dominant_rows_lu(b)?;
    Ok(maxvol_refine(b, &init, swap_tol, 200)?.rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn two_by_two() -> DMatrix<Scalar> {
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])
    }

    #[test]
    fn skeleton_value_and_residual_on_pinned_example() {
        let a = two_by_two();
        let mut state = CrossState::with_cross(&a, &[1], &[0]).unwrap();
        assert_relative_eq!(
            state.skeleton_eval(&a, 0, 1).unwrap(),
            4.0 / 3.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(state.residual(&a, 0, 1).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn skeleton_exact_on_cross_rows_and_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(8, 7, |_, _| rng.random_range(-1.0..1.0));
        let state = CrossState::with_cross(&a, &[2, 5, 0], &[1, 4, 6]).unwrap();
        for &i in state.rows() {
            for j in 0..7 {
                let s = state.skeleton_eval(&a, i, j).unwrap();
                assert!(
                    (s - a[(i, j)]).abs() <= 1e-14 * a[(i, j)].abs().max(1.0),
                    "row {i} col {j}: {s} vs {}",
                    a[(i, j)]
                );
            }
        }
        for &j in state.cols() {
            for i in 0..8 {
                let s = state.skeleton_eval(&a, i, j).unwrap();
                assert!((s - a[(i, j)]).abs() <= 1e-14 * a[(i, j)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn expansion_picks_the_only_informative_pivot() {
        let a = two_by_two();
        let mut state = CrossState::with_cross(&a, &[1], &[0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let out = state
            .expand_step(&a, &ExpandConfig::default(), &mut rng)
            .unwrap();
        match out {
            ExpandOutcome::Accepted { row, col, residual } => {
                assert_eq!((row, col), (0, 1));
                assert_relative_eq!(residual, 2.0 / 3.0, epsilon = 1e-15);
            }
            other => panic!("expected acceptance, got {other:?}"),
        }
        assert_eq!(state.rank(), 2);
        let again = state
            .expand_step(&a, &ExpandConfig::default(), &mut rng)
            .unwrap();
        assert!(matches!(again, ExpandOutcome::NoPivot { .. }));
    }

    #[test]
    fn expansion_recovers_a_low_rank_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let left = DMatrix::from_fn(12, 3, |_, _| rng.random_range(-1.0..1.0));
        let right = DMatrix::from_fn(3, 10, |_, _| rng.random_range(-1.0..1.0));
        let a = &left * &right;
        let mut state = CrossState::new(12, 10);
        let cfg = ExpandConfig::default();
        let mut accepted = 0;
        for _ in 0..8 {
            match state.expand_step(&a, &cfg, &mut rng).unwrap() {
                ExpandOutcome::Accepted { .. } => accepted += 1,
                ExpandOutcome::NoPivot { .. } => break,
            }
        }
        assert_eq!(accepted, 3);
        for i in 0..12 {
            for j in 0..10 {
                let s = state.skeleton_from_fibers(i, j).unwrap();
                assert!((s - a[(i, j)]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn accepted_crosses_always_refactor_from_scratch() {
        // Numerical rank 3 plus noise near the degeneracy floor: a zero
        // acceptance threshold tempts the expansion past the numerical
        // rank, and every accepted cross must still admit a fresh
        // factorization of its intersection.
        let cfg = ExpandConfig {
            abs_tol: 0.0,
            rel_tol: 0.0,
            ..ExpandConfig::default()
        };
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let left = DMatrix::from_fn(14, 3, |_, _| rng.random_range(-1.0..1.0));
            let right = DMatrix::from_fn(3, 11, |_, _| rng.random_range(-1.0..1.0));
            let noise = DMatrix::from_fn(14, 11, |_, _| rng.random_range(-1e-13..1e-13));
            let a = &left * &right + noise;
            let mut state = CrossState::new(14, 11);
            for _ in 0..10 {
                let outcome = state.expand_step(&a, &cfg, &mut rng).unwrap();
                if state.rank() > 0 {
                    CrossState::with_cross(&a, state.rows(), state.cols()).unwrap();
                }
                if matches!(outcome, ExpandOutcome::NoPivot { .. }) {
                    break;
                }
            }
            assert!(state.rank() >= 3, "seed {seed}: rank {}", state.rank());
        }
    }

    #[test]
    fn maxvol_swaps_to_the_larger_row() {
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let out = maxvol_refine(&b, &[0], 1e-2, 50).unwrap();
        assert_eq!(out.rows, vec![1]);
        assert_eq!(out.swaps, 1);
        assert_relative_eq!(out.log2_ratio, (3.0 as Scalar).log2(), epsilon = 1e-15);
    }

    #[test]
    fn maxvol_keeps_a_dominant_selection() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        let out = maxvol_refine(&b, &[0, 1], 1e-2, 50).unwrap();
        assert_eq!(out.rows, vec![0, 1]);
        assert_eq!(out.swaps, 0);
        assert_relative_eq!(out.log2_ratio, 0.0);
    }

    #[test]
    fn tracked_volume_matches_final_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let init = dominant_rows_lu(&b).unwrap();
        let mut inter0 = DMatrix::zeros(3, 3);
        for (p, &i) in init.iter().enumerate() {
            for q in 0..3 {
                inter0[(p, q)] = b[(i, q)];
            }
        }
        let out = maxvol_refine(&b, &init, 1e-2, 200).unwrap();
        let mut inter1 = DMatrix::zeros(3, 3);
        for (p, &i) in out.rows.iter().enumerate() {
            for q in 0..3 {
                inter1[(p, q)] = b[(i, q)];
            }
        }
        let tracked = inter0.determinant().abs() * (2.0 as Scalar).powf(out.log2_ratio);
        assert_relative_eq!(tracked, inter1.determinant().abs(), epsilon = 1e-10);
    }

    #[test]
    fn bordered_volume_matches_determinant_after_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let left = DMatrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let right = DMatrix::from_fn(4, 9, |_, _| rng.random_range(-1.0..1.0));
        let a = &left * &right;
        let mut state = CrossState::new(9, 9);
        for _ in 0..4 {
            state
                .expand_step(&a, &ExpandConfig::default(), &mut rng)
                .unwrap();
        }
        let r = state.rank();
        let mut inter = DMatrix::zeros(r, r);
        for (p, &i) in state.rows().iter().enumerate() {
            for (q, &j) in state.cols().iter().enumerate() {
                inter[(p, q)] = a[(i, j)];
            }
        }
        assert_relative_eq!(
            state.log2_volume(),
            inter.determinant().abs().log2(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn converged_rank_one_matrix_stops_growing() {
        let u = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, -1.0, 0.5]);
        let v = DMatrix::from_row_slice(1, 4, &[1.0, -2.0, 3.0, 0.25]);
        let a = &u * &v;
        let mut state = CrossState::new(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = ExpandConfig::default();
        assert!(matches!(
            state.expand_step(&a, &cfg, &mut rng).unwrap(),
            ExpandOutcome::Accepted { .. }
        ));
        assert!(matches!(
            state.expand_step(&a, &cfg, &mut rng).unwrap(),
            ExpandOutcome::NoPivot { .. }
        ));
        assert_eq!(state.rank(), 1);
    }

    #[test]
    fn degenerate_pivot_is_banned_and_step_retried() {
        // With a zero threshold the step is forced to try roundoff-level
        // residuals of an exactly rank-1 matrix; each attempted pivot has
        // a vanishing Schur complement, gets banned, and the step must
        // give up cleanly after its retries instead of corrupting state.
        let u = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, -1.0, 0.5]);
        let v = DMatrix::from_row_slice(1, 4, &[1.0, -2.0, 3.0, 0.25]);
        let a = &u * &v;
        let mut state = CrossState::new(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = ExpandConfig {
            rel_tol: 0.0,
            ..ExpandConfig::default()
        };
        assert!(matches!(
            state.expand_step(&a, &cfg, &mut rng).unwrap(),
            ExpandOutcome::Accepted { .. }
        ));
        let out = state.expand_step(&a, &cfg, &mut rng).unwrap();
        assert!(matches!(out, ExpandOutcome::NoPivot { .. }));
        assert_eq!(state.rank(), 1);
    }
}
