//! The tensor-train cross interpolation model and its contractions.
//!
//! The model represents a d-mode tensor by per-mode fiber cores and
//! interface intersection matrices. Core k holds, for every grid index
//! `i_k`, the matrix `A(I_{<=k-1}, i_k, I_{>k})` of shape
//! `r_{k-1} x r_k`; interface k holds `M_k = A(I_{<=k}, I_{>k})`. The
//! model value at a full index is the alternating product
//!
//! `W_1(i_1) M_1^{-1} W_2(i_2) M_2^{-1} ... W_d(i_d)`
//!
//! where every inverse is applied through a factored solve. The model
//! reproduces the tensor exactly on the cross index sets, and everywhere
//! when the tensor's TT ranks do not exceed the cross ranks.

use crate::error::{CrossError, Result};
use crate::index::MultiIndex;
use crate::lu::PivotedLu;
use crate::oracle::FunctionOracle;
use crate::sets::NestedIndexSets;
use crate::Scalar;
use nalgebra::DMatrix;

/// Tensor-train cross model: fiber cores, interface intersections, and
/// their factorizations.
#[derive(Clone, Debug)]
pub struct TTCrossModel {
    dims: Vec<usize>,
    ranks: Vec<usize>,
    /// `cores[k][i]` is the `r_k x r_{k+1}` fiber matrix of mode k
    /// (0-based) at grid index i (0-based).
    cores: Vec<Vec<DMatrix<Scalar>>>,
    /// `intersections[k-1] = M_k` for interfaces k = 1..d-1.
    intersections: Vec<DMatrix<Scalar>>,
    lus: Vec<PivotedLu>,
}

impl TTCrossModel {
    /// Assembles a model from already-evaluated parts, validating the
    /// shape chain and factoring every intersection.
    pub fn from_parts(
        dims: Vec<usize>,
        cores: Vec<Vec<DMatrix<Scalar>>>,
        intersections: Vec<DMatrix<Scalar>>,
    ) -> Result<Self> {
        let d = dims.len();
        if d == 0 || cores.len() != d || intersections.len() != d - 1 {
            return Err(CrossError::invalid(
                "model needs d cores and d-1 intersection matrices",
            ));
        }
        let mut ranks = vec![1usize; d + 1];
        for (k, m) in intersections.iter().enumerate() {
            if m.nrows() != m.ncols() || m.nrows() == 0 {
                return Err(CrossError::invalid(format!(
                    "intersection at interface {} must be square and nonempty",
                    k + 1
                )));
            }
            ranks[k + 1] = m.nrows();
        }
        for k in 0..d {
            if cores[k].len() != dims[k] {
                return Err(CrossError::invalid(format!(
                    "core {k} has {} slices, expected {}",
                    cores[k].len(),
                    dims[k]
                )));
            }
            for (i, w) in cores[k].iter().enumerate() {
                if w.nrows() != ranks[k] || w.ncols() != ranks[k + 1] {
                    return Err(CrossError::invalid(format!(
                        "core {k} slice {i} is {}x{}, expected {}x{}",
                        w.nrows(),
                        w.ncols(),
                        ranks[k],
                        ranks[k + 1]
                    )));
                }
            }
        }
        let lus = intersections
            .iter()
            .enumerate()
            .map(|(k, m)| {
                PivotedLu::factor(m).map_err(|e| match e {
                    CrossError::DegenerateIntersection { .. } => {
                        CrossError::DegenerateIntersection { interface: k + 1 }
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TTCrossModel {
            dims,
            ranks,
            cores,
            intersections,
            lus,
        })
    }

    /// Evaluates all fibers and intersections of the cross defined by the
    /// index sets, through the (memoizing) oracle.
    pub fn from_oracle(oracle: &FunctionOracle, sets: &NestedIndexSets) -> Result<Self> {
        let dims = sets.dims().to_vec();
        let d = dims.len();
        let mut cores = Vec::with_capacity(d);
        for mode in 1..=d {
            cores.push(build_core_slices(oracle, sets, mode)?);
        }
        let mut intersections = Vec::with_capacity(d - 1);
        for k in 1..d {
            intersections.push(build_intersection(oracle, sets, k)?);
        }
        TTCrossModel::from_parts(dims, cores, intersections)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// TT ranks r_0..r_d including the unit boundary ranks.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(1)
    }

    pub fn intersections(&self) -> &[DMatrix<Scalar>] {
        &self.intersections
    }

    pub fn cores(&self) -> &[Vec<DMatrix<Scalar>>] {
        &self.cores
    }

    /// Model value at one grid index. Performs no oracle evaluations.
    pub fn tt_eval(&self, idx: &MultiIndex) -> Result<Scalar> {
        idx.validate(&self.dims)?;
        let mut v = self.cores[0][idx.get(0) - 1].clone();
        for k in 1..self.dims.len() {
            v = apply_inverse_right(&v, &self.lus[k - 1])?;
            v *= &self.cores[k][idx.get(k) - 1];
        }
        Ok(v[(0, 0)])
    }

    /// Contraction of the model with per-mode weight vectors:
    /// `sum_i prod_k w_k(i_k) * model(i)`, computed by a deterministic
    /// left-to-right fold. Performs no oracle evaluations.
    pub fn contract_weights(&self, weights: &[Vec<Scalar>]) -> Result<Scalar> {
        let d = self.dims.len();
        if weights.len() != d {
            return Err(CrossError::invalid(format!(
                "need one weight vector per mode, got {} for d = {d}",
                weights.len()
            )));
        }
        for (k, w) in weights.iter().enumerate() {
            if w.len() != self.dims[k] {
                return Err(CrossError::invalid(format!(
                    "weight vector {k} has length {}, expected {}",
                    w.len(),
                    self.dims[k]
                )));
            }
        }
        let chunk_cores: Vec<&[DMatrix<Scalar>]> =
            (0..d - 1).map(|k| self.cores[k].as_slice()).collect();
        let chunk_weights: Vec<&[Scalar]> = (0..d - 1).map(|k| weights[k].as_slice()).collect();
        let lus: Vec<&PivotedLu> = self.lus.iter().collect();
        let t = weighted_chunk_product(
            &chunk_cores,
            &chunk_weights,
            &lus,
            Some((self.cores[d - 1].as_slice(), weights[d - 1].as_slice())),
        )?;
        Ok(t[(0, 0)])
    }

    /// Contraction with the uniform weights 1/n_k per mode: the mean of
    /// the model over the full grid.
    pub fn contract_grid_mean(&self) -> Result<Scalar> {
        let weights: Vec<Vec<Scalar>> = self
            .dims
            .iter()
            .map(|&n| vec![1.0 / n as Scalar; n])
            .collect();
        self.contract_weights(&weights)
    }
}

/// Fiber core of 1-based `mode`: one `r_{mode-1} x r_mode` slice per grid
/// index, with entries `A(I_{<=mode-1}, i, I_{>mode})` through the oracle.
pub(crate) fn build_core_slices(
    oracle: &FunctionOracle,
    sets: &NestedIndexSets,
    mode: usize,
) -> Result<Vec<DMatrix<Scalar>>> {
    let n = sets.dims()[mode - 1];
    let left = sets.left_or_root(mode - 1);
    let right = sets.right_or_root(mode);
    let mut slices = Vec::with_capacity(n);
    for i in 1..=n {
        let mut w = DMatrix::zeros(left.len(), right.len());
        for (a, la) in left.iter().enumerate() {
            let mid = la.extended_back(i);
            for (b, rb) in right.iter().enumerate() {
                w[(a, b)] = oracle.eval(&mid.concat(rb))?;
            }
        }
        slices.push(w);
    }
    Ok(slices)
}

/// Intersection matrix `M_k = A(I_{<=k}, I_{>k})` through the oracle.
pub(crate) fn build_intersection(
    oracle: &FunctionOracle,
    sets: &NestedIndexSets,
    k: usize,
) -> Result<DMatrix<Scalar>> {
    let left = sets.left(k);
    let right = sets.right(k);
    let mut m = DMatrix::zeros(left.len(), right.len());
    for (a, la) in left.iter().enumerate() {
        for (b, rb) in right.iter().enumerate() {
            m[(a, b)] = oracle.eval(&la.concat(rb))?;
        }
    }
    Ok(m)
}

/// `Y = X M^{-1}` through the factored solve `Y^T = M^{-T} X^T`.
pub(crate) fn apply_inverse_right(
    x: &DMatrix<Scalar>,
    lu: &PivotedLu,
) -> Result<DMatrix<Scalar>> {
    Ok(lu.solve_transposed(&x.transpose())?.transpose())
}

/// Weighted sum of fiber slices: `S = sum_i w[i] * slices[i]`.
pub(crate) fn weighted_core_sum(slices: &[DMatrix<Scalar>], w: &[Scalar]) -> DMatrix<Scalar> {
    let mut s = DMatrix::zeros(slices[0].nrows(), slices[0].ncols());
    for (i, slice) in slices.iter().enumerate() {
        s += slice * w[i];
    }
    s
}

/// Ordered product of weighted-core factors
/// `prod_k (S_k M_k^{-1})`, optionally appending a trailing weighted
/// core with no inverse after it. This is the single fold used both by
/// the sequential contraction and by each parallel worker's chunk, so a
/// one-chunk parallel run reproduces the sequential result bit for bit.
pub(crate) fn weighted_chunk_product(
    cores: &[&[DMatrix<Scalar>]],
    weights: &[&[Scalar]],
    lus: &[&PivotedLu],
    tail: Option<(&[DMatrix<Scalar>], &[Scalar])>,
) -> Result<DMatrix<Scalar>> {
    if cores.len() != weights.len() || cores.len() != lus.len() {
        return Err(CrossError::invalid(
            "chunk product needs matching cores, weights, and factorizations",
        ));
    }
    let mut acc: Option<DMatrix<Scalar>> = None;
    for ((slices, w), lu) in cores.iter().zip(weights).zip(lus) {
        let s = weighted_core_sum(slices, w);
        let sm = apply_inverse_right(&s, lu)?;
        acc = Some(match acc {
            None => sm,
            Some(prev) => prev * sm,
        });
    }
    if let Some((slices, w)) = tail {
        let s = weighted_core_sum(slices, w);
        acc = Some(match acc {
            None => s,
            Some(prev) => prev * s,
        });
    }
    acc.ok_or_else(|| CrossError::invalid("chunk product over an empty range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn oracle_from_fn(
        dims: &[usize],
        f: impl Fn(&MultiIndex) -> Scalar + Send + Sync + 'static,
    ) -> FunctionOracle {
        FunctionOracle::new(dims, Arc::new(f)).unwrap()
    }

    fn mi(e: &[usize]) -> MultiIndex {
        MultiIndex::new(e).unwrap()
    }

    fn all_indices(dims: &[usize]) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::empty()];
        for &n in dims {
            let mut next = Vec::new();
            for base in &out {
                for i in 1..=n {
                    next.push(base.extended_back(i));
                }
            }
            out = next;
        }
        out
    }

    #[test]
    fn rank_one_cross_reproduces_a_separable_tensor() {
        let dims = [4usize, 3, 5];
        let oracle = oracle_from_fn(&dims, |idx| {
            let (a, b, c) = (idx.get(0) as Scalar, idx.get(1) as Scalar, idx.get(2) as Scalar);
            (0.3 * a).sin() * (1.0 + 0.5 * b) * (0.2 * c).exp()
        });
        let sets = NestedIndexSets::rank_one_midgrid(&dims).unwrap();
        let model = TTCrossModel::from_oracle(&oracle, &sets).unwrap();
        for idx in all_indices(&dims) {
            let truth = {
                let (a, b, c) =
                    (idx.get(0) as Scalar, idx.get(1) as Scalar, idx.get(2) as Scalar);
                (0.3 * a).sin() * (1.0 + 0.5 * b) * (0.2 * c).exp()
            };
            assert_relative_eq!(model.tt_eval(&idx).unwrap(), truth, max_relative = 1e-13);
        }
    }

    #[test]
    fn model_is_exact_on_every_cross_point() {
        let dims = [3usize, 4, 3];
        let oracle = oracle_from_fn(&dims, |idx| {
            let (a, b, c) = (idx.get(0) as Scalar, idx.get(1) as Scalar, idx.get(2) as Scalar);
            (a * 1.3 + b * b * 0.7 + (b * c).sqrt()).sin() + a * c * 0.05 + 3.0
        });
        let left = vec![vec![mi(&[1]), mi(&[3])], vec![mi(&[1, 2]), mi(&[3, 4])]];
        let right = vec![vec![mi(&[2, 1]), mi(&[4, 3])], vec![mi(&[1]), mi(&[3])]];
        let sets = NestedIndexSets::from_sets(&dims, left, right).unwrap();
        sets.check_nestedness().unwrap();
        let model = TTCrossModel::from_oracle(&oracle, &sets).unwrap();
        for k in 1..dims.len() {
            for la in sets.left(k) {
                for rb in sets.right(k) {
                    let idx = la.concat(rb);
                    assert_relative_eq!(
                        model.tt_eval(&idx).unwrap(),
                        oracle.eval(&idx).unwrap(),
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn contraction_matches_brute_force_sum() {
        let dims = [3usize, 4, 3];
        let oracle = oracle_from_fn(&dims, |idx| {
            let (a, b, c) = (idx.get(0) as Scalar, idx.get(1) as Scalar, idx.get(2) as Scalar);
            (2.0 + (0.4 * a + 0.1 * b).cos()) * (0.3 * c + 0.2 * b).exp() + 0.1 * a * c * c
        });
        let left = vec![vec![mi(&[1]), mi(&[2])], vec![mi(&[1, 1]), mi(&[2, 3])]];
        let right = vec![vec![mi(&[1, 1]), mi(&[3, 2])], vec![mi(&[1]), mi(&[2])]];
        let sets = NestedIndexSets::from_sets(&dims, left, right).unwrap();
        sets.check_nestedness().unwrap();
        let model = TTCrossModel::from_oracle(&oracle, &sets).unwrap();
        let weights: Vec<Vec<Scalar>> = dims
            .iter()
            .enumerate()
            .map(|(k, &n)| (1..=n).map(|i| 0.1 + 0.05 * (k + i) as Scalar).collect())
            .collect();
        let mut brute = 0.0;
        for idx in all_indices(&dims) {
            let mut w = 1.0;
            for (k, i) in idx.entries().enumerate() {
                w *= weights[k][i - 1];
            }
            brute += w * model.tt_eval(&idx).unwrap();
        }
        let folded = model.contract_weights(&weights).unwrap();
        assert_relative_eq!(folded, brute, max_relative = 1e-12);
    }

    #[test]
    fn single_mode_model_contracts_to_a_weighted_sum() {
        let dims = [5usize];
        let oracle = oracle_from_fn(&dims, |idx| (idx.get(0) as Scalar).powi(2));
        let sets = NestedIndexSets::rank_one_midgrid(&dims).unwrap();
        let model = TTCrossModel::from_oracle(&oracle, &sets).unwrap();
        assert_eq!(model.ranks(), &[1, 1]);
        let weights = vec![vec![0.5, 1.0, 1.5, 2.0, 2.5]];
        let expected: Scalar = (1..=5).map(|i| 0.5 * i as Scalar * (i * i) as Scalar).sum();
        assert_relative_eq!(
            model.contract_weights(&weights).unwrap(),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            model.tt_eval(&mi(&[3])).unwrap(),
            9.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn grid_mean_of_constant_tensor_is_the_constant() {
        let dims = [3usize, 3, 3, 3];
        let oracle = oracle_from_fn(&dims, |_| 2.75);
        let sets = NestedIndexSets::rank_one_midgrid(&dims).unwrap();
        let model = TTCrossModel::from_oracle(&oracle, &sets).unwrap();
        assert_relative_eq!(model.contract_grid_mean().unwrap(), 2.75, max_relative = 1e-14);
    }
}
