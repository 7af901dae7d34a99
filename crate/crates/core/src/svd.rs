//! Truncated singular value decomposition used by the rank-adaptive sweep.

use crate::error::{CrossError, Result};
use crate::Scalar;
use nalgebra::DMatrix;

/// Rank-truncated SVD `A ~ U diag(s) V^T`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// m x r, orthonormal columns.
    pub u: DMatrix<Scalar>,
    /// Kept singular values, descending.
    pub singular_values: Vec<Scalar>,
    /// r x n, orthonormal rows.
    pub v_t: DMatrix<Scalar>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// SVD truncated at relative Frobenius accuracy `eps`: the largest tail of
/// singular values whose squared sum stays within `eps^2` times the total
/// squared sum is discarded. The rank is clamped to at least 1 (so
/// `eps = infinity` yields a rank-1 factorization) and to at most
/// `max_rank` when given.
pub fn truncated_svd(
    a: &DMatrix<Scalar>,
    eps: Scalar,
    max_rank: Option<usize>,
) -> Result<TruncatedSvd> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(CrossError::invalid("cannot decompose an empty matrix"));
    }
    if eps < 0.0 || eps.is_nan() {
        return Err(CrossError::invalid("truncation accuracy must be >= 0"));
    }
    let svd = a.clone().svd(true, true);
    let u_full = svd.u.ok_or_else(|| CrossError::invalid("SVD failed to produce U"))?;
    let vt_full = svd
        .v_t
        .ok_or_else(|| CrossError::invalid("SVD failed to produce V^T"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigmas: Vec<Scalar> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let total: Scalar = sigmas.iter().map(|s| s * s).sum();
    let budget = if eps.is_infinite() {
        Scalar::INFINITY
    } else {
        eps * eps * total
    };
    let mut keep = sigmas.len();
    let mut tail = 0.0;
    while keep > 1 {
        let next_tail = tail + sigmas[keep - 1] * sigmas[keep - 1];
        if next_tail > budget {
            break;
        }
        tail = next_tail;
        keep -= 1;
    }
    if let Some(cap) = max_rank {
        keep = keep.min(cap.max(1));
    }
    let mut u = DMatrix::zeros(a.nrows(), keep);
    let mut v_t = DMatrix::zeros(keep, a.ncols());
    for (p, &i) in order[..keep].iter().enumerate() {
        u.set_column(p, &u_full.column(i));
        v_t.set_row(p, &vt_full.row(i));
    }
    Ok(TruncatedSvd {
        u,
        singular_values: sigmas[..keep].to_vec(),
        v_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn reconstruction(t: &TruncatedSvd) -> DMatrix<Scalar> {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            t.singular_values.clone(),
        ));
        &t.u * s * &t.v_t
    }

    #[test]
    fn exact_rank_is_recovered_at_tight_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let left = DMatrix::from_fn(10, 3, |_, _| rng.random_range(-1.0..1.0));
        let right = DMatrix::from_fn(3, 8, |_, _| rng.random_range(-1.0..1.0));
        let a = &left * &right;
        let t = truncated_svd(&a, 1e-12, None).unwrap();
        assert_eq!(t.rank(), 3);
        assert_relative_eq!(reconstruction(&t), a, epsilon = 1e-10);
    }

    #[test]
    fn truncation_respects_the_frobenius_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
        for eps in [0.5, 0.1, 0.01] {
            let t = truncated_svd(&a, eps, None).unwrap();
            let err = (&a - reconstruction(&t)).norm();
            assert!(
                err <= eps * a.norm() + 1e-12,
                "eps {eps}: error {err} exceeds budget {}",
                eps * a.norm()
            );
        }
    }

    #[test]
    fn infinite_accuracy_clamps_to_rank_one() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let t = truncated_svd(&a, Scalar::INFINITY, None).unwrap();
        assert_eq!(t.rank(), 1);
        assert_relative_eq!(t.singular_values[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn max_rank_cap_applies_after_the_accuracy_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = DMatrix::from_fn(9, 9, |_, _| rng.random_range(-1.0..1.0));
        let t = truncated_svd(&a, 0.0, Some(4)).unwrap();
        assert_eq!(t.rank(), 4);
        let mut sorted = t.singular_values.clone();
        sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert_eq!(sorted, t.singular_values);
    }
}
