//! Pivoted LU factorization with rank-one bordering.
//!
//! The cross interpolation never forms an explicit inverse of the
//! intersection matrix. It keeps a row-pivoted factorization `P A = L U`
//! and answers `A x = b` and `A^T x = b` by substitution. When a pivot is
//! accepted the factorization grows in place by one bordered row and
//! column at `O(r^2)` cost, with the Schur complement of the new corner
//! becoming the new diagonal entry of `U`.

use crate::error::{CrossError, Result};
use crate::Scalar;
use nalgebra::DMatrix;

/// Relative floor under which a Schur complement or pivot counts as
/// numerically zero (the candidate adds no volume to the intersection).
pub(crate) const DEGENERACY_RTOL: Scalar = 1e-13;

/// Row-pivoted LU factorization, growable by bordering.
///
/// Permutation semantics: `(P A)[i, :] = A[perm[i], :]`, so `perm[i]` is the
/// original row index that ends up in position `i` of the factored matrix.
#[derive(Clone, Debug)]
pub struct PivotedLu {
    /// Packed factors: strict lower triangle holds L (unit diagonal
    /// implied), upper triangle including the diagonal holds U.
    lu: DMatrix<Scalar>,
    perm: Vec<usize>,
}

impl PivotedLu {
    /// Factorization of the empty 0 x 0 matrix.
    pub fn empty() -> Self {
        PivotedLu {
            lu: DMatrix::zeros(0, 0),
            perm: Vec::new(),
        }
    }

    /// Factors a square matrix with partial (row) pivoting.
    pub fn factor(a: &DMatrix<Scalar>) -> Result<Self> {
        Self::factor_with_rtol(a, DEGENERACY_RTOL)
    }

    /// Factorization with a caller-chosen relative pivot floor. Used to
    /// test a prospective intersection with a safety margin above the
    /// default floor.
    pub(crate) fn factor_with_rtol(a: &DMatrix<Scalar>, rtol: Scalar) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(CrossError::invalid(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0 as Scalar, |m, &v| m.max(v.abs()));
        for k in 0..n {
            let mut best = k;
            let mut best_abs = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best_abs {
                    best = i;
                    best_abs = v;
                }
            }
            if !best_abs.is_finite() || best_abs <= rtol * scale {
                return Err(CrossError::DegenerateIntersection { interface: 0 });
            }
            if best != k {
                lu.swap_rows(k, best);
                perm.swap(k, best);
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / piv;
                lu[(i, k)] = l;
                for j in k + 1..n {
                    lu[(i, j)] -= l * lu[(k, j)];
                }
            }
        }
        Ok(PivotedLu { lu, perm })
    }

    pub fn size(&self) -> usize {
        self.lu.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.lu.nrows() == 0
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// log2 |det A|, the log-volume of the intersection.
    pub fn log2_abs_det(&self) -> Scalar {
        (0..self.size())
            .map(|k| self.lu[(k, k)].abs().log2())
            .sum()
    }

    /// Applies the row permutation to a right-hand side: `out[i] = b[perm[i]]`.
    fn permute(&self, b: &DMatrix<Scalar>) -> DMatrix<Scalar> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for (i, &pi) in self.perm.iter().enumerate() {
            for j in 0..b.ncols() {
                out[(i, j)] = b[(pi, j)];
            }
        }
        out
    }

    /// Forward substitution `L y = b` (unit diagonal), in place.
    fn solve_lower(&self, b: &mut DMatrix<Scalar>) {
        let n = self.size();
        for j in 0..b.ncols() {
            for i in 0..n {
                let mut v = b[(i, j)];
                for k in 0..i {
                    v -= self.lu[(i, k)] * b[(k, j)];
                }
                b[(i, j)] = v;
            }
        }
    }

    /// Back substitution `U x = y`, in place.
    fn solve_upper(&self, b: &mut DMatrix<Scalar>) {
        let n = self.size();
        for j in 0..b.ncols() {
            for i in (0..n).rev() {
                let mut v = b[(i, j)];
                for k in i + 1..n {
                    v -= self.lu[(i, k)] * b[(k, j)];
                }
                b[(i, j)] = v / self.lu[(i, i)];
            }
        }
    }

    /// Solves `A x = b` for a multi-column right-hand side.
    pub fn solve(&self, b: &DMatrix<Scalar>) -> Result<DMatrix<Scalar>> {
        if b.nrows() != self.size() {
            return Err(CrossError::invalid(format!(
                "solve: rhs has {} rows, factorization is {}x{}",
                b.nrows(),
                self.size(),
                self.size()
            )));
        }
        let mut x = self.permute(b);
        self.solve_lower(&mut x);
        self.solve_upper(&mut x);
        Ok(x)
    }

    /// Solves `A^T x = b` for a multi-column right-hand side.
    pub fn solve_transposed(&self, b: &DMatrix<Scalar>) -> Result<DMatrix<Scalar>> {
        let n = self.size();
        if b.nrows() != n {
            return Err(CrossError::invalid(format!(
                "solve_transposed: rhs has {} rows, factorization is {n}x{n}",
                b.nrows()
            )));
        }
        let mut y = b.clone();
        // U^T y = b: forward substitution on the transposed upper factor.
        for j in 0..y.ncols() {
            for i in 0..n {
                let mut v = y[(i, j)];
                for k in 0..i {
                    v -= self.lu[(k, i)] * y[(k, j)];
                }
                y[(i, j)] = v / self.lu[(i, i)];
            }
        }
        // L^T z = y: back substitution, unit diagonal.
        for j in 0..y.ncols() {
            for i in (0..n).rev() {
                let mut v = y[(i, j)];
                for k in i + 1..n {
                    v -= self.lu[(k, i)] * y[(k, j)];
                }
                y[(i, j)] = v;
            }
        }
        // x = P^T z.
        let mut x = DMatrix::zeros(n, y.ncols());
        for (i, &pi) in self.perm.iter().enumerate() {
            for j in 0..y.ncols() {
                x[(pi, j)] = y[(i, j)];
            }
        }
        Ok(x)
    }

    /// Schur complement `d - row . A^{-1} col` of a prospective border,
    /// without modifying the factorization.
    pub fn border_schur(&self, col: &[Scalar], row: &[Scalar], corner: Scalar) -> Result<Scalar> {
        let (y, w) = self.border_parts(col, row)?;
        Ok(corner - w.dot(&y))
    }

    /// Computes `y = L^{-1} P col` and `w = U^{-T} row` for a border.
    fn border_parts(
        &self,
        col: &[Scalar],
        row: &[Scalar],
    ) -> Result<(nalgebra::DVector<Scalar>, nalgebra::DVector<Scalar>)> {
        let n = self.size();
        if col.len() != n || row.len() != n {
            return Err(CrossError::invalid(format!(
                "border: expected length-{n} column and row, got {} and {}",
                col.len(),
                row.len()
            )));
        }
        let mut y = DMatrix::from_fn(n, 1, |i, _| col[self.perm[i]]);
        self.solve_lower(&mut y);
        let mut w = DMatrix::from_column_slice(n, 1, row);
        for i in 0..n {
            let mut v = w[(i, 0)];
            for k in 0..i {
                v -= self.lu[(k, i)] * w[(k, 0)];
            }
            w[(i, 0)] = v / self.lu[(i, i)];
        }
        Ok((y.column(0).into_owned(), w.column(0).into_owned()))
    }

    /// Grows the factorization by one row and column:
    /// the matrix becomes `[[A, col], [row^T, corner]]`. Returns the Schur
    /// complement (the new diagonal entry of U), or a degeneracy error
    /// leaving the factorization untouched.
    pub fn extend(&mut self, col: &[Scalar], row: &[Scalar], corner: Scalar) -> Result<Scalar> {
        let n = self.size();
        let (y, w) = self.border_parts(col, row)?;
        let cross = w.dot(&y);
        let s = corner - cross;
        if !s.is_finite() || s.abs() <= DEGENERACY_RTOL * (corner.abs() + cross.abs()) {
            return Err(CrossError::DegenerateIntersection { interface: 0 });
        }
        let mut lu = DMatrix::zeros(n + 1, n + 1);
        lu.view_mut((0, 0), (n, n)).copy_from(&self.lu);
        for i in 0..n {
            lu[(i, n)] = y[i];
            lu[(n, i)] = w[i];
        }
        lu[(n, n)] = s;
        self.lu = lu;
        self.perm.push(n);
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Scalar> {
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn solves_match_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 5, 9] {
            let a = random_matrix(n, &mut rng) + DMatrix::identity(n, n) * 3.0;
            let lu = PivotedLu::factor(&a).unwrap();
            let b = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
            let x = lu.solve(&b).unwrap();
            assert_relative_eq!(&a * &x, b, epsilon = 1e-10);
            let xt = lu.solve_transposed(&b).unwrap();
            assert_relative_eq!(a.transpose() * &xt, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn extend_matches_fresh_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let full = random_matrix(6, &mut rng) + DMatrix::identity(6, 6) * 2.0;
        let mut lu = PivotedLu::empty();
        for r in 0..6 {
            let col: Vec<Scalar> = (0..r).map(|i| full[(i, r)]).collect();
            let row: Vec<Scalar> = (0..r).map(|j| full[(r, j)]).collect();
            lu.extend(&col, &row, full[(r, r)]).unwrap();
        }
        let b = DMatrix::from_fn(6, 1, |i, _| (i as Scalar).sin());
        let x = lu.solve(&b).unwrap();
        let x_ref = PivotedLu::factor(&full).unwrap().solve(&b).unwrap();
        assert_relative_eq!(x, x_ref, epsilon = 1e-10);
        assert_relative_eq!(
            lu.log2_abs_det(),
            full.determinant().abs().log2(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn schur_complement_formula() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 2.0, 3.0]);
        let lu = PivotedLu::factor(&a).unwrap();
        let col = [1.0, 0.0];
        let row = [0.0, 1.0];
        let corner = 5.0;
        let inv = a.clone().try_inverse().unwrap();
        let expected =
            corner - DVector::from_row_slice(&row).dot(&(inv * DVector::from_column_slice(&col)));
        let s = lu.border_schur(&col, &row, corner).unwrap();
        assert_relative_eq!(s, expected, epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_is_degenerate() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match PivotedLu::factor(&a) {
            Err(CrossError::DegenerateIntersection { .. }) => {}
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_extension_leaves_state_intact() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let mut lu = PivotedLu::factor(&a).unwrap();
        // Border equal to a linear combination of existing rows/columns:
        // corner exactly reproduces row . A^{-1} col, Schur complement 0.
        let col = [1.0, 0.0];
        let row = [0.0, 1.0];
        let inv = a.clone().try_inverse().unwrap();
        let corner =
            DVector::from_row_slice(&row).dot(&(inv * DVector::from_column_slice(&col)));
        assert!(lu.extend(&col, &row, corner).is_err());
        assert_eq!(lu.size(), 2);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert_relative_eq!(&a * lu.solve(&b).unwrap(), b, epsilon = 1e-12);
    }

    #[test]
    fn empty_factorization_extends_from_scalar() {
        let mut lu = PivotedLu::empty();
        let s = lu.extend(&[], &[], 2.5).unwrap();
        assert_relative_eq!(s, 2.5);
        let x = lu
            .solve(&DMatrix::from_row_slice(1, 1, &[5.0]))
            .unwrap();
        assert_relative_eq!(x[(0, 0)], 2.0);
        assert_relative_eq!(lu.log2_abs_det(), 2.5f64.log2());
    }
}
