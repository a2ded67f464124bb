//! Sparse operators factored at many diagonal shifts.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::MatMut;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// Square sparse S with every diagonal entry stored, so that S + c·I has
/// the pattern of S and one symbolic LU serves every shift c. Optionally
/// bordered by a vector w as extra column and row: [S + c·I, w; wᵀ, 0].
pub(crate) struct ShiftedOperator {
    dim: usize,
    entries: Vec<(usize, usize, C)>,
    symbolic: SymbolicSparseColMat<usize>,
    values: Vec<C>,
    diag: Vec<usize>,
    lu: SymbolicLu<usize>,
}

impl ShiftedOperator {
    pub(crate) fn new(dim: usize, entries: impl IntoIterator<Item = (usize, usize, C)>, border: Option<&[C]>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), C> = BTreeMap::new();
        for i in 0..dim {
            merged.insert((i, i), C::new(0.0, 0.0));
        }
        for (r, c, v) in entries {
            *merged.entry((c, r)).or_default() += v;
        }
        let entries: Vec<(usize, usize, C)> = merged
            .iter()
            .filter(|(_, v)| v.norm() != 0.0)
            .map(|(&(c, r), &v)| (r, c, v))
            .collect();
        if let Some(w) = border {
            for (i, &wi) in w.iter().enumerate() {
                if wi.norm() != 0.0 {
                    merged.insert((dim, i), wi);
                    merged.insert((i, dim), wi);
                }
            }
        }
        let n = if border.is_some() { dim + 1 } else { dim };
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        let mut diag = vec![0usize; dim];
        for (&(c, r), &v) in &merged {
            if r == c {
                diag[r] = row_idx.len();
            }
            col_ptr[c + 1] += 1;
            row_idx.push(r);
            values.push(v);
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let lu = SymbolicLu::try_new(symbolic.as_ref())
            .map_err(|e| Error::NonConvergence(format!("symbolic LU failed: {e:?}")))?;
        Ok(Self {
            dim,
            entries,
            symbolic,
            values,
            diag,
            lu,
        })
    }

    /// Numeric LU of S + c·I (bordered if constructed so).
    pub(crate) fn factor(&self, c: C) -> Result<Lu<usize, C>> {
        let mut values = self.values.clone();
        for &k in &self.diag {
            values[k] += c;
        }
        let mat = SparseColMat::new(self.symbolic.clone(), values);
        Lu::try_new_with_symbolic(self.lu.clone(), mat.as_ref())
            .map_err(|e| Error::Degenerate(format!("shifted sparse LU failed: {e:?}")))
    }

    #[cfg(test)]
    pub(crate) fn order(&self) -> usize {
        self.symbolic.nrows()
    }

    /// y·Sᵀ, i.e. S applied to every row of y.
    pub(crate) fn apply_rows(&self, y: &DMatrix<C>) -> DMatrix<C> {
        let mut out = DMatrix::<C>::zeros(y.nrows(), self.dim);
        for &(r, c, v) in &self.entries {
            out.column_mut(r).axpy(v, &y.column(c), C::new(1.0, 0.0));
        }
        out
    }

    /// Largest absolute row sum of S.
    pub(crate) fn row_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.dim];
        for &(r, _, v) in &self.entries {
            sums[r] += v.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute column sum of S.
    pub(crate) fn col_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.dim];
        for &(_, c, v) in &self.entries {
            sums[c] += v.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }
}

/// Solves in place; `x` has the order of the factored matrix.
pub(crate) fn solve_in_place(lu: &Lu<usize, C>, x: &mut [C]) {
    let n = x.len();
    lu.solve_in_place(MatMut::from_column_major_slice_mut(x, n, 1));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal(n: usize) -> Vec<(usize, usize, C)> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C::new(-2.0, 0.3 * i as f64)));
            if i + 1 < n {
                t.push((i, i + 1, C::new(1.0, 0.0)));
                t.push((i + 1, i, C::new(0.5, -0.5)));
            }
        }
        t
    }

    #[test]
    fn shifted_solve_matches_dense() {
        let n = 9;
        let op = ShiftedOperator::new(n, tridiagonal(n), None).unwrap();
        let c = C::new(-0.1, 0.7);
        let mut dense = DMatrix::<C>::identity(n, n) * c;
        for (r, k, v) in tridiagonal(n) {
            dense[(r, k)] += v;
        }
        let b: Vec<C> = (0..n).map(|i| C::new(i as f64, 1.0)).collect();
        let mut x = b.clone();
        solve_in_place(&op.factor(c).unwrap(), &mut x);
        let ax = &dense * nalgebra::DVector::from_vec(x);
        for i in 0..n {
            assert!((ax[i] - b[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn bordering_removes_a_null_direction() {
        // Columns sum to zero, so wᵀS = 0 for w = (1, …, 1).
        let n = 4;
        let mut t = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            t.push((i, i, C::new(-1.0, 0.0)));
            t.push((j, i, C::new(1.0, 0.0)));
        }
        let w = vec![C::new(1.0, 0.0); n];
        let op = ShiftedOperator::new(n, t, Some(&w)).unwrap();
        assert_eq!(op.order(), n + 1);
        let mut x = vec![C::new(0.0, 0.0); n + 1];
        x[n] = C::new(1.0, 0.0);
        solve_in_place(&op.factor(C::new(0.0, 0.0)).unwrap(), &mut x);
        for v in &x[..n] {
            assert!((v - C::new(0.25, 0.0)).norm() < 1e-14);
        }
    }
}
