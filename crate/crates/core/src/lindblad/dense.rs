//! Dense complex products on nalgebra views through matrixmultiply.

use matrixmultiply::{zgemm, CGemmOption};
use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use num_complex::Complex64;

type C = Complex64;

/// c ← alpha·a·b + beta·c
pub(crate) fn gemm(
    alpha: C,
    a: &DMatrixView<'_, C>,
    b: &DMatrixView<'_, C>,
    beta: C,
    c: &mut DMatrixViewMut<'_, C>,
) {
    let (m, k) = a.shape();
    let (kb, n) = b.shape();
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!((m, n), c.shape(), "output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == C::new(0.0, 0.0) {
            c.fill(C::new(0.0, 0.0));
        } else {
            *c *= beta;
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    let (rsc, csc) = c.strides();
    // SAFETY: Complex64 is repr(C) with (re, im) layout, identical to
    // matrixmultiply's [f64; 2]; the views guarantee the index ranges.
    unsafe {
        zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            rsa as isize,
            csa as isize,
            b.as_ptr() as *const [f64; 2],
            rsb as isize,
            csb as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            rsc as isize,
            csc as isize,
        );
    }
}

/// Owned product a·b.
pub(crate) fn matmul(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    let (rows, cols) = (a.nrows(), b.ncols());
    let mut out = DMatrix::zeros(rows, cols);
    gemm(
        C::new(1.0, 0.0),
        &a.view((0, 0), a.shape()),
        &b.view((0, 0), b.shape()),
        C::new(0.0, 0.0),
        &mut out.view_mut((0, 0), (rows, cols)),
    );
    out
}
