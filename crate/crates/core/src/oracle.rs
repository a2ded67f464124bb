//! Brute-force reference computations.
//!
//! Nothing here calls the closed-form paths in [`crate::model`] or the
//! sparse solvers in [`crate::lindblad`]; results from those modules are
//! only ever compared against the values computed here.

use faer::{Mat, Side};
use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpec, OperatorMatrix};
use crate::lindblad::DensityMatrix;

type C = Complex64;

/// Normal modes of the linearized a₁–b sector found numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymplecticEigen {
    pub omega_minus: f64,
    pub omega_plus: f64,
    /// M with (a₁, a₁†, b, b†)ᵀ = M·(B₋, B₋†, B₊, B₊†)ᵀ, sign-canonical.
    pub transform: [[f64; 4]; 4],
}

/// Colpa diagonalization of H = Δ₁a†a + ω_m b†b + G₁(a + a†)(b + b†).
///
/// In the ordering α = (a, b, a†, b†) the Hamiltonian is ½α†𝐇α with
/// 𝐇 = [[A, B], [B, A]]. With 𝐇 = KᵀK and K·η·Kᵀ = U·L·Uᵀ, the
/// paraunitary T = K⁻¹·U·|L|^{1/2} maps normal modes to α = T·β.
pub fn symplectic_eigen(delta1: f64, omega_m: f64, g1: f64) -> Result<SymplecticEigen> {
    let h = Matrix4::new(
        delta1, g1, 0.0, g1, //
        g1, omega_m, g1, 0.0, //
        0.0, g1, delta1, g1, //
        g1, 0.0, g1, omega_m,
    );
    let unstable = || Error::NotPositive(format!("Δ₁ = {delta1}, ω_m = {omega_m}, G₁ = {g1}"));
    let chol = h.cholesky().ok_or_else(unstable)?;
    // cholesky gives H = L·Lᵀ, so K = Lᵀ.
    let k = chol.l().transpose();
    let eta = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, -1.0, -1.0));
    let w = k * eta * k.transpose();
    let eig = SymmetricEigen::new(w);
    let mut pos: Vec<(f64, usize)> = (0..4)
        .filter(|&i| eig.eigenvalues[i] > 0.0)
        .map(|i| (eig.eigenvalues[i], i))
        .collect();
    if pos.len() != 2 {
        return Err(unstable());
    }
    pos.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k_inv = k.try_inverse().ok_or_else(unstable)?;

    // Columns of T for the annihilators, ω₋ first; partners swap halves.
    let mut t = Matrix4::<f64>::zeros();
    for (slot, &(lambda, idx)) in pos.iter().enumerate() {
        let col = k_inv * eig.eigenvectors.column(idx) * lambda.sqrt();
        for r in 0..4 {
            t[(r, slot)] = col[r];
            t[((r + 2) % 4, slot + 2)] = col[r];
        }
    }
    // Reorder into the (a₁, a₁†, b, b†) × (B₋, B₋†, B₊, B₊†) layout.
    let rows = [0, 2, 1, 3];
    let cols = [0, 2, 1, 3];
    let mut m = [[0.0; 4]; 4];
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            m[i][j] = t[(r, c)];
        }
    }
    Ok(SymplecticEigen {
        omega_minus: pos[0].0,
        omega_plus: pos[1].0,
        transform: canonicalize(m),
    })
}

/// Fixes the sign of each mode (column pair) so that its first entry
/// above 1e−12 in magnitude is positive.
pub fn canonicalize(mut m: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
    for pair in [0usize, 2] {
        let first = (0..2)
            .flat_map(|dc| (0..4).map(move |r| (r, pair + dc)))
            .map(|(r, c)| m[r][c])
            .find(|v| v.abs() > 1e-12);
        if matches!(first, Some(v) if v < 0.0) {
            for row in m.iter_mut() {
                row[pair] = -row[pair];
                row[pair + 1] = -row[pair + 1];
            }
        }
    }
    m
}

/// Stationary state by dense null-space computation.
///
/// The superoperator is built densely in row-major vectorization,
/// vec(A·X·B) = (A ⊗ Bᵀ)·vec(X), and its null space is read off a
/// column-pivoted QR factorization.
pub fn dense_steady_state(h: &OperatorMatrix, dissipators: &[(OperatorMatrix, f64)]) -> Result<DensityMatrix> {
    let d = h.dim();
    if d > 64 {
        return Err(Error::Dimension(format!("dense oracle limited to dimension 64, got {d}")));
    }
    for (op, _) in dissipators {
        if op.dim() != d {
            return Err(Error::Dimension(format!("operator {} vs Hamiltonian {d}", op.dim())));
        }
    }
    let n = d * d;
    let hd = h.to_dense();
    let mut l = Mat::<C>::zeros(n, n);
    let idx = |i: usize, j: usize| i * d + j;
    let mi = C::new(0.0, -1.0);
    // −i(H⊗𝟙 − 𝟙⊗Hᵀ)
    for i in 0..d {
        for k in 0..d {
            let v = hd[(i, k)];
            if v == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                l[(idx(i, j), idx(k, j))] += mi * v;
                // (ρH)_{jk} = Σ_i ρ_{ji} H_{ik}
                l[(idx(j, k), idx(j, i))] -= mi * v;
            }
        }
    }
    for (op, rate) in dissipators {
        let c = op.to_dense();
        let cdc = c.adjoint() * &c;
        let r = C::new(*rate, 0.0);
        for i in 0..d {
            for k in 0..d {
                let a = c[(i, k)];
                if a != C::new(0.0, 0.0) {
                    for j in 0..d {
                        for m in 0..d {
                            // (cρc†)_{ij} = Σ c_{ik} ρ_{km} conj(c_{jm})
                            let b = c[(j, m)].conj();
                            if b != C::new(0.0, 0.0) {
                                l[(idx(i, j), idx(k, m))] += r * a * b;
                            }
                        }
                    }
                }
                let e = cdc[(i, k)] * 0.5;
                if e != C::new(0.0, 0.0) {
                    for j in 0..d {
                        l[(idx(i, j), idx(k, j))] -= r * e;
                        l[(idx(j, k), idx(j, i))] -= r * e;
                    }
                }
            }
        }
    }
    let qr = l.col_piv_qr();
    let rf = qr.R();
    let top = rf[(0, 0)].norm();
    if top == 0.0 {
        return Err(Error::Degenerate("zero superoperator".into()));
    }
    let rank = (0..n).filter(|&i| rf[(i, i)].norm() > 1e-10 * top).count();
    if rank != n - 1 {
        return Err(Error::Degenerate(format!(
            "null space of dimension {} (expected 1)",
            n - rank
        )));
    }
    // A·P = Q·R with R = [R₁₁ r; 0 0]: y = [−R₁₁⁻¹r; 1] in permuted order.
    let r = n - 1;
    let mut y = vec![C::new(0.0, 0.0); n];
    y[r] = C::new(1.0, 0.0);
    for i in (0..r).rev() {
        let mut acc = -rf[(i, r)];
        for j in i + 1..r {
            acc -= rf[(i, j)] * y[j];
        }
        y[i] = acc / rf[(i, i)];
    }
    let (fwd, _) = qr.P().arrays();
    let mut x = vec![C::new(0.0, 0.0); n];
    for (pos, &orig) in fwd.iter().enumerate() {
        x[orig] = y[pos];
    }
    let mut rho = nalgebra::DMatrix::<C>::from_fn(d, d, |i, j| x[idx(i, j)]);
    let tr = rho.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::Degenerate("null vector is traceless".into()));
    }
    rho /= tr;
    let rho = (&rho + rho.adjoint()) * C::new(0.5, 0.0);
    DensityMatrix::from_matrix(rho)
}

/// Sorted eigenvalues of the photon-number-`n` block of a
/// number-conserving Hamiltonian.
pub fn block_spectrum(h: &OperatorMatrix, spec: &HilbertSpec, n: usize) -> Result<Vec<f64>> {
    if h.dim() != spec.dim() {
        return Err(Error::Dimension(format!("operator {} vs space {}", h.dim(), spec.dim())));
    }
    if n >= spec.n_cav {
        return Err(Error::InvalidParam(format!(
            "photon block {n} outside cutoff {}",
            spec.n_cav
        )));
    }
    let len = spec.block_dim();
    let block = h.block(n * len, len);
    let m = Mat::<C>::from_fn(len, len, |i, j| block[(i, j)]);
    let mut vals: Vec<f64> = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NonConvergence(format!("block eigenvalues: {e:?}")))?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{ladder, number, Mode};

    #[test]
    fn decoupled_modes_are_identity() {
        let s = symplectic_eigen(2.0, 1.0, 0.0).unwrap();
        assert!((s.omega_minus - 1.0).abs() < 1e-14);
        assert!((s.omega_plus - 2.0).abs() < 1e-14);
        // B₋ is the phonon, B₊ the photon.
        let m = s.transform;
        assert!((m[2][0] - 1.0).abs() < 1e-14 && (m[3][1] - 1.0).abs() < 1e-14);
        assert!((m[0][2] - 1.0).abs() < 1e-14 && (m[1][3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn transform_is_paraunitary() {
        let s = symplectic_eigen(1.5, 1.0, 0.3).unwrap();
        let m = s.transform;
        // [a, a†] = 1 and [b, b†] = 1 in terms of the normal modes.
        let comm = |r: usize, rd: usize| m[r][0] * m[rd][1] - m[r][1] * m[rd][0] + m[r][2] * m[rd][3] - m[r][3] * m[rd][2];
        assert!((comm(0, 1) - 1.0).abs() < 1e-12);
        assert!((comm(2, 3) - 1.0).abs() < 1e-12);
        assert!(comm(0, 3).abs() < 1e-12);
    }

    #[test]
    fn unstable_form_rejected() {
        assert!(matches!(
            symplectic_eigen(1.3, 1.0, 0.6),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn dense_driven_cavity() {
        let spec = HilbertSpec::new(6, 2, 2).unwrap();
        let a = ladder(&spec, Mode::A2);
        let (eps, kappa) = (0.01, 0.2);
        let h = a.adjoint().sub(&a).unwrap().scale(C::new(0.0, eps));
        let rho = dense_steady_state(
            &h,
            &[
                (a, kappa),
                (ladder(&spec, Mode::BPlus), 0.1),
                (ladder(&spec, Mode::BMinus), 0.1),
            ],
        )
        .unwrap();
        let n = (rho.matrix() * number(&spec, Mode::A2).to_dense()).trace().re;
        assert!((n - 4.0 * eps * eps / (kappa * kappa)).abs() < 1e-10, "{n}");
    }

    #[test]
    fn dense_degenerate_detected() {
        let spec = HilbertSpec::new(2, 2, 2).unwrap();
        let h = number(&spec, Mode::A2);
        let err = dense_steady_state(&h, &[(ladder(&spec, Mode::A2), 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn vacuum_block_spectrum() {
        let spec = HilbertSpec::new(2, 3, 3).unwrap();
        let h = number(&spec, Mode::BPlus).add(&number(&spec, Mode::BMinus).scale(C::new(0.5, 0.0))).unwrap();
        let vals = block_spectrum(&h, &spec, 0).unwrap();
        assert_eq!(vals.len(), 9);
        assert!(vals[0].abs() < 1e-14 && (vals[1] - 0.5).abs() < 1e-14);
    }
}
