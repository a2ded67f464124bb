//! Stationary states of a generic sparse Liouvillian.
//!
//! The singular system L·x = 0 is bordered with the trace functional w
//! and the column u = vec(𝟙)/d:
//!
//! ```text
//! [ L   u ] [x]   [0]
//! [ wᵀ  0 ] [λ] = [1]
//! ```
//!
//! Since wᵀL = 0 and wᵀu = 1, any solution has λ = 0 and x is the unit-trace
//! stationary state. The bordered matrix is nonsingular exactly when the
//! stationary state is unique.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::{DensityMatrix, Liouvillian};
use crate::error::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SteadyMethod {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SteadyOptions {
    /// Largest d² solved by sparse LU; larger systems use GMRES.
    pub direct_limit: usize,
    /// Target for ‖L(ρ)‖ / (‖L‖·‖ρ‖).
    pub residual_tol: f64,
    pub gmres_restart: usize,
    pub max_iterations: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            direct_limit: 100_000,
            residual_tol: 1e-10,
            gmres_restart: 60,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub rho: DensityMatrix,
    pub method: SteadyMethod,
    pub residual: f64,
    pub iterations: usize,
}

pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    steady_state_with(l, &SteadyOptions::default()).map(|r| r.rho)
}

pub fn steady_state_with(l: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyReport> {
    let d = l.dim();
    let n = d * d;
    let (x, method, iterations) = if n <= opts.direct_limit {
        (solve_direct(l)?, SteadyMethod::Direct, 0)
    } else {
        let (x, it) = solve_gmres(l, opts)?;
        (x, SteadyMethod::Iterative, it)
    };
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Degenerate(
            "bordered system is singular: the stationary state is not unique".into(),
        ));
    }
    let rho = DensityMatrix::from_matrix(DMatrix::from_vec(d, d, x))?.normalize()?;
    let residual = l.residual_ratio(rho.matrix());
    if !(residual <= opts.residual_tol) {
        return Err(Error::NonConvergence(format!(
            "stationary residual {residual:.2e} above {:.1e}",
            opts.residual_tol
        )));
    }
    // A singular bordered matrix can still yield a finite, stationary but
    // unphysical vector.
    let min = rho.min_eigenvalue();
    if min < -1e-8 {
        return Err(Error::Degenerate(format!(
            "stationary solution has eigenvalue {min:.2e}: the stationary state is not unique"
        )));
    }
    Ok(SteadyReport {
        rho,
        method,
        residual,
        iterations,
    })
}

fn solve_direct(l: &Liouvillian) -> Result<Vec<C>> {
    let d = l.dim();
    let n = d * d;
    let inv_d = C::new(1.0 / d as f64, 0.0);
    let mut trip: Vec<Triplet<usize, usize, C>> = l
        .matrix()
        .triplets()
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    for i in 0..d {
        trip.push(Triplet::new(i + d * i, n, inv_d));
        trip.push(Triplet::new(n, i + d * i, C::new(1.0, 0.0)));
    }
    let a = SparseColMat::<usize, C>::try_new_from_triplets(n + 1, n + 1, &trip)
        .map_err(|e| Error::NonConvergence(format!("sparse assembly failed: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::Degenerate(format!("sparse LU failed ({e:?}): stationary state not unique")))?;
    let mut rhs = Mat::<C>::zeros(n + 1, 1);
    rhs[(n, 0)] = C::new(1.0, 0.0);
    lu.solve_in_place(rhs.as_mut());
    Ok((0..n).map(|k| rhs[(k, 0)]).collect())
}

/// Restarted GMRES on the bordered system with a Jacobi preconditioner
/// applied on the right.
fn solve_gmres(l: &Liouvillian, opts: &SteadyOptions) -> Result<(Vec<C>, usize)> {
    let d = l.dim();
    let n = d * d;
    let inv_d = C::new(1.0 / d as f64, 0.0);
    let diag_idx: Vec<usize> = (0..d).map(|i| i + d * i).collect();
    let op = |x: &[C]| -> Vec<C> {
        let mut y = l.matrix().apply(&x[..n]);
        let lambda = x[n];
        let mut tr = C::new(0.0, 0.0);
        for &k in &diag_idx {
            y[k] += inv_d * lambda;
            tr += x[k];
        }
        y.push(tr);
        y
    };
    let mut precond: Vec<C> = (0..n)
        .map(|k| {
            let v = l.matrix().get(k, k);
            if v.norm() > 1e-12 {
                C::new(1.0, 0.0) / v
            } else {
                C::new(1.0, 0.0)
            }
        })
        .collect();
    precond.push(C::new(1.0, 0.0));
    let scaled = |x: &[C]| -> Vec<C> { x.iter().zip(&precond).map(|(a, b)| a * b).collect() };

    let dot = |a: &[C], b: &[C]| -> C { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let norm = |a: &[C]| -> f64 { a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() };

    let mut b = vec![C::new(0.0, 0.0); n + 1];
    b[n] = C::new(1.0, 0.0);
    // Start from the maximally mixed state.
    let mut x = vec![C::new(0.0, 0.0); n + 1];
    for &k in &diag_idx {
        x[k] = inv_d;
    }
    let m = opts.gmres_restart.max(2);
    let tol = opts.residual_tol * 1e-2;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let ax = op(&x);
        let r: Vec<C> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        if beta <= tol {
            return Ok((x[..n].to_vec(), iterations));
        }
        let mut basis: Vec<Vec<C>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hess = vec![vec![C::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![C::new(0.0, 0.0); m];
        let mut sn = vec![C::new(0.0, 0.0); m];
        let mut g = vec![C::new(0.0, 0.0); m + 1];
        g[0] = C::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            iterations += 1;
            let mut w = op(&scaled(&basis[k]));
            for (i, v) in basis.iter().enumerate() {
                let h = dot(v, &w);
                hess[i][k] = h;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= h * vj;
                }
            }
            let hn = norm(&w);
            hess[k + 1][k] = C::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * hess[i][k] + sn[i].conj() * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let (a0, b0) = (hess[k][k], hess[k + 1][k]);
            let rr = (a0.norm_sqr() + b0.norm_sqr()).sqrt();
            if rr == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = a0 / rr;
            sn[k] = b0 / rr;
            hess[k][k] = C::new(rr, 0.0);
            hess[k + 1][k] = C::new(0.0, 0.0);
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            if g[k + 1].norm() <= tol || hn == 0.0 || iterations >= opts.max_iterations {
                break;
            }
            basis.push(w.iter().map(|z| z / hn).collect());
        }
        let mut y = vec![C::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = vec![C::new(0.0, 0.0); n + 1];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vj) in update.iter_mut().zip(v) {
                *u += yi * vj;
            }
        }
        for (xi, ui) in x.iter_mut().zip(scaled(&update)) {
            *xi += ui;
        }
    }
    Err(Error::NonConvergence(format!(
        "GMRES did not reach the residual target in {} iterations",
        opts.max_iterations
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{ladder, number, HilbertSpec, Mode, OperatorMatrix};
    use crate::lindblad::{build_liouvillian, expectation, Dissipator};

    fn driven_cavity(n: usize, eps: f64, kappa: f64) -> (HilbertSpec, Liouvillian) {
        let spec = HilbertSpec::new(n, 2, 2).unwrap();
        let a = ladder(&spec, Mode::A2);
        let h = a.adjoint().sub(&a).unwrap().scale(C::new(0.0, eps));
        // Spectator modes are damped so the stationary state is unique.
        let spectators = [
            Dissipator::new(ladder(&spec, Mode::BPlus), 0.2),
            Dissipator::new(ladder(&spec, Mode::BMinus), 0.2),
        ];
        let mut diss = vec![Dissipator::new(a, kappa)];
        diss.extend(spectators);
        let l = build_liouvillian(&h, &diss).unwrap();
        (spec, l)
    }

    #[test]
    fn driven_cavity_photon_number() {
        let (spec, l) = driven_cavity(8, 0.0025, 0.05);
        let rho = steady_state(&l).unwrap();
        rho.check().unwrap();
        let n = expectation(&rho, &number(&spec, Mode::A2)).unwrap();
        assert!((n.re - 4.0 * 0.0025f64.powi(2) / 0.05f64.powi(2)).abs() < 1e-10);
        let a = expectation(&rho, &ladder(&spec, Mode::A2)).unwrap();
        assert!((a.norm() - 2.0 * 0.0025 / 0.05).abs() < 1e-10);
    }

    #[test]
    fn thermal_detailed_balance() {
        let spec = HilbertSpec::new(2, 2, 9).unwrap();
        let b = ladder(&spec, Mode::BMinus);
        let nbar = 0.4;
        let l = build_liouvillian(
            &OperatorMatrix::zeros(spec.dim()),
            &[
                Dissipator::new(b.clone(), 0.1 * (nbar + 1.0)),
                Dissipator::new(b.adjoint(), 0.1 * nbar),
                Dissipator::new(ladder(&spec, Mode::A2), 0.1),
                Dissipator::new(ladder(&spec, Mode::BPlus), 0.1),
            ],
        )
        .unwrap();
        let rho = steady_state(&l).unwrap();
        let q = nbar / (nbar + 1.0);
        let z: f64 = (0..9).map(|m| q.powi(m)).sum();
        for m in 0..9 {
            let p = rho.matrix()[(m, m)].re;
            assert!((p - q.powi(m as i32) / z).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_detected() {
        let spec = HilbertSpec::new(3, 2, 2).unwrap();
        let l = build_liouvillian(
            &number(&spec, Mode::A2),
            &[Dissipator::new(ladder(&spec, Mode::A2), 0.5)],
        )
        .unwrap();
        assert!(matches!(steady_state(&l), Err(Error::Degenerate(_))));
        assert!(matches!(steady_state(&l), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gmres_agrees_with_direct() {
        let (_, l) = driven_cavity(6, 0.01, 0.1);
        let direct = steady_state(&l).unwrap();
        let opts = SteadyOptions {
            direct_limit: 0,
            ..Default::default()
        };
        let it = steady_state_with(&l, &opts).unwrap();
        assert_eq!(it.method, SteadyMethod::Iterative);
        let diff = (direct.matrix() - it.rho.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }
}
