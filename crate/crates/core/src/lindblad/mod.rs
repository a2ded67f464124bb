//! Lindblad dynamics on the truncated three-mode space.
//!
//! Density matrices are vectorized by column stacking, so
//! vec(A·X·B) = (Bᵀ ⊗ A)·vec(X) and nalgebra's column-major storage is the
//! vectorized state without copying.

pub(crate) mod dense;
mod evolve;
pub mod sector;
mod shifted;
mod steady;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{displaced_lowering, ladder, number, HilbertSpec, Mode, OperatorMatrix};
use crate::model::PolaritonBasis;

pub use evolve::{evolve, EvolveOptions};
pub use sector::{Frame, SectorOptions, SectorSolver, SectorState};
pub use steady::{steady_state, steady_state_with, SteadyMethod, SteadyOptions, SteadyReport};

type C = Complex64;

/// Collapse operator with its rate.
#[derive(Debug, Clone)]
pub struct Dissipator {
    pub op: OperatorMatrix,
    pub rate: f64,
}

impl Dissipator {
    pub fn new(op: OperatorMatrix, rate: f64) -> Self {
        Self { op, rate }
    }
}

/// Sparse superoperator ρ ↦ −i[H,ρ] + Σ_k r_k·D[o_k]ρ.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    matrix: OperatorMatrix,
}

impl Liouvillian {
    /// Dimension d of the density matrix.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The d²×d² matrix.
    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let out = self.matrix.apply(rho.as_slice());
        DMatrix::from_vec(self.dim, self.dim, out)
    }

    pub fn norm_inf(&self) -> f64 {
        self.matrix.norm_inf()
    }

    /// ‖L†(𝟙)‖_max; zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut acc = vec![C::new(0.0, 0.0); d * d];
        for i in 0..d {
            for (k, v) in self.matrix.row(i + d * i) {
                acc[k] += v;
            }
        }
        acc.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ‖L(ρ)‖_max / (‖L‖_∞·‖ρ‖_max).
    pub fn residual_ratio(&self, rho: &DMatrix<C>) -> f64 {
        let r = self.apply(rho);
        let num = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let den = self.norm_inf() * rho.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

pub fn build_liouvillian(h: &OperatorMatrix, dissipators: &[Dissipator]) -> Result<Liouvillian> {
    let d = h.dim();
    for (k, diss) in dissipators.iter().enumerate() {
        if diss.op.dim() != d {
            return Err(Error::Dimension(format!(
                "dissipator {k} has dimension {}, Hamiltonian {d}",
                diss.op.dim()
            )));
        }
        if !(diss.rate >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "dissipator {k} has negative rate {}",
                diss.rate
            )));
        }
    }
    let mut trip: Vec<(usize, usize, C)> = Vec::new();
    let minus_i = C::new(0.0, -1.0);
    // 𝟙⊗A and Aᵀ⊗𝟙 with coefficients.
    let left = |a: &OperatorMatrix, s: C, trip: &mut Vec<(usize, usize, C)>| {
        for j in 0..d {
            for (i, k, v) in a.triplets() {
                trip.push((j * d + i, j * d + k, s * v));
            }
        }
    };
    left(h, minus_i, &mut trip);
    let right = |a: &OperatorMatrix, s: C, trip: &mut Vec<(usize, usize, C)>| {
        for (l, j, v) in a.triplets() {
            for i in 0..d {
                trip.push((j * d + i, l * d + i, s * v));
            }
        }
    };
    right(h, -minus_i, &mut trip);
    for diss in dissipators {
        if diss.rate == 0.0 {
            continue;
        }
        let c = &diss.op;
        let r = C::new(diss.rate, 0.0);
        for (j, l, cv) in c.triplets() {
            for (i, k, v) in c.triplets() {
                trip.push((j * d + i, l * d + k, r * cv.conj() * v));
            }
        }
        let cdc = c.adjoint().mul(c)?;
        left(&cdc, -0.5 * r, &mut trip);
        right(&cdc, -0.5 * r, &mut trip);
    }
    Ok(Liouvillian {
        dim: d,
        matrix: OperatorMatrix::from_triplets(d * d, trip),
    })
}

/// The five channels of the polariton-frame master equation:
/// κD[a₂], κ₋(n̄₋+1)D[B₋], κ₋n̄₋D[B₋†], κ₊(n̄₊+1)D[B₊], κ₊n̄₊D[B₊†].
pub fn oms_dissipators(basis: &PolaritonBasis, kappa: f64, spec: &HilbertSpec) -> Vec<Dissipator> {
    let a = ladder(spec, Mode::A2);
    let bm = ladder(spec, Mode::BMinus);
    let bp = ladder(spec, Mode::BPlus);
    vec![
        Dissipator::new(a, kappa),
        Dissipator::new(bm.clone(), basis.kappa_minus * (basis.n_minus + 1.0)),
        Dissipator::new(bm.adjoint(), basis.kappa_minus * basis.n_minus),
        Dissipator::new(bp.clone(), basis.kappa_plus * (basis.n_plus + 1.0)),
        Dissipator::new(bp.adjoint(), basis.kappa_plus * basis.n_plus),
    ]
}

/// The same channels after the polaron transform: κD[a₂U] and
/// D[B_σ + n·g_σ/ω_σ], D[B_σ† + n·g_σ/ω_σ] at the rates above.
pub fn polaron_dissipators(basis: &PolaritonBasis, kappa: f64, spec: &HilbertSpec) -> Vec<Dissipator> {
    let n = number(spec, Mode::A2);
    let shifted = |mode: Mode, d: f64| {
        let b = ladder(spec, mode);
        let shift = n.scale(C::new(d, 0.0));
        (
            b.add(&shift).expect("same space"),
            b.adjoint().add(&shift).expect("same space"),
        )
    };
    let (bm, bm_up) = shifted(Mode::BMinus, basis.g_minus / basis.omega_minus);
    let (bp, bp_up) = shifted(Mode::BPlus, basis.g_plus / basis.omega_plus);
    vec![
        Dissipator::new(displaced_lowering(basis, spec), kappa),
        Dissipator::new(bm, basis.kappa_minus * (basis.n_minus + 1.0)),
        Dissipator::new(bm_up, basis.kappa_minus * basis.n_minus),
        Dissipator::new(bp, basis.kappa_plus * (basis.n_plus + 1.0)),
        Dissipator::new(bp_up, basis.kappa_plus * basis.n_plus),
    ]
}

/// Dense complex density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: DMatrix<C>,
}

impl DensityMatrix {
    pub fn from_matrix(data: DMatrix<C>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::Dimension(format!(
                "density matrix must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { data })
    }

    /// |idx⟩⟨idx|
    pub fn basis_state(dim: usize, idx: usize) -> Self {
        let mut data = DMatrix::zeros(dim, dim);
        data[(idx, idx)] = C::new(1.0, 0.0);
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C> {
        self.data
    }

    pub fn trace(&self) -> C {
        self.data.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.data + self.data.adjoint()) * C::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian, unit trace, positive semidefinite (to 1e−10, 1e−8, −1e−8).
    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::NonConvergence(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        let tr = self.trace();
        if (tr - C::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(Error::NonConvergence(format!("density matrix trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::NonConvergence(format!(
                "density matrix has negative eigenvalue {min:.2e}"
            )));
        }
        Ok(())
    }

    /// Replaces ρ by (ρ + ρ†)/2 scaled to unit trace.
    pub(crate) fn normalize(mut self) -> Result<Self> {
        self.data = (&self.data + self.data.adjoint()) * C::new(0.5, 0.0);
        let tr = self.data.trace();
        if !(tr.re.is_finite() && tr.norm() > 0.0) {
            return Err(Error::Degenerate(format!("stationary vector has trace {tr}")));
        }
        self.data /= tr;
        Ok(self)
    }
}

/// tr(O·ρ)
pub fn expectation(rho: &DensityMatrix, op: &OperatorMatrix) -> Result<C> {
    if rho.dim() != op.dim() {
        return Err(Error::Dimension(format!(
            "state {} vs operator {}",
            rho.dim(),
            op.dim()
        )));
    }
    let m = rho.matrix();
    Ok(op.triplets().map(|(r, c, v)| v * m[(c, r)]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::number;

    fn cavity(n: usize) -> (HilbertSpec, OperatorMatrix) {
        let spec = HilbertSpec::new(n, 2, 2).unwrap();
        let a = ladder(&spec, Mode::A2);
        (spec, a)
    }

    #[test]
    fn trace_preserving() {
        let (spec, a) = cavity(4);
        let h = number(&spec, Mode::A2).add(&a.add(&a.adjoint()).unwrap()).unwrap();
        let l = build_liouvillian(&h, &[Dissipator::new(a.clone(), 0.3), Dissipator::new(a.adjoint(), 0.1)]).unwrap();
        assert!(l.trace_defect() < 1e-14);
    }

    #[test]
    fn vacuum_stationary_under_decay() {
        let (spec, a) = cavity(3);
        let h = OperatorMatrix::zeros(spec.dim());
        let l = build_liouvillian(&h, &[Dissipator::new(a, 1.0)]).unwrap();
        let vac = DensityMatrix::basis_state(spec.dim(), 0);
        assert_eq!(l.apply(vac.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let (_, a) = cavity(3);
        let (_, b) = cavity(4);
        assert!(matches!(
            build_liouvillian(&a, &[Dissipator::new(b, 1.0)]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn superoperator_matches_dense_formula() {
        let (spec, a) = cavity(3);
        let h = a.add(&a.adjoint()).unwrap().scale(C::new(0.7, 0.0)).add(&number(&spec, Mode::BPlus)).unwrap();
        let l = build_liouvillian(&h, &[Dissipator::new(a.clone(), 0.4)]).unwrap();
        let d = spec.dim();
        let rho = DMatrix::from_fn(d, d, |i, j| C::new((i * 7 + j) as f64 * 0.01, (i as f64 - j as f64) * 0.02));
        let hd = h.to_dense();
        let ad = a.to_dense();
        let adag = ad.adjoint();
        let want = (&hd * &rho - &rho * &hd) * C::new(0.0, -1.0)
            + (&ad * &rho * &adag - (&adag * &ad * &rho + &rho * &adag * &ad) * C::new(0.5, 0.0)) * C::new(0.4, 0.0);
        let got = l.apply(&rho);
        assert!((got - want).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn expectation_examples() {
        let (spec, _) = cavity(3);
        let n = number(&spec, Mode::A2);
        let vac = DensityMatrix::basis_state(spec.dim(), 0);
        assert_eq!(expectation(&vac, &n).unwrap(), C::new(0.0, 0.0));
        let one = DensityMatrix::basis_state(spec.dim(), spec.index(1, 0, 0));
        assert_eq!(expectation(&one, &n).unwrap(), C::new(1.0, 0.0));
        let other = HilbertSpec::new(2, 2, 2).unwrap();
        assert!(expectation(&vac, &number(&other, Mode::A2)).is_err());
    }
}
