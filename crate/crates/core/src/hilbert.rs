//! Truncated Fock space of the three simulated modes (a₂, B₊, B₋) and
//! sparse operators acting on it.
//!
//! Basis states |n, m₊, m₋⟩ are stored with a₂ slowest and B₋ fastest,
//! so each photon-number block is a contiguous index range.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PolaritonBasis;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpec {
    pub n_cav: usize,
    pub n_plus: usize,
    pub n_minus: usize,
}

impl HilbertSpec {
    pub fn new(n_cav: usize, n_plus: usize, n_minus: usize) -> Result<Self> {
        let spec = Self {
            n_cav,
            n_plus,
            n_minus,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cav < 2 || self.n_plus < 2 || self.n_minus < 2 {
            return Err(Error::InvalidParam(format!(
                "every cutoff must be ≥ 2, got ({}, {}, {})",
                self.n_cav, self.n_plus, self.n_minus
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_cav * self.n_plus * self.n_minus
    }

    /// Dimension of one photon-number block.
    pub fn block_dim(&self) -> usize {
        self.n_plus * self.n_minus
    }

    pub fn index(&self, n: usize, m_plus: usize, m_minus: usize) -> usize {
        (n * self.n_plus + m_plus) * self.n_minus + m_minus
    }

    pub fn occupations(&self, idx: usize) -> (usize, usize, usize) {
        let m_minus = idx % self.n_minus;
        let rest = idx / self.n_minus;
        (rest / self.n_plus, rest % self.n_plus, m_minus)
    }

    pub fn cutoff(&self, mode: Mode) -> usize {
        match mode {
            Mode::A2 => self.n_cav,
            Mode::BPlus => self.n_plus,
            Mode::BMinus => self.n_minus,
        }
    }

    /// Every cutoff increased by `k`.
    pub fn grown(&self, k: usize) -> Self {
        Self {
            n_cav: self.n_cav + k,
            n_plus: self.n_plus + k,
            n_minus: self.n_minus + k,
        }
    }
}

impl fmt::Display for HilbertSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.n_cav, self.n_plus, self.n_minus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    A2,
    BPlus,
    BMinus,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a2" | "a₂" => Ok(Mode::A2),
            "B+" | "B₊" | "b_plus" => Ok(Mode::BPlus),
            "B-" | "B₋" | "b_minus" => Ok(Mode::BMinus),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// Sparse complex matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C::new(1.0, 0.0))))
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C)>) -> Self {
        let mut trip: Vec<(usize, usize, C)> = triplets.into_iter().collect();
        for &(r, c, _) in &trip {
            assert!(r < dim && c < dim, "triplet ({r},{c}) outside dimension {dim}");
        }
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let zero = C::new(0.0, 0.0);
        let mut merged: Vec<(usize, usize, C)> = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (r, c) => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != zero);
        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            cols: merged.iter().map(|t| t.1).collect(),
            vals: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    /// Nonzeros of one row as (column, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn get(&self, row: usize, col: usize) -> C {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[span.clone()].binary_search(&col) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => C::new(0.0, 0.0),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, v * s)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self::from_triplets(self.dim, self.triplets().chain(other.triplets())))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self::from_triplets(
            self.dim,
            self.triplets()
                .chain(other.triplets().map(|(r, c, v)| (r, c, -v))),
        ))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut trip = Vec::new();
        for (r, k, a) in self.triplets() {
            for j in other.row_ptr[k]..other.row_ptr[k + 1] {
                trip.push((r, other.cols[j], a * other.vals[j]));
            }
        }
        Ok(Self::from_triplets(self.dim, trip))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// y = A·x
    pub fn apply(&self, x: &[C]) -> Vec<C> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max |H − H†| over all elements.
    pub fn hermiticity_error(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }

    /// Restriction to a contiguous index range.
    pub fn block(&self, start: usize, len: usize) -> DMatrix<C> {
        let mut m = DMatrix::zeros(len, len);
        for r in start..start + len {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                if c >= start && c < start + len {
                    m[(r - start, c - start)] = self.vals[k];
                }
            }
        }
        m
    }

    /// Coordinate-list dump, one `row col re im` line per nonzero.
    pub fn write_coo(&self, mut w: impl Write) -> std::io::Result<()> {
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("{} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }
}

/// Annihilation operator of `mode`, embedded with identities on the others.
pub fn ladder(spec: &HilbertSpec, mode: Mode) -> OperatorMatrix {
    let dim = spec.dim();
    let mut trip = Vec::new();
    for idx in 0..dim {
        let (n, p, m) = spec.occupations(idx);
        let (level, lowered) = match mode {
            Mode::A2 if n > 0 => (n, spec.index(n - 1, p, m)),
            Mode::BPlus if p > 0 => (p, spec.index(n, p - 1, m)),
            Mode::BMinus if m > 0 => (m, spec.index(n, p, m - 1)),
            _ => continue,
        };
        trip.push((lowered, idx, C::new((level as f64).sqrt(), 0.0)));
    }
    OperatorMatrix::from_triplets(dim, trip)
}

/// `ladder` with the mode given by name.
pub fn ladder_named(spec: &HilbertSpec, mode: &str) -> Result<OperatorMatrix> {
    Ok(ladder(spec, mode.parse()?))
}

/// a†a for `mode`.
pub fn number(spec: &HilbertSpec, mode: Mode) -> OperatorMatrix {
    let dim = spec.dim();
    OperatorMatrix::from_triplets(
        dim,
        (0..dim).map(|idx| {
            let (n, p, m) = spec.occupations(idx);
            let k = match mode {
                Mode::A2 => n,
                Mode::BPlus => p,
                Mode::BMinus => m,
            };
            (idx, idx, C::new(k as f64, 0.0))
        }),
    )
}

/// Δ₂a₂†a₂ + ω₊B₊†B₊ + ω₋B₋†B₋ − a₂†a₂·[g₊(B₊+B₊†) + g₋(B₋+B₋†)].
pub fn build_h_oms(basis: &PolaritonBasis, delta2: f64, spec: &HilbertSpec) -> OperatorMatrix {
    build_h_probe(basis, delta2, 0.0, spec)
}

/// The number-conserving Hamiltonian at probe detuning Δ₂′ plus the probe
/// drive iε(a₂† − a₂).
pub fn build_h_probe(
    basis: &PolaritonBasis,
    delta2_probe: f64,
    epsilon: f64,
    spec: &HilbertSpec,
) -> OperatorMatrix {
    let dim = spec.dim();
    let mut trip = Vec::with_capacity(5 * dim);
    for idx in 0..dim {
        let (n, p, m) = spec.occupations(idx);
        let nf = n as f64;
        let diag = nf * delta2_probe + p as f64 * basis.omega_plus + m as f64 * basis.omega_minus;
        trip.push((idx, idx, C::new(diag, 0.0)));
        if p + 1 < spec.n_plus && n > 0 {
            let v = C::new(-basis.g_plus * nf * ((p + 1) as f64).sqrt(), 0.0);
            let up = spec.index(n, p + 1, m);
            trip.push((up, idx, v));
            trip.push((idx, up, v));
        }
        if m + 1 < spec.n_minus && n > 0 {
            let v = C::new(-basis.g_minus * nf * ((m + 1) as f64).sqrt(), 0.0);
            let up = spec.index(n, p, m + 1);
            trip.push((up, idx, v));
            trip.push((idx, up, v));
        }
        if n + 1 < spec.n_cav && epsilon != 0.0 {
            let s = epsilon * ((n + 1) as f64).sqrt();
            let up = spec.index(n + 1, p, m);
            trip.push((up, idx, C::new(0.0, s)));
            trip.push((idx, up, C::new(0.0, -s)));
        }
    }
    OperatorMatrix::from_triplets(dim, trip)
}

/// exp[d(B† − B)] on the first `levels` Fock states. The exponential is
/// taken inside the truncated space, so the result is exactly orthogonal.
pub fn displacement(levels: usize, d: f64) -> DMatrix<f64> {
    let mut x = DMatrix::<f64>::zeros(levels, levels);
    for m in 1..levels {
        let s = d * (m as f64).sqrt();
        x[(m, m - 1)] = s;
        x[(m - 1, m)] = -s;
    }
    x.exp()
}

/// The probe Hamiltonian after the polaron transform
/// exp[−a₂†a₂·Σ_σ (g_σ/ω_σ)(B_σ† − B_σ)]:
///
/// Δ₂′n + Σ_σ ω_σB_σ†B_σ − χn² + iε(a₂†·U† − a₂·U),  χ = Σ_σ g_σ²/ω_σ,
///
/// with U = U₊ ⊗ U₋ the displacement by g_σ/ω_σ.
pub fn build_h_polaron(
    basis: &PolaritonBasis,
    delta2_probe: f64,
    epsilon: f64,
    spec: &HilbertSpec,
) -> OperatorMatrix {
    let dim = spec.dim();
    let chi = basis.kerr_shift();
    let mut trip = Vec::with_capacity(dim);
    for idx in 0..dim {
        let (n, p, m) = spec.occupations(idx);
        let nf = n as f64;
        let diag = nf * delta2_probe + p as f64 * basis.omega_plus + m as f64 * basis.omega_minus - chi * nf * nf;
        trip.push((idx, idx, C::new(diag, 0.0)));
    }
    if epsilon != 0.0 {
        for (row, col, v) in displaced_lowering(basis, spec).triplets() {
            // −iε·a₂U and its adjoint +iε·a₂†U†.
            trip.push((row, col, C::new(0.0, -epsilon) * v));
            trip.push((col, row, C::new(0.0, epsilon) * v.conj()));
        }
    }
    OperatorMatrix::from_triplets(dim, trip)
}

/// a₂ ⊗ U₊(g₊/ω₊) ⊗ U₋(g₋/ω₋): photon loss seen in the polaron frame.
pub fn displaced_lowering(basis: &PolaritonBasis, spec: &HilbertSpec) -> OperatorMatrix {
    let up = displacement(spec.n_plus, basis.g_plus / basis.omega_plus);
    let um = displacement(spec.n_minus, basis.g_minus / basis.omega_minus);
    let mut trip = Vec::new();
    for n in 0..spec.n_cav.saturating_sub(1) {
        let s = ((n + 1) as f64).sqrt();
        for p in 0..spec.n_plus {
            for pp in 0..spec.n_plus {
                for m in 0..spec.n_minus {
                    for mp in 0..spec.n_minus {
                        let v = s * up[(p, pp)] * um[(m, mp)];
                        if v != 0.0 {
                            trip.push((spec.index(n, p, m), spec.index(n + 1, pp, mp), C::new(v, 0.0)));
                        }
                    }
                }
            }
        }
    }
    OperatorMatrix::from_triplets(spec.dim(), trip)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(g_minus: f64, g_plus: f64) -> PolaritonBasis {
        let factors = crate::model::bogoliubov_factors(1.5, 1.0, 0.5, 1.6, 1.0);
        PolaritonBasis {
            omega_minus: 0.5,
            omega_plus: 1.6,
            theta: 1.0,
            g_minus,
            g_plus,
            kappa_minus: 0.01,
            kappa_plus: 0.03,
            n_minus: 0.3,
            n_plus: 0.01,
            factors,
        }
    }

    #[test]
    fn displacement_is_orthogonal_and_shifts_vacuum() {
        let u = displacement(40, 1.3);
        let err = (u.transpose() * &u - DMatrix::<f64>::identity(40, 40)).amax();
        assert!(err < 1e-12, "{err}");
        // D(α)|0⟩ is coherent: amplitudes e^{−α²/2}αᵏ/√k!.
        let mut amp = (-1.3f64 * 1.3 / 2.0).exp();
        for k in 0..10 {
            assert!((u[(k, 0)] - amp).abs() < 1e-10, "k={k}");
            amp *= 1.3 / ((k + 1) as f64).sqrt();
        }
    }

    #[test]
    fn polaron_hamiltonian_is_hermitian() {
        let spec = HilbertSpec::new(3, 3, 4).unwrap();
        let h = build_h_polaron(&basis(-0.2, 0.05), 0.3, 0.01, &spec);
        assert!(h.hermiticity_error() < 1e-15);
    }

    #[test]
    fn two_level_ladder() {
        let spec = HilbertSpec::new(2, 2, 2).unwrap();
        let a = ladder(&spec, Mode::A2);
        assert_eq!(a.dim(), 8);
        assert_eq!(a.nnz(), 4);
        assert!(a.triplets().all(|(_, _, v)| v == C::new(1.0, 0.0)));
    }

    #[test]
    fn matrix_element_sqrt3() {
        let spec = HilbertSpec::new(4, 5, 4).unwrap();
        for mode in [Mode::A2, Mode::BPlus, Mode::BMinus] {
            let a = ladder(&spec, mode);
            let (i, j) = match mode {
                Mode::A2 => (spec.index(2, 1, 1), spec.index(3, 1, 1)),
                Mode::BPlus => (spec.index(1, 2, 1), spec.index(1, 3, 1)),
                Mode::BMinus => (spec.index(1, 1, 2), spec.index(1, 1, 3)),
            };
            assert!((a.get(i, j).re - 3f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn unknown_mode() {
        let spec = HilbertSpec::new(2, 2, 2).unwrap();
        assert!(matches!(ladder_named(&spec, "c3"), Err(Error::UnknownMode(_))));
        assert!(ladder_named(&spec, "B-").is_ok());
    }

    #[test]
    fn canonical_commutator_below_cutoff() {
        let spec = HilbertSpec::new(3, 4, 5).unwrap();
        for mode in [Mode::A2, Mode::BPlus, Mode::BMinus] {
            let a = ladder(&spec, mode);
            let comm = a.commutator(&a.adjoint()).unwrap();
            let top = spec.cutoff(mode) - 1;
            for idx in 0..spec.dim() {
                let (n, p, m) = spec.occupations(idx);
                let level = match mode {
                    Mode::A2 => n,
                    Mode::BPlus => p,
                    Mode::BMinus => m,
                };
                if level == top {
                    continue;
                }
                for j in 0..spec.dim() {
                    let want = if j == idx { 1.0 } else { 0.0 };
                    assert!((comm.get(idx, j) - C::new(want, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_matches_operator_algebra() {
        let spec = HilbertSpec::new(3, 4, 4).unwrap();
        let b = basis(-0.36, 0.12);
        let h = build_h_probe(&b, 0.3, 0.0025, &spec);
        let a = ladder(&spec, Mode::A2);
        let bp = ladder(&spec, Mode::BPlus);
        let bm = ladder(&spec, Mode::BMinus);
        let na = number(&spec, Mode::A2);
        let real = |x: f64| C::new(x, 0.0);
        let xp = bp.add(&bp.adjoint()).unwrap();
        let xm = bm.add(&bm.adjoint()).unwrap();
        let mut want = na.scale(real(0.3));
        want = want.add(&number(&spec, Mode::BPlus).scale(real(1.6))).unwrap();
        want = want.add(&number(&spec, Mode::BMinus).scale(real(0.5))).unwrap();
        want = want.sub(&na.mul(&xp).unwrap().scale(real(0.12))).unwrap();
        want = want.sub(&na.mul(&xm).unwrap().scale(real(-0.36))).unwrap();
        let drive = a.adjoint().sub(&a).unwrap().scale(C::new(0.0, 0.0025));
        want = want.add(&drive).unwrap();
        assert!(h.sub(&want).unwrap().max_abs() < 1e-15);
        assert_eq!(h.hermiticity_error(), 0.0);
        assert!((h.get(spec.index(1, 0, 0), 0) - C::new(0.0, 0.0025)).norm() == 0.0);
    }

    #[test]
    fn decoupled_is_diagonal_and_conserves_photons() {
        let spec = HilbertSpec::new(3, 3, 3).unwrap();
        let h = build_h_oms(&basis(0.0, 0.0), 0.7, &spec);
        for (r, c, v) in h.triplets() {
            assert_eq!(r, c);
            let (n, p, m) = spec.occupations(r);
            assert!((v.re - (0.7 * n as f64 + 1.6 * p as f64 + 0.5 * m as f64)).abs() < 1e-15);
        }
        let h = build_h_oms(&basis(-0.3, 0.1), 0.7, &spec);
        let comm = h.commutator(&number(&spec, Mode::A2)).unwrap();
        assert_eq!(comm.max_abs(), 0.0);
    }

    #[test]
    fn zero_drive_equals_oms() {
        let spec = HilbertSpec::new(3, 3, 4).unwrap();
        let b = basis(-0.3, 0.1);
        assert_eq!(build_h_probe(&b, 0.2, 0.0, &spec), build_h_oms(&b, 0.2, &spec));
    }

    #[test]
    fn sparsity_linear_in_dimension() {
        let b = basis(-0.3, 0.1);
        let small = build_h_probe(&b, 0.2, 0.01, &HilbertSpec::new(4, 4, 4).unwrap());
        let large = build_h_probe(&b, 0.2, 0.01, &HilbertSpec::new(4, 8, 8).unwrap());
        let ratio = large.nnz() as f64 / small.nnz() as f64;
        assert!(ratio < 4.5, "nnz ratio {ratio}");
    }

    #[test]
    fn coo_dump_format() {
        let spec = HilbertSpec::new(2, 2, 2).unwrap();
        let mut buf = Vec::new();
        ladder(&spec, Mode::A2).write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let first: Vec<&str> = text.lines().next().unwrap().split(' ').collect();
        assert_eq!(first.len(), 4);
        assert_eq!(first[0], "0");
        assert_eq!(first[1], "4");
    }
}
