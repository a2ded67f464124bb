//! Self-checks: closed forms against the oracles, the sparse solvers
//! against dense null spaces, and truncation convergence.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::hilbert::{build_h_polaron, build_h_probe, HilbertSpec};
use crate::lindblad::{
    build_liouvillian, oms_dissipators, polaron_dissipators, steady_state, Dissipator, Frame, SectorOptions,
    SectorSolver,
};
use crate::model::{
    commutator_identities, critical_g1, derive_shifted, diagonalization_residual, polariton_basis,
    PolaritonBasis, SystemParams, ThetaBranch, RESIDUAL_TOL,
};
use crate::observables::{truncation_convergence, Grid, Observable, ProbeSetup, DEFAULT_CONVERGENCE_THRESHOLD};
use crate::oracle::{canonicalize, dense_steady_state, symplectic_eigen};

type C = Complex64;

pub const COMMUTATOR_TOL: f64 = 1e-12;
pub const FREQUENCY_TOL: f64 = 1e-10;
pub const FACTOR_TOL: f64 = 1e-9;
pub const STEADY_TOL: f64 = 1e-8;

/// (Δ₁, G₁) pairs on an n×n grid over Δ₁ ∈ [1.1, 2.0] and
/// G₁ ∈ (0, 0.9·G₁_c(Δ₁)), both ends of the G₁ range excluded.
pub fn region_grid(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let d1 = if n == 1 { 1.1 } else { 1.1 + 0.9 * i as f64 / (n - 1) as f64 };
        let top = 0.9 * critical_g1(d1, 1.0);
        for j in 1..=n {
            out.push((d1, top * j as f64 / (n + 1) as f64));
        }
    }
    out
}

/// Closed-form basis at the given (Δ₁, G₁), without the residual check.
pub fn basis_at(delta1: f64, g1: f64, branch: ThetaBranch) -> Result<PolaritonBasis> {
    let base = SystemParams::default();
    let p = SystemParams {
        delta1: delta1 + 2.0 * base.g1 * base.beta,
        g1_override: Some(g1),
        ..base
    };
    let shifted = derive_shifted(&p)?;
    polariton_basis(&p, &shifted, branch)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<34} {:.3e} (tol {:.1e})", self.name, self.value, self.tolerance)?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

fn check(name: &str, value: f64, tolerance: f64, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed: value < tolerance,
        value,
        tolerance,
        detail,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub params: SystemParams,
    pub branch: ThetaBranch,
    /// Cutoffs for the convergence check.
    pub spec: HilbertSpec,
    pub epsilon: f64,
    /// Probe grid in units of ω₋ for the convergence check.
    pub grid: Grid,
    /// Side of the (Δ₁, G₁) grid.
    pub region: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        let params = SystemParams::default();
        Self {
            params,
            branch: ThetaBranch::Consistent,
            spec: HilbertSpec::new(5, 8, 8).expect("valid cutoffs"),
            epsilon: params.kappa / 20.0,
            grid: Grid::linspace(-3.0, 2.0, 50),
            region: 20,
        }
    }
}

pub fn closed_form_checks(region: usize, branch: ThetaBranch) -> Result<Vec<Check>> {
    let mut comm: f64 = 0.0;
    let mut resid: (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut freq: f64 = 0.0;
    let mut fac: f64 = 0.0;
    for (d1, g1) in region_grid(region) {
        let b = basis_at(d1, g1, branch)?;
        comm = comm.max(commutator_identities(&b.factors, b.theta).max());
        let r = diagonalization_residual(d1, 1.0, g1, &b);
        if r > resid.0 || r.is_nan() {
            resid = (r, d1, g1);
        }
        let o = symplectic_eigen(d1, 1.0, g1)?;
        freq = freq
            .max(((b.omega_minus - o.omega_minus) / o.omega_minus).abs())
            .max(((b.omega_plus - o.omega_plus) / o.omega_plus).abs());
        let m = canonicalize(b.factors.matrix());
        for (row, orow) in m.iter().zip(&o.transform) {
            for (x, y) in row.iter().zip(orow) {
                fac = fac.max((x - y).abs());
            }
        }
    }
    let n = region * region;
    Ok(vec![
        check("commutator identities", comm, COMMUTATOR_TOL, format!("{n} points")),
        check(
            "diagonalization residual",
            resid.0,
            RESIDUAL_TOL,
            format!("worst at Δ₁={:.3}, G₁={:.3}", resid.1, resid.2),
        ),
        check("frequencies vs symplectic oracle", freq, FREQUENCY_TOL, "relative".into()),
        check("factors vs symplectic oracle", fac, FACTOR_TOL, "after sign canonicalization".into()),
    ])
}

fn max_diff(a: &nalgebra::DMatrix<C>, b: &nalgebra::DMatrix<C>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn pairs(d: Vec<Dissipator>) -> Vec<(crate::hilbert::OperatorMatrix, f64)> {
    d.into_iter().map(|d| (d.op, d.rate)).collect()
}

/// Stationary states from the sector solver (both frames) and the sparse
/// LU solver against dense null spaces of the same truncated generators,
/// on a (3,4,4) space at a few probe detunings.
pub fn steady_state_check(params: &SystemParams, branch: ThetaBranch, epsilon: f64) -> Result<Check> {
    let shifted = derive_shifted(params)?;
    let basis = polariton_basis(params, &shifted, branch)?;
    let spec = HilbertSpec::new(3, 4, 4)?;
    let kappa = params.kappa;
    let bare = SectorSolver::new(&basis, kappa, spec)?;
    let polaron = SectorSolver::with_frame(&basis, kappa, spec, Frame::Polaron)?;
    let mut worst: f64 = 0.0;
    let detunings = [-basis.omega_minus, 0.0, basis.kerr_shift()];
    for &delta in &detunings {
        let h = build_h_probe(&basis, delta, epsilon, &spec);
        let dense = dense_steady_state(&h, &pairs(oms_dissipators(&basis, kappa, &spec)))?;
        let sector = bare.solve(delta, epsilon, &SectorOptions::default())?.to_density()?;
        let l = build_liouvillian(&h, &oms_dissipators(&basis, kappa, &spec))?;
        let sparse = steady_state(&l)?;
        let hp = build_h_polaron(&basis, delta, epsilon, &spec);
        let dense_p = dense_steady_state(&hp, &pairs(polaron_dissipators(&basis, kappa, &spec)))?;
        let sector_p = polaron.solve(delta, epsilon, &SectorOptions::default())?.to_density()?;
        worst = worst
            .max(max_diff(dense.matrix(), sector.matrix()))
            .max(max_diff(dense.matrix(), sparse.matrix()))
            .max(max_diff(dense_p.matrix(), sector_p.matrix()));
    }
    Ok(check(
        "dense vs sparse steady state",
        worst,
        STEADY_TOL,
        format!("cutoffs {spec}, {} detunings, both frames", detunings.len()),
    ))
}

pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = closed_form_checks(opts.region, opts.branch)?;
    checks.push(steady_state_check(&opts.params, opts.branch, opts.epsilon)?);
    let mut setup = ProbeSetup::new(opts.params, opts.spec, opts.epsilon, opts.grid.clone());
    setup.branch = opts.branch;
    let conv = match truncation_convergence(&setup, Observable::Spectrum, DEFAULT_CONVERGENCE_THRESHOLD) {
        Ok(r) => check(
            "truncation convergence",
            r.max_relative_change,
            r.threshold,
            format!("{} vs {}, worst at Δ₂′/ω₋={:.3}", r.base, r.grown, r.worst_x),
        ),
        // A basis that fails its own residual check cannot be simulated.
        Err(e) => Check {
            name: "truncation convergence".into(),
            passed: false,
            value: f64::NAN,
            tolerance: DEFAULT_CONVERGENCE_THRESHOLD,
            detail: e.to_string(),
        },
    };
    checks.push(conv);
    Ok(VerifyReport { checks })
}
