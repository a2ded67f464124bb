//! Weak-probe observables computed from stationary states.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FlaggedPoint, Grid, SweepMeta, SweepResult};
use crate::error::{Error, Result};
use crate::hilbert::HilbertSpec;
use crate::lindblad::{Frame, SectorOptions, SectorSolver};
use crate::model::{derive, Derived, SystemParams, ThetaBranch};

/// Largest relative change tolerated by [`truncation_convergence`].
pub const DEFAULT_CONVERGENCE_THRESHOLD: f64 = 0.01;

/// Photon numbers below this make g²(0) meaningless.
const MIN_PHOTONS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    /// S = ⟨a₂†a₂⟩ / n₀ with n₀ = 4ε²/κ².
    Spectrum,
    /// g²(0) = ⟨a₂†a₂†a₂a₂⟩ / ⟨a₂†a₂⟩².
    G2,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::Spectrum => "S",
            Observable::G2 => "g2",
        }
    }
}

/// Inputs of a probe sweep. The grid holds Δ₂′ in units of ω₋.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSetup {
    pub params: SystemParams,
    pub branch: ThetaBranch,
    pub spec: HilbertSpec,
    pub epsilon: f64,
    pub grid: Grid,
    pub solver: SectorOptions,
    /// Basis of the phonon sectors; the polaron frame converges with far
    /// fewer levels when |g_σ/ω_σ| is of order one.
    pub frame: Frame,
    pub preset: Option<String>,
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl ProbeSetup {
    pub fn new(params: SystemParams, spec: HilbertSpec, epsilon: f64, grid: Grid) -> Self {
        Self {
            params,
            branch: ThetaBranch::Consistent,
            spec,
            epsilon,
            grid,
            solver: SectorOptions::default(),
            frame: Frame::Polaron,
            preset: None,
            notes: BTreeMap::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.grid.validate()?;
        let limit = self.params.kappa / 10.0;
        if !(self.epsilon > 0.0 && self.epsilon <= limit) {
            return Err(Error::InvalidParam(format!(
                "probe amplitude must satisfy 0 < ε ≤ κ/10 = {limit}, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Stationary photon moments at one probe detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbePoint {
    /// Δ₂′/ω₋
    pub x: f64,
    /// Δ₂′ in units of ω_m.
    pub detuning: f64,
    /// ⟨a₂†a₂⟩
    pub photons: f64,
    /// ⟨a₂†a₂†a₂a₂⟩
    pub pairs: f64,
    pub sweeps: usize,
    pub residual: f64,
}

/// Solves the stationary state at every grid point, in parallel on the
/// current rayon pool. Results are in grid order; on failure the error of
/// the first failing point is returned.
pub fn probe_points(setup: &ProbeSetup) -> Result<(Derived, Vec<ProbePoint>)> {
    setup.validate()?;
    let derived = derive(&setup.params, setup.branch)?;
    let unit = derived.basis.omega_minus;
    let solver = SectorSolver::with_frame(&derived.basis, setup.params.kappa, setup.spec, setup.frame)?;
    let xs = setup.grid.values();
    let results: Vec<Result<ProbePoint>> = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let detuning = x * unit;
            let state = solver
                .solve(detuning, setup.epsilon, &setup.solver)
                .map_err(|e| Error::at_point(i, x, e))?;
            let (photons, pairs) = state.photon_moments();
            Ok(ProbePoint {
                x,
                detuning,
                photons,
                pairs,
                sweeps: state.sweeps,
                residual: state.residual,
            })
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((derived, points))
}

fn assemble(setup: &ProbeSetup, derived: &Derived, points: &[ProbePoint], obs: Observable) -> SweepResult {
    let kappa = setup.params.kappa;
    let n0 = 4.0 * setup.epsilon * setup.epsilon / (kappa * kappa);
    let mut meta = SweepMeta::new(
        obs.name(),
        "Delta2_probe/omega_minus",
        setup.params,
        setup.branch,
        setup.grid.clone(),
    );
    meta.preset = setup.preset.clone();
    meta.x_unit = derived.basis.omega_minus;
    meta.shifted = Some(derived.shifted);
    meta.basis = Some(derived.basis);
    meta.cutoffs = Some(setup.spec);
    meta.epsilon = Some(setup.epsilon);
    meta.solver = Some(setup.solver);
    meta.frame = Some(setup.frame);
    meta.notes = setup.notes.clone();
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        match obs {
            Observable::Spectrum => out.push((p.x, (p.photons / n0).max(0.0))),
            Observable::G2 => {
                if p.photons > MIN_PHOTONS {
                    out.push((p.x, (p.pairs / (p.photons * p.photons)).max(0.0)));
                } else {
                    meta.flagged.push(FlaggedPoint {
                        index: i,
                        x: p.x,
                        reason: format!("⟨a₂†a₂⟩ = {:.3e} too small for g²(0)", p.photons),
                    });
                }
            }
        }
    }
    SweepResult {
        axis_name: "Delta2_probe/omega_minus".into(),
        points: out,
        meta,
    }
}

/// Runs one observable over the setup's grid.
pub fn run(setup: &ProbeSetup, obs: Observable) -> Result<SweepResult> {
    let (derived, points) = probe_points(setup)?;
    Ok(assemble(setup, &derived, &points, obs))
}

/// S(Δ₂′) = ⟨a₂†a₂⟩_ss / n₀.
pub fn spectrum(setup: &ProbeSetup) -> Result<SweepResult> {
    run(setup, Observable::Spectrum)
}

/// Equal-time second-order correlation of the probe cavity.
pub fn g2_zero(setup: &ProbeSetup) -> Result<SweepResult> {
    run(setup, Observable::G2)
}

/// Outcome of re-running an observable with every cutoff raised by two.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub observable: Observable,
    pub base: HilbertSpec,
    pub grown: HilbertSpec,
    /// max |y_grown − y_base| / max |y_base| over common grid points.
    pub max_relative_change: f64,
    /// Grid coordinate of the largest change.
    pub worst_x: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub fn truncation_convergence(setup: &ProbeSetup, obs: Observable, threshold: f64) -> Result<ConvergenceReport> {
    let base = run(setup, obs)?;
    let mut bigger = setup.clone();
    bigger.spec = setup.spec.grown(2);
    let grown = run(&bigger, obs)?;
    let lookup: BTreeMap<u64, f64> = grown.points.iter().map(|&(x, y)| (x.to_bits(), y)).collect();
    let scale = base.points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let mut worst = (0.0, f64::NAN);
    for &(x, y) in &base.points {
        if let Some(&y2) = lookup.get(&x.to_bits()) {
            let d = (y2 - y).abs();
            if d > worst.0 || worst.1.is_nan() {
                worst = (d, x);
            }
        }
    }
    // Points flagged in only one of the runs count as non-converged.
    let mismatch = base.points.len() != grown.points.len();
    let rel = if scale > 0.0 { worst.0 / scale } else { worst.0 };
    let rel = if mismatch { f64::INFINITY } else { rel };
    Ok(ConvergenceReport {
        observable: obs,
        base: setup.spec,
        grown: bigger.spec,
        max_relative_change: rel,
        worst_x: worst.1,
        threshold,
        passed: rel < threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoupled() -> SystemParams {
        SystemParams {
            g2: 0.0,
            ..SystemParams::default()
        }
    }

    #[test]
    fn decoupled_spectrum_is_lorentzian() {
        let p = decoupled();
        let setup = ProbeSetup::new(p, HilbertSpec::new(7, 2, 2).unwrap(), p.kappa / 20.0, Grid::linspace(-0.4, 0.4, 9));
        let s = spectrum(&setup).unwrap();
        let w = s.meta.x_unit;
        let k2 = p.kappa * p.kappa / 4.0;
        for (x, y) in &s.points {
            let d = x * w;
            assert!((y - k2 / (d * d + k2)).abs() < 1e-9, "x={x} y={y}");
        }
        let g = g2_zero(&setup).unwrap();
        assert!(g.points.iter().all(|(_, y)| (y - 1.0).abs() < 1e-6));
    }

    #[test]
    fn epsilon_limit_enforced() {
        let p = SystemParams::default();
        let setup = ProbeSetup::new(p, HilbertSpec::new(3, 3, 3).unwrap(), p.kappa / 5.0, Grid::linspace(0.0, 1.0, 2));
        assert!(matches!(spectrum(&setup), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn decoupled_runs_converge_immediately() {
        let p = decoupled();
        // Without g₂ only the cavity truncation matters; it enters as |α|^(2n_cav).
        let setup = ProbeSetup::new(p, HilbertSpec::new(6, 2, 2).unwrap(), p.kappa / 20.0, Grid::linspace(-1.0, 1.0, 5));
        let r = truncation_convergence(&setup, Observable::Spectrum, 0.01).unwrap();
        assert!(r.passed);
        assert!(r.max_relative_change < 1e-9, "{}", r.max_relative_change);
    }

    #[test]
    fn tiny_cutoffs_flagged() {
        let p = SystemParams::default();
        let setup = ProbeSetup::new(p, HilbertSpec::new(2, 2, 2).unwrap(), p.kappa / 20.0, Grid::linspace(-2.0, 1.0, 13));
        let r = truncation_convergence(&setup, Observable::Spectrum, 0.01).unwrap();
        assert!(!r.passed, "{r:?}");
    }
}
