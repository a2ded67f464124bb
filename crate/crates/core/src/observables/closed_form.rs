//! Sweeps of the closed-form polariton quantities along Δ₁ or G₁.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FlaggedPoint, Grid, SweepMeta, SweepResult};
use crate::error::{Error, Result};
use crate::model::{derive, Derived, SystemParams, ThetaBranch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Shifted detuning Δ₁; G₁ follows the parameter mode.
    #[serde(rename = "delta1")]
    Delta1,
    /// Linearized coupling G₁ at the Δ₁ implied by δ₁, g₁ and β.
    #[serde(rename = "G1")]
    G1,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Delta1 => "Delta1/omega_m",
            SweepAxis::G1 => "G1/omega_m",
        }
    }

    /// Parameters with the axis coordinate applied.
    pub fn apply(self, params: &SystemParams, x: f64) -> SystemParams {
        let mut p = *params;
        match self {
            SweepAxis::Delta1 => p.delta1 = x + 2.0 * p.g1 * p.beta,
            SweepAxis::G1 => p.g1_override = Some(x),
        }
        p
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta1" | "Delta1" | "Δ1" | "Δ₁" => Ok(SweepAxis::Delta1),
            "G1" | "g1_lin" | "G₁" => Ok(SweepAxis::G1),
            other => Err(Error::InvalidParam(format!(
                "unknown sweep axis `{other}` (expected delta1 or G1)"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Delta1 => "delta1",
            SweepAxis::G1 => "G1",
        })
    }
}

type Extract = fn(&Derived) -> f64;

const QUANTITIES: &[(&str, Extract)] = &[
    ("omega_minus", |d| d.basis.omega_minus),
    ("omega_plus", |d| d.basis.omega_plus),
    ("theta", |d| d.basis.theta),
    ("C_plus", |d| d.basis.factors.c_plus),
    ("C_minus", |d| d.basis.factors.c_minus),
    ("abs_D_plus", |d| d.basis.factors.d_plus.abs()),
    ("abs_D_minus", |d| d.basis.factors.d_minus.abs()),
    ("E_plus", |d| d.basis.factors.e_plus),
    ("E_minus", |d| d.basis.factors.e_minus),
    ("abs_F_plus", |d| d.basis.factors.f_plus.abs()),
    ("abs_F_minus", |d| d.basis.factors.f_minus.abs()),
    ("g_minus", |d| d.basis.g_minus),
    ("g_plus", |d| d.basis.g_plus),
    ("kappa_minus", |d| d.basis.kappa_minus),
    ("kappa_plus", |d| d.basis.kappa_plus),
    ("n_minus", |d| d.basis.n_minus),
    ("n_plus", |d| d.basis.n_plus),
];

/// One result per closed-form quantity, sharing the same surviving points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormFamily {
    pub axis: SweepAxis,
    pub results: Vec<SweepResult>,
    /// Points rejected by the critical guard, the stability condition or
    /// the diagonalization check.
    pub skipped: Vec<FlaggedPoint>,
}

impl ClosedFormFamily {
    pub fn get(&self, quantity: &str) -> Option<&SweepResult> {
        self.results.iter().find(|r| r.meta.quantity == quantity)
    }
}

pub fn closed_form_sweeps(
    params: &SystemParams,
    axis: SweepAxis,
    grid: &Grid,
    branch: ThetaBranch,
) -> Result<ClosedFormFamily> {
    params.validate()?;
    grid.validate()?;
    let mut kept: Vec<(f64, Derived)> = Vec::new();
    let mut skipped = Vec::new();
    for (index, x) in grid.values().into_iter().enumerate() {
        match derive(&axis.apply(params, x), branch) {
            Ok(d) => kept.push((x, d)),
            Err(
                e @ (Error::CriticalGuard { .. }
                | Error::Instability { .. }
                | Error::Residual { .. }
                | Error::NegativeDetuning(_)),
            ) => skipped.push(FlaggedPoint {
                index,
                x,
                reason: e.to_string(),
            }),
            Err(e) => return Err(Error::at_point(index, x, e)),
        }
    }
    let results = QUANTITIES
        .iter()
        .map(|&(name, f)| {
            let mut meta = SweepMeta::new(name, axis.name(), *params, branch, grid.clone());
            meta.flagged = skipped.clone();
            SweepResult {
                axis_name: axis.name().into(),
                points: kept.iter().map(|(x, d)| (*x, f(d))).collect(),
                meta,
            }
        })
        .collect();
    Ok(ClosedFormFamily {
        axis,
        results,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_points_skipped() {
        let p = SystemParams::default();
        // Δ₁ = 1.5: critical G₁ ≈ 0.612, guard ≈ 0.6001
        let fam = closed_form_sweeps(&p, SweepAxis::G1, &Grid::linspace(0.0, 0.7, 15), ThetaBranch::Consistent).unwrap();
        let w = fam.get("omega_minus").unwrap();
        assert_eq!(w.points.len(), 13);
        assert_eq!(fam.skipped.len(), 2);
        assert!(fam.skipped.iter().all(|s| s.x > 0.6001));
    }

    #[test]
    fn decoupled_column() {
        let p = SystemParams::default();
        let fam = closed_form_sweeps(&p, SweepAxis::G1, &Grid::Values(vec![0.0]), ThetaBranch::Consistent).unwrap();
        assert_eq!(fam.get("omega_minus").unwrap().points[0].1, 1.0);
        assert_eq!(fam.get("omega_plus").unwrap().points[0].1, 1.5);
    }

    #[test]
    fn delta1_axis_sets_shifted_detuning() {
        let p = SystemParams::default();
        let fam = closed_form_sweeps(&p, SweepAxis::Delta1, &Grid::linspace(1.1, 1.5, 3), ThetaBranch::Consistent).unwrap();
        let w = fam.get("omega_minus").unwrap();
        assert_eq!(w.points.len(), 3);
        assert!((w.points[2].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wrong_branch_points_rejected() {
        let p = SystemParams::default();
        let fam = closed_form_sweeps(&p, SweepAxis::Delta1, &Grid::linspace(1.1, 1.5, 5), ThetaBranch::Printed).unwrap();
        assert_eq!(fam.skipped.len(), 5);
        assert!(fam.skipped[0].reason.contains("residual"));
    }
}
