//! JSON run configuration.
//!
//! Keys follow the physical symbols: `delta1`, `omega2`, `g1`, `g2`, `beta`,
//! `kappa`, `gamma`, `G1`, `T_M`, `epsilon`, `cutoffs`, `grid` and `axis`.
//! Every key is optional and overrides the preset or default value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::HilbertSpec;
use crate::model::SystemParams;
use crate::observables::{Grid, SweepAxis};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Linearized coupling; switches to the G₁-given mode.
    #[serde(rename = "G1", skip_serializing_if = "Option::is_none")]
    pub g1_lin: Option<f64>,
    #[serde(rename = "T_M", skip_serializing_if = "Option::is_none")]
    pub t_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<SweepAxis>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// `base` with every present key applied.
    pub fn apply(&self, base: &SystemParams) -> SystemParams {
        let mut p = *base;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.delta1, self.delta1);
        set(&mut p.g1, self.g1);
        set(&mut p.g2, self.g2);
        set(&mut p.beta, self.beta);
        set(&mut p.kappa, self.kappa);
        set(&mut p.gamma, self.gamma);
        set(&mut p.t_m, self.t_m);
        if self.omega2.is_some() {
            p.omega2 = self.omega2;
        }
        if self.g1_lin.is_some() {
            p.g1_override = self.g1_lin;
        }
        p
    }

    pub fn spec(&self) -> Result<Option<HilbertSpec>> {
        self.cutoffs
            .map(|[a, b, c]| HilbertSpec::new(a, b, c))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_keys() {
        let c = RunConfig::from_json(
            r#"{"delta1": 2.5, "G1": 0.1, "T_M": 0.2, "cutoffs": [4, 6, 6],
                "grid": {"start": -1, "stop": 1, "points": 5}, "axis": "G1"}"#,
        )
        .unwrap();
        let p = c.apply(&SystemParams::default());
        assert_eq!(p.delta1, 2.5);
        assert_eq!(p.g1_override, Some(0.1));
        assert_eq!(p.t_m, 0.2);
        assert_eq!(c.spec().unwrap(), Some(HilbertSpec::new(4, 6, 6).unwrap()));
        assert_eq!(c.grid.unwrap().values().len(), 5);
        assert_eq!(c.axis, Some(SweepAxis::G1));
    }

    #[test]
    fn explicit_grid_values() {
        let c = RunConfig::from_json(r#"{"grid": [0.25]}"#).unwrap();
        assert_eq!(c.grid.unwrap().values(), vec![0.25]);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_json(r#"{"delta": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn bad_cutoffs_rejected() {
        let c = RunConfig::from_json(r#"{"cutoffs": [1, 4, 4]}"#).unwrap();
        assert!(c.spec().is_err());
    }
}
