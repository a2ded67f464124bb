//! Measurement pipelines: closed-form parameter sweeps, the excitation
//! spectrum S(Δ₂′) and the equal-time correlation g²(0), plus the named
//! parameter presets and CSV/JSON output.

mod closed_form;
mod presets;
mod probe;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::HilbertSpec;
use crate::lindblad::{Frame, SectorOptions};
use crate::model::{PolaritonBasis, ShiftedParams, SystemParams, ThetaBranch};

pub use closed_form::{closed_form_sweeps, ClosedFormFamily, SweepAxis};
pub use presets::{default_grid, preset, presets, resolve_unit, CaptionUnits, Preset, PresetKind, ResolvedPreset};
pub use probe::{
    g2_zero, probe_points, spectrum, truncation_convergence, ConvergenceReport, Observable, ProbePoint,
    ProbeSetup, DEFAULT_CONVERGENCE_THRESHOLD,
};

/// Points of a one-dimensional sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Linspace { start: f64, stop: f64, points: usize },
    Values(Vec<f64>),
}

impl Grid {
    pub fn linspace(start: f64, stop: f64, points: usize) -> Self {
        Grid::Linspace { start, stop, points }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Linspace { start, stop, points } => match *points {
                0 => Vec::new(),
                1 => vec![*start],
                n => {
                    let step = (stop - start) / (n - 1) as f64;
                    (0..n)
                        .map(|i| if i + 1 == n { *stop } else { start + step * i as f64 })
                        .collect()
                }
            },
            Grid::Values(v) => v.clone(),
        }
    }

    /// Same range with a different number of points. Explicit value lists
    /// are left unchanged.
    pub fn with_points(&self, points: usize) -> Self {
        match self {
            Grid::Linspace { start, stop, .. } => Grid::linspace(*start, *stop, points),
            Grid::Values(v) => Grid::Values(v.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values();
        if v.is_empty() {
            return Err(Error::InvalidParam("grid has no points".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParam("grid values must be finite".into()));
        }
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParam("grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// A grid point that produced no value, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPoint {
    pub index: usize,
    pub x: f64,
    pub reason: String,
}

/// Everything needed to re-run a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub quantity: String,
    pub axis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub params: SystemParams,
    pub branch: ThetaBranch,
    pub grid: Grid,
    /// Energy the x axis is measured in, in units of ω_m.
    pub x_unit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shifted: Option<ShiftedParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<PolaritonBasis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<HilbertSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SectorOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
    pub flagged: Vec<FlaggedPoint>,
    pub notes: BTreeMap<String, serde_json::Value>,
    pub version: String,
}

impl SweepMeta {
    pub fn new(quantity: &str, axis: &str, params: SystemParams, branch: ThetaBranch, grid: Grid) -> Self {
        Self {
            quantity: quantity.to_string(),
            axis: axis.to_string(),
            preset: None,
            params,
            branch,
            grid,
            x_unit: 1.0,
            shifted: None,
            basis: None,
            cutoffs: None,
            epsilon: None,
            solver: None,
            frame: None,
            flagged: Vec::new(),
            notes: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Ordered (x, y) records of one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub points: Vec<(f64, f64)>,
    pub meta: SweepMeta,
}

impl SweepResult {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn min_y(&self) -> Option<(f64, f64)> {
        self.points.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// `x,y` header, then one record per point with 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,y")?;
        for (x, y) in &self.points {
            writeln!(w, "{x:.16e},{y:.16e}")?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Writes `<name>.csv` and `<name>.meta.json` into `dir`, each through
    /// a temporary file and a rename.
    pub fn write_files(&self, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{name}.csv"));
        let meta = dir.join(format!("{name}.meta.json"));
        let json = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| Error::Config(format!("serializing meta: {e}")))?;
        write_atomic(&csv, self.to_csv().as_bytes())?;
        write_atomic(&meta, format!("{json}\n").as_bytes())?;
        Ok((csv, meta))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints_exact() {
        let g = Grid::linspace(-3.0, 2.0, 7);
        let v = g.values();
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], -3.0);
        assert_eq!(v[6], 2.0);
        g.validate().unwrap();
        assert_eq!(Grid::linspace(0.5, 0.5, 1).values(), vec![0.5]);
    }

    #[test]
    fn grid_rejects_unsorted() {
        assert!(Grid::Values(vec![0.0, 0.0]).validate().is_err());
        assert!(Grid::Values(vec![]).validate().is_err());
        assert!(Grid::linspace(1.0, 0.0, 3).validate().is_err());
    }

    #[test]
    fn csv_format() {
        let r = SweepResult {
            axis_name: "x".into(),
            points: vec![(0.1, 1.0 / 3.0)],
            meta: SweepMeta::new("q", "x", SystemParams::default(), ThetaBranch::Consistent, Grid::Values(vec![0.1])),
        };
        assert_eq!(r.to_csv(), "x,y\n1.0000000000000001e-1,3.3333333333333331e-1\n");
    }

    #[test]
    fn files_written_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let r = SweepResult {
            axis_name: "x".into(),
            points: vec![(0.0, 1.0), (1.0, 2.0)],
            meta: SweepMeta::new("q", "x", SystemParams::default(), ThetaBranch::Consistent, Grid::linspace(0.0, 1.0, 2)),
        };
        let (csv, meta) = r.write_files(dir.path(), "run").unwrap();
        assert_eq!(fs::read_to_string(csv).unwrap(), r.to_csv());
        let back: SweepMeta = serde_json::from_str(&fs::read_to_string(meta).unwrap()).unwrap();
        assert_eq!(back, r.meta);
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
