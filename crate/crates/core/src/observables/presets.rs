//! Named parameter sets reproducing the published figure panels.
//!
//! Panels of the probe experiments quote δ₁, g₁ and g₂ in units of the
//! polariton frequency ω₋, which itself depends on them. Such presets are
//! resolved by solving ω₋(δ₁, g₁) = ω₋ for the unit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Grid, SweepAxis};
use crate::error::{Error, Result};
use crate::hilbert::HilbertSpec;
use crate::model::{critical_g1, polariton_frequencies, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    ClosedForm(SweepAxis),
    Spectrum,
    Correlation,
}

/// δ₁, g₁ and g₂ as multiples of ω₋.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptionUnits {
    pub delta1: f64,
    pub g1: f64,
    pub g2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Values {
    /// δ₁, g₁, g₂ in units of ω_m.
    Absolute { delta1: f64, g1: f64, g2: f64 },
    Polariton(CaptionUnits),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub kind: PresetKind,
    /// The quoted panel parameters.
    pub caption: &'static str,
    values: Values,
    range: (f64, f64),
    cutoffs: (usize, usize, usize),
}

/// A preset turned into concrete inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPreset {
    pub name: &'static str,
    pub kind: PresetKind,
    pub params: SystemParams,
    /// ω₋ in units of ω_m for probe presets, 1 otherwise.
    pub unit: f64,
    pub grid: Grid,
    pub spec: HilbertSpec,
    pub epsilon: f64,
    pub notes: BTreeMap<String, serde_json::Value>,
}

const BETA: f64 = 25.0;
const KAPPA: f64 = 0.05;
const GAMMA: f64 = 1e-5;
pub(crate) const DEFAULT_POINTS: usize = 400;
const PROBE_RANGE: (f64, f64) = (-3.0, 2.0);
const DELTA1_RANGE: (f64, f64) = (1.1, 1.5);
const G1_RANGE: (f64, f64) = (0.0, 0.55);
const DEFAULT_CUTOFFS: (usize, usize, usize) = (5, 8, 8);
/// Correlation panels: g²(0) needs only three photon levels, and the
/// polaron frame keeps the phonon content of each sector small.
const BLOCKADE_CUTOFFS: (usize, usize, usize) = (3, 4, 12);
/// fig9a has g₋/ω₋ ≈ 2 and n̄₋ ≈ 0.8, so B₋ needs many more levels; B₊ is
/// nearly idle there.
const WIDE_MINUS_CUTOFFS: (usize, usize, usize) = (3, 2, 40);

const fn absolute(delta1: f64, g2: f64) -> Values {
    Values::Absolute { delta1, g1: 0.01, g2 }
}

const fn polariton(delta1: f64, g1: f64, g2: f64) -> Values {
    Values::Polariton(CaptionUnits { delta1, g1, g2 })
}

static PRESETS: &[Preset] = &[
    Preset {
        name: "fig2a",
        kind: PresetKind::ClosedForm(SweepAxis::Delta1),
        caption: "ω± versus Δ₁/ω_m; β=25, g₁/ω_m=10⁻²",
        values: absolute(2.0, 0.003),
        range: DELTA1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig2b",
        kind: PresetKind::ClosedForm(SweepAxis::G1),
        caption: "ω± versus G₁/ω_m; β=25, g₁/ω_m=10⁻², δ₁/ω_m=2.0",
        values: absolute(2.0, 0.003),
        range: G1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig3",
        kind: PresetKind::ClosedForm(SweepAxis::Delta1),
        caption: "C, |D|, E, |F| versus Δ₁/ω_m; β=25, g₁/ω_m=10⁻²",
        values: absolute(2.0, 0.003),
        range: DELTA1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig4a",
        kind: PresetKind::ClosedForm(SweepAxis::Delta1),
        caption: "g± versus Δ₁/ω_m; β=25, g₁/ω_m=10⁻², g₂/ω_m=3×10⁻³, δ₁/ω_m=1.80",
        values: absolute(1.8, 0.003),
        range: DELTA1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig4b",
        kind: PresetKind::ClosedForm(SweepAxis::G1),
        caption: "g± versus G₁/ω_m; β=25, g₁/ω_m=10⁻², g₂/ω_m=3×10⁻³, δ₁/ω_m=1.80",
        values: absolute(1.8, 0.003),
        range: G1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig5a",
        kind: PresetKind::ClosedForm(SweepAxis::G1),
        caption: "θ versus G₁/ω_m; β=25, g₁/ω_m=10⁻², δ₁/ω_m=2.0",
        values: absolute(2.0, 0.003),
        range: G1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig5b",
        kind: PresetKind::ClosedForm(SweepAxis::Delta1),
        caption: "θ versus Δ₁/ω_m; β=25, g₁/ω_m=10⁻²",
        values: absolute(2.0, 0.003),
        range: DELTA1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig6a",
        kind: PresetKind::ClosedForm(SweepAxis::Delta1),
        caption: "κ± versus Δ₁/ω_m; β=25, g₁/ω_m=10⁻², γ/ω_m=10⁻⁵, κ/ω_m=5×10⁻²",
        values: absolute(2.0, 0.003),
        range: DELTA1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig6b",
        kind: PresetKind::ClosedForm(SweepAxis::G1),
        caption: "κ± versus G₁/ω_m; β=25, g₁/ω_m=10⁻², γ/ω_m=10⁻⁵, κ/ω_m=5×10⁻², δ₁/ω_m=1.80",
        values: absolute(1.8, 0.003),
        range: G1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig7a",
        kind: PresetKind::ClosedForm(SweepAxis::Delta1),
        caption: "n̄± versus Δ₁/ω_m; β=25, g₁/ω_m=10⁻², γ/ω_m=10⁻⁵, κ/ω_m=5×10⁻²",
        values: absolute(2.0, 0.003),
        range: DELTA1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig7b",
        kind: PresetKind::ClosedForm(SweepAxis::G1),
        caption: "n̄± versus G₁/ω_m; β=25, g₁/ω_m=10⁻², γ/ω_m=10⁻⁵, κ/ω_m=5×10⁻², δ₁/ω_m=2.0",
        values: absolute(2.0, 0.003),
        range: G1_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig8a",
        kind: PresetKind::Spectrum,
        caption: "S(Δ₂); δ₁/ω₋=5.31, g₁/ω₋=3.00×10⁻², g₂/ω₋=9.36×10⁻³, β=25",
        values: polariton(5.31, 3.00e-2, 9.36e-3),
        range: PROBE_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig8b",
        kind: PresetKind::Spectrum,
        caption: "S(Δ₂); δ₁/ω₋=4.38, g₁/ω₋=2.37×10⁻², g₂/ω₋=7.10×10⁻³, β=25",
        values: polariton(4.38, 2.37e-2, 7.10e-3),
        range: PROBE_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig8c",
        kind: PresetKind::Spectrum,
        caption: "S(Δ₂); δ₁/ω₋=4.00, g₁/ω₋=2.00×10⁻², g₂/ω₋=6.00×10⁻³, β=25",
        values: polariton(4.00, 2.00e-2, 6.00e-3),
        range: PROBE_RANGE,
        cutoffs: DEFAULT_CUTOFFS,
    },
    Preset {
        name: "fig9a",
        kind: PresetKind::Correlation,
        caption: "g²(0); δ₁/ω₋=7.09, g₁/ω₋=4.43×10⁻², g₂/ω₋=1.33×10⁻², β=25",
        values: polariton(7.09, 4.43e-2, 1.33e-2),
        range: PROBE_RANGE,
        cutoffs: WIDE_MINUS_CUTOFFS,
    },
    Preset {
        name: "fig9b",
        kind: PresetKind::Correlation,
        caption: "g²(0); δ₁/ω₋=4.88, g₁/ω₋=2.80×10⁻², g₂/ω₋=8.37×10⁻³, β=25",
        values: polariton(4.88, 2.80e-2, 8.37e-3),
        range: PROBE_RANGE,
        cutoffs: BLOCKADE_CUTOFFS,
    },
    Preset {
        name: "fig9c",
        kind: PresetKind::Correlation,
        caption: "g²(0); δ₁/ω₋=4.00, g₁/ω₋=2.00×10⁻², g₂/ω₋=6.00×10⁻³, β=25",
        values: polariton(4.00, 2.00e-2, 6.00e-3),
        range: PROBE_RANGE,
        cutoffs: BLOCKADE_CUTOFFS,
    },
    Preset {
        name: "fig10a",
        kind: PresetKind::Correlation,
        caption: "g²(0); δ₁/ω₋=3.78, g₁/ω₋=1.51×10⁻², g₂/ω₋=7.56×10⁻⁴, β=25",
        values: polariton(3.78, 1.51e-2, 7.56e-4),
        range: PROBE_RANGE,
        cutoffs: BLOCKADE_CUTOFFS,
    },
    Preset {
        name: "fig10b",
        kind: PresetKind::Correlation,
        caption: "g²(0); δ₁/ω₋=3.78, g₁/ω₋=1.51×10⁻², g₂/ω₋=3.02×10⁻³, β=25",
        values: polariton(3.78, 1.51e-2, 3.02e-3),
        range: PROBE_RANGE,
        cutoffs: BLOCKADE_CUTOFFS,
    },
    Preset {
        name: "fig10c",
        kind: PresetKind::Correlation,
        caption: "g²(0); δ₁/ω₋=3.78, g₁/ω₋=1.51×10⁻², g₂/ω₋=7.56×10⁻³, β=25",
        values: polariton(3.78, 1.51e-2, 7.56e-3),
        range: PROBE_RANGE,
        cutoffs: BLOCKADE_CUTOFFS,
    },
];

/// Grid used when neither a preset nor a config supplies one.
pub fn default_grid(kind: PresetKind) -> Grid {
    let (a, b) = match kind {
        PresetKind::ClosedForm(SweepAxis::Delta1) => DELTA1_RANGE,
        PresetKind::ClosedForm(SweepAxis::G1) => G1_RANGE,
        PresetKind::Spectrum | PresetKind::Correlation => PROBE_RANGE,
    };
    Grid::linspace(a, b, DEFAULT_POINTS)
}

pub fn presets() -> &'static [Preset] {
    PRESETS
}

pub fn preset(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        Error::InvalidParam(format!("unknown preset `{name}` (available: {})", names.join(", ")))
    })
}

/// Shifted detuning and consistent G₁ for a candidate unit x.
fn lin_point(c: &CaptionUnits, x: f64) -> (f64, f64) {
    let g1 = c.g1 * x;
    (c.delta1 * x - 2.0 * g1 * BETA, (g1 * BETA).sqrt())
}

/// The unit ω₋ solving ω₋(δ₁, g₁) = ω₋ for caption values quoted in that
/// unit; an error unless the root is unique on (0, 4ω_m].
pub fn resolve_unit(c: &CaptionUnits) -> Result<f64> {
    let f = |x: f64| -> Option<f64> {
        let (d1, g) = lin_point(c, x);
        if d1 <= 0.0 || g >= critical_g1(d1, 1.0) {
            return None;
        }
        polariton_frequencies(d1, 1.0, g).ok().map(|(wm, _)| wm - x)
    };
    let steps = 8000;
    let xs: Vec<f64> = (1..=steps).map(|i| 4.0 * i as f64 / steps as f64).collect();
    let mut roots = Vec::new();
    for w in xs.windows(2) {
        let (Some(fa), Some(fb)) = (f(w[0]), f(w[1])) else {
            continue;
        };
        if fa == 0.0 {
            roots.push(w[0]);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (w[0], w[1], fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let Some(fm) = f(mid) else { break };
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
                if hi - lo <= f64::EPSILON * hi {
                    break;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    match roots.as_slice() {
        [x] => Ok(*x),
        [] => Err(Error::InvalidParam("no self-consistent ω₋ for these ratios".into())),
        many => Err(Error::InvalidParam(format!(
            "{} self-consistent values of ω₋: {many:?}",
            many.len()
        ))),
    }
}

/// G₁ at which ω₋(Δ₁, G₁) equals `target`, by bisection below the guard.
fn implied_g1(delta1: f64, target: f64) -> Option<f64> {
    let f = |g: f64| polariton_frequencies(delta1, 1.0, g).ok().map(|(wm, _)| wm - target);
    let (mut lo, mut hi) = (0.0, 0.999 * critical_g1(delta1, 1.0));
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo * fhi > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

impl Preset {
    /// Closed-form quantities shown in the panel; empty for probe presets.
    pub fn quantities(&self) -> &'static [&'static str] {
        match self.name.trim_end_matches(['a', 'b']) {
            "fig2" => &["omega_minus", "omega_plus"],
            "fig3" => &["C_plus", "C_minus", "abs_D_plus", "abs_D_minus", "E_plus", "E_minus", "abs_F_plus", "abs_F_minus"],
            "fig4" => &["g_minus", "g_plus"],
            "fig5" => &["theta"],
            "fig6" => &["kappa_minus", "kappa_plus"],
            "fig7" => &["n_minus", "n_plus"],
            _ => &[],
        }
    }

    pub fn resolve(&self) -> Result<ResolvedPreset> {
        let mut notes = BTreeMap::new();
        notes.insert("caption".to_string(), json!(self.caption));
        let (delta1, g1, g2, unit) = match self.values {
            Values::Absolute { delta1, g1, g2 } => (delta1, g1, g2, 1.0),
            Values::Polariton(c) => {
                let unit = resolve_unit(&c)?;
                notes.insert("omega_minus_unit".into(), json!(unit));
                notes.insert("caption_units".into(), json!(c));
                (c.delta1 * unit, c.g1 * unit, c.g2 * unit, unit)
            }
        };
        if self.name == "fig2a" {
            // ω₋ quoted as 0.25 and 0.5 at the ends of the Δ₁ range.
            notes.insert("implied_G1_at_Delta1_1.1".into(), json!(implied_g1(1.1, 0.25)));
            notes.insert("implied_G1_at_Delta1_1.5".into(), json!(implied_g1(1.5, 0.5)));
        }
        let params = SystemParams {
            delta1,
            g1,
            g2,
            beta: BETA,
            kappa: KAPPA,
            gamma: GAMMA,
            ..SystemParams::default()
        };
        let (a, b, c) = self.cutoffs;
        Ok(ResolvedPreset {
            name: self.name,
            kind: self.kind,
            params,
            unit,
            grid: Grid::linspace(self.range.0, self.range.1, DEFAULT_POINTS),
            spec: HilbertSpec::new(a, b, c)?,
            epsilon: KAPPA / 20.0,
            notes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_presets_name_quantities() {
        for p in presets() {
            let closed = matches!(p.kind, PresetKind::ClosedForm(_));
            assert_eq!(closed, !p.quantities().is_empty(), "{}", p.name);
        }
    }

    #[test]
    fn unique_names() {
        let mut names: Vec<_> = presets().iter().map(|p| p.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), presets().len());
        assert!(preset("fig11").is_err());
    }

    #[test]
    fn every_preset_resolves() {
        for p in presets() {
            let r = p.resolve().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            r.grid.validate().unwrap();
        }
    }

    #[test]
    fn fig8c_unit_is_half() {
        // δ₁/ω₋ = 4, g₁/ω₋ = 0.02 is solved by ω₋ = 0.5 (δ₁ = 2, g₁ = 0.01).
        let r = preset("fig8c").unwrap().resolve().unwrap();
        assert!((r.unit - 0.5).abs() < 1e-9, "{}", r.unit);
        assert!((r.params.delta1 - 2.0).abs() < 1e-8);
        assert!((r.params.g2 - 0.003).abs() < 1e-10);
    }

    #[test]
    fn unit_is_self_consistent() {
        for name in ["fig8a", "fig9a", "fig10b"] {
            let r = preset(name).unwrap().resolve().unwrap();
            let d1 = r.params.delta1 - 2.0 * r.params.g1 * r.params.beta;
            let g = (r.params.g1 * r.params.beta).sqrt();
            let (wm, _) = polariton_frequencies(d1, 1.0, g).unwrap();
            assert!((wm - r.unit).abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn fig2a_implied_coupling_recorded() {
        let r = preset("fig2a").unwrap().resolve().unwrap();
        let hi = r.notes["implied_G1_at_Delta1_1.5"].as_f64().unwrap();
        assert!((hi - 0.5).abs() < 1e-9);
        assert!(r.notes["implied_G1_at_Delta1_1.1"].as_f64().is_some());
    }
}
