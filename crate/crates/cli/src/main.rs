use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use duomech::config::RunConfig;
use duomech::hilbert::HilbertSpec;
use duomech::model::{
    critical_g1, derive, validity_check, Derived, SystemParams, ThetaBranch, CRITICAL_GUARD,
    DEFAULT_VALIDITY_THRESHOLD,
};
use duomech::observables::{
    closed_form_sweeps, default_grid, g2_zero, preset, presets, spectrum, Grid, Preset, PresetKind,
    ProbeSetup, ResolvedPreset, SweepResult,
};
use duomech::verify::{verify, VerifyOptions};
use duomech::{Error, ErrorKind, Result};

#[derive(Parser, Debug)]
#[command(name = "duomech", version, about = "Dual-coupling optomechanics: polaritons, spectra and photon correlations")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// List the compiled-in presets and exit.
    #[arg(long, global = true)]
    list_presets: bool,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Print the shifted parameters and the polariton basis.
    Params,
    /// Run the sweep a preset describes, or a closed-form sweep along `axis`.
    Sweep,
    /// Equal-time correlation g²(0) versus probe detuning.
    G2,
    /// Excitation spectrum S versus probe detuning.
    Spectrum,
    /// Run the self-check suite.
    Verify,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// JSON file whose keys override the preset or default values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Number of grid points (linear grids only).
    #[arg(long, global = true, value_name = "N")]
    points: Option<usize>,

    /// Fock cutoffs for a₂, B₊ and B₋.
    #[arg(long, global = true, value_name = "a,b,c")]
    cutoffs: Option<Cutoffs>,

    #[arg(long, global = true, value_enum, default_value_t = Branch::Consistent, hide = true)]
    theta_branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Branch {
    Consistent,
    Printed,
}

impl From<Branch> for ThetaBranch {
    fn from(b: Branch) -> Self {
        match b {
            Branch::Consistent => ThetaBranch::Consistent,
            Branch::Printed => ThetaBranch::Printed,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cutoffs([usize; 3]);

impl FromStr for Cutoffs {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        match parts.as_slice() {
            [Ok(a), Ok(b), Ok(c)] => Ok(Cutoffs([*a, *b, *c])),
            _ => Err(format!("expected three comma-separated integers, got `{s}`")),
        }
    }
}

/// Everything a command needs, after presets, config and flags are merged.
struct Inputs {
    preset: Option<&'static Preset>,
    resolved: Option<ResolvedPreset>,
    config: RunConfig,
    params: SystemParams,
    branch: ThetaBranch,
    args: RunArgs,
}

impl Inputs {
    fn load(args: &RunArgs) -> Result<Self> {
        let preset = args.preset.as_deref().map(preset).transpose()?;
        let resolved = preset.map(|p| p.resolve()).transpose()?;
        let config = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let base = resolved.as_ref().map(|r| r.params).unwrap_or_default();
        let params = config.apply(&base);
        params.validate()?;
        if args.points == Some(0) {
            return Err(Error::InvalidParam("--points must be at least 1".into()));
        }
        Ok(Self {
            preset,
            resolved,
            config,
            params,
            branch: args.theta_branch.into(),
            args: args.clone(),
        })
    }

    fn name(&self, fallback: &str) -> String {
        self.preset.map_or_else(|| fallback.to_string(), |p| p.name.to_string())
    }

    fn spec(&self) -> Result<HilbertSpec> {
        if let Some(Cutoffs([a, b, c])) = self.args.cutoffs {
            return HilbertSpec::new(a, b, c);
        }
        if let Some(spec) = self.config.spec()? {
            return Ok(spec);
        }
        match &self.resolved {
            Some(r) => Ok(r.spec),
            None => HilbertSpec::new(5, 8, 8),
        }
    }

    /// Config grid, else the preset grid when it is of the requested kind,
    /// else the default; `--points` applies last.
    fn grid(&self, kind: PresetKind) -> Grid {
        let grid = match (&self.config.grid, &self.resolved) {
            (Some(g), _) => g.clone(),
            (None, Some(r)) if same_family(r.kind, kind) => r.grid.clone(),
            _ => default_grid(kind),
        };
        match self.args.points {
            Some(n) => grid.with_points(n),
            None => grid,
        }
    }

    fn epsilon(&self) -> f64 {
        self.config.epsilon.unwrap_or(self.params.kappa / 20.0)
    }

    fn probe_setup(&self, kind: PresetKind) -> Result<ProbeSetup> {
        let mut s = ProbeSetup::new(self.params, self.spec()?, self.epsilon(), self.grid(kind));
        s.branch = self.branch;
        if let Some(r) = &self.resolved {
            s.preset = Some(r.name.to_string());
            s.notes = r.notes.clone();
        }
        Ok(s)
    }
}

fn same_family(a: PresetKind, b: PresetKind) -> bool {
    match (a, b) {
        (PresetKind::ClosedForm(x), PresetKind::ClosedForm(y)) => x == y,
        (PresetKind::ClosedForm(_), _) | (_, PresetKind::ClosedForm(_)) => false,
        _ => true,
    }
}

fn write(result: &SweepResult, dir: &Path, name: &str) -> Result<()> {
    let (csv, meta) = result.write_files(dir, name)?;
    println!("{}", csv.display());
    println!("{}", meta.display());
    if !result.meta.flagged.is_empty() {
        eprintln!("note: {} grid points flagged (see {})", result.meta.flagged.len(), meta.display());
    }
    Ok(())
}

fn list_presets() {
    for p in presets() {
        let kind = match p.kind {
            PresetKind::ClosedForm(axis) => format!("closed-form/{axis}"),
            PresetKind::Spectrum => "spectrum".into(),
            PresetKind::Correlation => "g2".into(),
        };
        println!("{:<7} {:<18} {}", p.name, kind, p.caption);
    }
}

fn print_params(inp: &Inputs) -> Result<()> {
    let p = &inp.params;
    println!("inputs (units of ω_m)");
    println!("  δ₁ = {}", p.delta1);
    if let Some(w2) = p.omega2 {
        println!("  ω₂ = {w2}");
    }
    println!("  g₁ = {}   g₂ = {}   β = {}", p.g1, p.g2, p.beta);
    println!("  κ = {}   γ = {}   T_M = {}", p.kappa, p.gamma, p.t_m);
    if let Some(g) = p.g1_override {
        println!("  G₁ = {g} (given)");
    }
    let d: Derived = derive(p, inp.branch)?;
    let s = &d.shifted;
    let b = &d.basis;
    let f = &b.factors;
    println!("shifted parameters");
    println!("  Δ₁ = δ₁ − 2g₁β                        = {:.10}", s.detuning1);
    if let Some(d2) = s.detuning2 {
        println!("  Δ₂ = ω₂ − 4g₂β²                       = {d2:.10}");
    }
    println!("  α₁ = √(ω_mβ/g₁)                       = {:.10}", s.alpha1);
    println!("  G₁ = g₁α₁                             = {:.10}", s.g1_lin);
    println!("  G₂ = 4g₂β                             = {:.10}", s.g2_lin);
    println!(
        "  G₁_c = √(Δ₁ω_m)/2                     = {:.10}  (guard {:.0}%)",
        critical_g1(s.detuning1, p.omega_m),
        CRITICAL_GUARD * 100.0
    );
    println!("polariton basis");
    println!("  ω±² = ½[Δ₁² + ω_m² ± √((Δ₁² − ω_m²)² + 16G₁²Δ₁ω_m)]");
    println!("  ω₋                                    = {:.10}", b.omega_minus);
    println!("  ω₊                                    = {:.10}", b.omega_plus);
    println!("  tan 2θ = 4G₁√(Δ₁ω_m)/(ω_m² − Δ₁²), θ  = {:.10}", b.theta);
    println!("  C± = cos θ (Δ₁ ± ω₋)/(2√(Δ₁ω₋))       = {:.10}, {:.10}", f.c_plus, f.c_minus);
    println!("  D± = sin θ (Δ₁ ± ω₊)/(2√(Δ₁ω₊))       = {:.10}, {:.10}", f.d_plus, f.d_minus);
    println!("  E± = sin θ (ω_m ± ω₋)/(2√(ω_mω₋))     = {:.10}, {:.10}", f.e_plus, f.e_minus);
    println!("  F± = cos θ (ω_m ± ω₊)/(2√(ω_mω₊))     = {:.10}, {:.10}", f.f_plus, f.f_minus);
    println!("  g₋ = −G₂ sin θ √(ω_m/ω₋)              = {:.10}", b.g_minus);
    println!("  g₊ = G₂ cos θ √(ω_m/ω₊)               = {:.10}", b.g_plus);
    println!("  κ₋ = γω_m sin²θ/ω₋ + κ cos²θ          = {:.10}", b.kappa_minus);
    println!("  κ₊ = γω_m cos²θ/ω₊ + κ sin²θ          = {:.10}", b.kappa_plus);
    println!("  n̄₋                                    = {:.10}", b.n_minus);
    println!("  n̄₊                                    = {:.10}", b.n_plus);
    println!("  Kerr shift Σ g_σ²/ω_σ                 = {:.10}", b.kerr_shift());
    println!("  diagonalization residual              = {:.3e}", d.residual);
    let v = validity_check(p, s, DEFAULT_VALIDITY_THRESHOLD);
    if v.flagged1 {
        eprintln!(
            "warning: G₁/g₁ = {:.3} < {}: the linearization of the first cavity is not justified",
            v.ratio1, v.threshold
        );
    }
    if v.flagged2 {
        eprintln!(
            "warning: G₂/g₂ = {:.3} < {}: the linearization of the quadratic coupling is not justified",
            v.ratio2, v.threshold
        );
    }
    if let Some(r) = inp.resolved.as_ref().filter(|r| matches!(r.kind, PresetKind::ClosedForm(_))) {
        let PresetKind::ClosedForm(axis) = r.kind else { unreachable!() };
        let grid = inp.grid(r.kind);
        let fam = closed_form_sweeps(p, axis, &grid, inp.branch)?;
        let w_minus = fam.get("omega_minus").expect("always computed");
        let w_plus = fam.get("omega_plus").expect("always computed");
        println!("{:>16} {:>16} {:>16}", axis.name(), "omega_minus", "omega_plus");
        for ((x, wm), (_, wp)) in w_minus.points.iter().zip(&w_plus.points) {
            println!("{x:>16.10} {wm:>16.10} {wp:>16.10}");
        }
        for s in &fam.skipped {
            eprintln!("skipped {} = {}: {}", axis.name(), s.x, s.reason);
        }
    }
    Ok(())
}

fn sweep(inp: &Inputs) -> Result<()> {
    let out = &inp.args.out;
    let kind = match (inp.resolved.as_ref().map(|r| r.kind), inp.config.axis) {
        (Some(kind), _) => kind,
        (None, Some(axis)) => PresetKind::ClosedForm(axis),
        (None, None) => {
            return Err(Error::InvalidParam(
                "sweep needs --preset or a config with `axis` (delta1 or G1)".into(),
            ))
        }
    };
    match kind {
        PresetKind::ClosedForm(axis) => {
            let fam = closed_form_sweeps(&inp.params, axis, &inp.grid(kind), inp.branch)?;
            let wanted: Vec<&str> = match inp.preset {
                Some(p) => p.quantities().to_vec(),
                None => fam.results.iter().map(|r| r.meta.quantity.as_str()).collect(),
            };
            let base = inp.name("sweep");
            for q in wanted {
                let mut r = fam.get(q).expect("known quantity").clone();
                r.meta.preset = inp.preset.map(|p| p.name.to_string());
                if let Some(res) = &inp.resolved {
                    r.meta.notes = res.notes.clone();
                }
                write(&r, out, &format!("{base}_{q}"))?;
            }
            Ok(())
        }
        PresetKind::Spectrum => write(&spectrum(&inp.probe_setup(kind)?)?, out, &inp.name("spectrum")),
        PresetKind::Correlation => write(&g2_zero(&inp.probe_setup(kind)?)?, out, &inp.name("g2")),
    }
}

fn run_verify(inp: &Inputs) -> Result<bool> {
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        params: inp.params,
        branch: inp.branch,
        spec: inp.spec()?,
        epsilon: inp.epsilon(),
        grid: match (&inp.config.grid, inp.args.points) {
            (Some(g), Some(n)) => g.with_points(n),
            (Some(g), None) => g.clone(),
            (None, Some(n)) => defaults.grid.with_points(n),
            (None, None) => defaults.grid.clone(),
        },
        region: defaults.region,
    };
    let report = verify(&opts)?;
    for c in &report.checks {
        println!("{c}");
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("all {} checks passed", report.checks.len());
    } else {
        println!("{failed} of {} checks failed", report.checks.len());
    }
    Ok(failed == 0)
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Solver => 2,
        ErrorKind::Io => 3,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DUOMECH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParam(format!("DUOMECH_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.list_presets {
        list_presets();
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (params, sweep, g2, spectrum, verify); see --help");
        return ExitCode::from(1);
    };
    let outcome = configure_threads().and_then(|()| {
        let inp = Inputs::load(&cli.run)?;
        match command {
            Command::Params => print_params(&inp).map(|()| true),
            Command::Sweep => sweep(&inp).map(|()| true),
            Command::G2 => write(&g2_zero(&inp.probe_setup(PresetKind::Correlation)?)?, &inp.args.out, &inp.name("g2"))
                .map(|()| true),
            Command::Spectrum => write(
                &spectrum(&inp.probe_setup(PresetKind::Spectrum)?)?,
                &inp.args.out,
                &inp.name("spectrum"),
            )
            .map(|()| true),
            Command::Verify => run_verify(&inp),
        }
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
