//! The `overlap-lab` command line. [`run`] is the whole program; the binary
//! only forwards `std::env::args` and exits with its code.

pub mod parse;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use crate::error::Error;
use crate::fixedpoints::{continue_orbit, refine_fixed_point, ContinuationTarget};
use crate::integrate::{advance, advance_sampled, strobe, strobe_inverse, Method};
use crate::io::{self as export, RunManifest};
use crate::manifolds::{
    find_crossings, grow_manifold, ArcOptions, ManifoldKind, SplittingOptions, CROSSING_TOL,
};
use crate::melnikov::{melnikov_profile, predict_splitting, separatrix};
use crate::models::{critical_points, CriticalKind};
use crate::regimes::{
    confinement_test, excursion_stats, itinerary, median_passage, sweep, ConfinementOptions,
    ItineraryOptions, PassageRule, SweepGrid, Verdict,
};
use crate::{Coupling, Family, IntegratorConfig, ModelSpec, Perturbation, PhaseState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Domain(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn scalar(s: &str) -> std::result::Result<f64, String> {
    parse::scalar(s)
}

fn point(s: &str) -> std::result::Result<(f64, f64), String> {
    parse::point(s)
}

#[derive(Parser, Debug)]
#[command(
    name = "overlap-lab",
    version,
    about = "Resonance overlap in two near-integrable Hamiltonian families"
)]
struct Cli {
    /// Only log errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Log debugging detail.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Level curves and critical points of the integrable part.
    Portrait(PortraitArgs),
    /// Continuous-time trajectory.
    Orbit(OrbitArgs),
    /// Iterates of the time-2π map.
    Strobe(StrobeArgs),
    /// Hyperbolic fixed point of the time-2π map, optionally continued.
    Saddle(SaddleArgs),
    /// One-dimensional stable or unstable manifold, with crossings.
    Manifold(ManifoldArgs),
    /// Melnikov profile of an unperturbed connection.
    Melnikov(MelnikovArgs),
    /// Measured manifold splitting on a section.
    Splitting(SplittingArgs),
    /// Confinement test for a single parameter pair.
    Confine(ConfineArgs),
    /// First-passage statistics.
    Excursion(ExcursionArgs),
    /// Saddle-neighbourhood itinerary (torus family).
    Itinerary(ItineraryArgs),
    /// Regime map over an (ε, μ) grid.
    Sweep(SweepArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Portrait(_) => "portrait",
            Command::Orbit(_) => "orbit",
            Command::Strobe(_) => "strobe",
            Command::Saddle(_) => "saddle",
            Command::Manifold(_) => "manifold",
            Command::Melnikov(_) => "melnikov",
            Command::Splitting(_) => "splitting",
            Command::Confine(_) => "confine",
            Command::Excursion(_) => "excursion",
            Command::Itinerary(_) => "itinerary",
            Command::Sweep(_) => "sweep",
        }
    }

    fn output(&self) -> &OutputArgs {
        match self {
            Command::Portrait(a) => &a.output,
            Command::Orbit(a) => &a.output,
            Command::Strobe(a) => &a.output,
            Command::Saddle(a) => &a.output,
            Command::Manifold(a) => &a.output,
            Command::Melnikov(a) => &a.output,
            Command::Splitting(a) => &a.output,
            Command::Confine(a) => &a.output,
            Command::Excursion(a) => &a.output,
            Command::Itinerary(a) => &a.output,
            Command::Sweep(a) => &a.output,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct PerturbationArgs {
    #[arg(long, default_value = "mu-only")]
    coupling: Coupling,
    /// Inline perturbation, e.g. "1.0*cos(x+2y+t)".
    #[arg(long = "f", default_value = "cos(x+2y+t)", allow_hyphen_values = true)]
    f: String,
    /// Term-list file (`c a b m phi` per line); overrides --f.
    #[arg(long)]
    f_file: Option<PathBuf>,
}

impl PerturbationArgs {
    fn perturbation(&self) -> CliResult<Perturbation> {
        match &self.f_file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                Perturbation::from_term_list(&text).map_err(|e| usage(e.to_string()))
            }
            None => Perturbation::parse_expr(&self.f).map_err(|e| usage(e.to_string())),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct ModelArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true)]
    eps: f64,
    #[arg(long, value_parser = scalar, default_value = "0", allow_hyphen_values = true)]
    mu: f64,
    #[command(flatten)]
    perturbation: PerturbationArgs,
}

impl ModelArgs {
    fn spec(&self) -> CliResult<ModelSpec> {
        let p = self.perturbation.perturbation()?;
        Ok(ModelSpec::new(
            self.family,
            self.eps,
            self.mu,
            p,
            self.perturbation.coupling,
        )?)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct IntegratorArgs {
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    /// Fixed-step RK4 with this many steps per period instead of the adaptive pair.
    #[arg(long)]
    rk4: Option<usize>,
}

impl IntegratorArgs {
    fn config(&self, base: IntegratorConfig) -> CliResult<IntegratorConfig> {
        let mut c = base;
        if let Some(v) = self.abs_tol {
            c.abs_tol = v;
        }
        if let Some(v) = self.rel_tol {
            c.rel_tol = v;
        }
        if let Some(v) = self.max_step {
            c.max_step = v;
        }
        if let Some(n) = self.rk4 {
            c.method = Method::Rk4 {
                steps_per_period: n,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// File name stem; defaults to the subcommand name.
    #[arg(long)]
    prefix: Option<String>,
    /// Write the primary CSV to standard output instead of a file.
    #[arg(long)]
    stdout: bool,
}

#[derive(Args, Debug, Serialize)]
struct PortraitArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, value_parser = scalar)]
    eps: f64,
    #[arg(long, default_value_t = 241)]
    nx: usize,
    #[arg(long, default_value_t = 241)]
    ny: usize,
    /// Extra levels besides the critical ones.
    #[arg(long, default_value_t = 12)]
    levels: usize,
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    x_range: Option<(f64, f64)>,
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    y_range: Option<(f64, f64)>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct OrbitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true)]
    x0: f64,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true)]
    y0: f64,
    #[arg(long, value_parser = scalar, default_value = "0", allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, value_parser = scalar)]
    tmax: f64,
    /// Sample on a uniform time grid instead of at accepted steps.
    #[arg(long, value_parser = scalar)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct StrobeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true)]
    x0: f64,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true)]
    y0: f64,
    #[arg(long, value_parser = scalar, default_value = "0", allow_hyphen_values = true)]
    t0: f64,
    #[arg(long)]
    n: usize,
    /// Iterate the inverse map.
    #[arg(long)]
    inverse: bool,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SaddleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    seed: (f64, f64),
    #[arg(long, value_parser = scalar, default_value = "0", allow_hyphen_values = true)]
    phase: f64,
    /// Continue the orbit in μ up to this value.
    #[arg(long, value_parser = scalar, conflicts_with = "continue_eps")]
    continue_mu: Option<f64>,
    /// Continue the orbit in ε up to this value.
    #[arg(long, value_parser = scalar)]
    continue_eps: Option<f64>,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum KindArg {
    Stable,
    Unstable,
}

impl From<KindArg> for ManifoldKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Stable => ManifoldKind::Stable,
            KindArg::Unstable => ManifoldKind::Unstable,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ManifoldArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    seed: (f64, f64),
    #[arg(long, value_parser = scalar, default_value = "0", allow_hyphen_values = true)]
    phase: f64,
    #[arg(long, value_enum, default_value = "unstable")]
    kind: KindArg,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    branch: i8,
    #[arg(long, value_parser = scalar, default_value = "2")]
    arclength: f64,
    #[arg(long, value_parser = scalar)]
    seed_offset: Option<f64>,
    #[arg(long, value_parser = scalar)]
    max_spacing: Option<f64>,
    #[arg(long)]
    max_points: Option<usize>,
    /// Grow the opposite manifold of this orbit too and report crossings.
    /// Lifted coordinates are taken literally.
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    target: Option<(f64, f64)>,
    /// Branch of the target manifold; defaults to the one facing the seed orbit.
    #[arg(long, allow_hyphen_values = true)]
    target_branch: Option<i8>,
    #[arg(long, value_parser = scalar, default_value = "1e-9")]
    tol: f64,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct MelnikovArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    from: (f64, f64),
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    to: (f64, f64),
    #[arg(long, default_value_t = 256)]
    n_t0: usize,
    #[arg(long, value_parser = scalar)]
    t_cut: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SplittingArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    from: (f64, f64),
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    to: (f64, f64),
    #[arg(long, default_value_t = 32)]
    phases: usize,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true)]
    section_x: Option<f64>,
    #[arg(long, value_parser = scalar)]
    max_arclength: Option<f64>,
    #[arg(long, value_parser = scalar)]
    max_spacing: Option<f64>,
    /// Skip root refinement of the gap zeros.
    #[arg(long)]
    no_refine: bool,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct BudgetArgs {
    /// `default` or `quick`; individual flags below override it.
    #[arg(long, default_value = "default")]
    budget: String,
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    band: Option<(f64, f64)>,
    #[arg(long)]
    orbits: Option<usize>,
    #[arg(long)]
    strobes: Option<usize>,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    curve_strobes: Option<usize>,
    #[arg(long, value_parser = scalar)]
    spread: Option<f64>,
}

impl BudgetArgs {
    fn options(&self, integrator: &IntegratorArgs) -> CliResult<ConfinementOptions> {
        let mut o = match self.budget.as_str() {
            "default" => ConfinementOptions::default(),
            "quick" => ConfinementOptions {
                n_orbits: 16,
                n_strobe: 2_000,
                n_candidates: 4,
                curve_strobe: 1_000,
                ..ConfinementOptions::default()
            },
            other => return Err(usage(format!("unknown budget `{other}` (default, quick)"))),
        };
        o.band = self.band;
        if let Some(v) = self.orbits {
            o.n_orbits = v;
        }
        if let Some(v) = self.strobes {
            o.n_strobe = v;
        }
        if let Some(v) = self.candidates {
            o.n_candidates = v;
        }
        if let Some(v) = self.curve_strobes {
            o.curve_strobe = v;
        }
        if let Some(v) = self.spread {
            o.curve.spread_threshold = v;
        }
        o.integrator = integrator.config(o.integrator)?;
        Ok(o)
    }
}

#[derive(Args, Debug, Serialize)]
struct ConfineArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct ExcursionArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Explicit seeds `x,y;x,y;...`.
    #[arg(long, value_parser = parse::points, allow_hyphen_values = true)]
    seeds: Option<parse::List<(f64, f64)>>,
    /// Seed line: fixed x with `--seed-y` values.
    #[arg(long, value_parser = scalar, allow_hyphen_values = true, requires = "seed_y")]
    seed_x: Option<f64>,
    #[arg(long, value_parser = parse::range, allow_hyphen_values = true)]
    seed_y: Option<parse::List<f64>>,
    #[arg(long, value_parser = scalar, default_value = "0", allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, value_parser = scalar)]
    tmax: f64,
    /// Displacement rule threshold.
    #[arg(long, value_parser = scalar, conflicts_with_all = ["y_minus", "y_plus"])]
    delta: Option<f64>,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true, requires = "y_plus")]
    y_minus: Option<f64>,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true, requires = "y_minus")]
    y_plus: Option<f64>,
    #[arg(long)]
    stop_at_passage: bool,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct ItineraryArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true)]
    x0: f64,
    #[arg(long, value_parser = scalar, allow_hyphen_values = true)]
    y0: f64,
    #[arg(long, value_parser = scalar)]
    tmax: f64,
    #[arg(long, value_parser = scalar)]
    r_cell: Option<f64>,
    #[arg(long, value_parser = scalar)]
    dt: Option<f64>,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long)]
    family: Family,
    /// ε values: `start:stop:step`, `start:stop:logN` or a comma list.
    #[arg(long, value_parser = parse::range)]
    eps: parse::List<f64>,
    #[arg(long, value_parser = parse::range)]
    mu: parse::List<f64>,
    #[command(flatten)]
    perturbation: PerturbationArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Skip writing evidence orbits.
    #[arg(long)]
    no_evidence: bool,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

/// Owns every file a run writes and the manifest that lists them.
struct Sink {
    dir: PathBuf,
    prefix: String,
    to_stdout: bool,
    manifest: RunManifest,
}

impl Sink {
    fn new(out: &OutputArgs, manifest: RunManifest) -> CliResult<Self> {
        fs::create_dir_all(&out.out)?;
        Ok(Self {
            dir: out.out.clone(),
            prefix: out
                .prefix
                .clone()
                .unwrap_or_else(|| manifest.subcommand.clone()),
            to_stdout: out.stdout,
            manifest,
        })
    }

    fn file<F>(&mut self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut dyn Write) -> crate::Result<()>,
    {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        info!("wrote {}", path.display());
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    /// `<prefix>.csv`, or standard output under `--stdout`.
    fn primary<F>(&mut self, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut dyn Write) -> crate::Result<()>,
    {
        if self.to_stdout {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w)?;
            w.flush()?;
            self.manifest.outputs.push("-".into());
            Ok(())
        } else {
            let name = format!("{}.csv", self.prefix);
            self.file(&name, body)
        }
    }

    fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> CliResult<()> {
        let name = format!("{}{suffix}", self.prefix);
        self.file(&name, |w| export::write_json(w, value))
    }

    fn finish(self) -> CliResult<()> {
        let path = self.dir.join(format!("{}.manifest.json", self.prefix));
        let mut w = BufWriter::new(File::create(&path)?);
        export::write_json(&mut w, &self.manifest)?;
        w.flush()?;
        Ok(())
    }
}

/// Runs the program on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
    log::set_max_level(level);

    let recorded: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match dispatch(cli.command, recorded) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(command: Command, argv: Vec<String>) -> CliResult<()> {
    let mut manifest = RunManifest::new(command.name(), argv);
    manifest.parameters = serde_json::to_value(&command).map_err(Error::from)?;
    let jobs = match &command {
        Command::Sweep(a) => a.jobs,
        _ => 1,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {jobs} workers: {e}")))?;
    let sink = Sink::new(command.output(), manifest)?;
    pool.install(move || match command {
        Command::Portrait(a) => portrait_cmd(a, sink),
        Command::Orbit(a) => orbit_cmd(a, sink),
        Command::Strobe(a) => strobe_cmd(a, sink),
        Command::Saddle(a) => saddle_cmd(a, sink),
        Command::Manifold(a) => manifold_cmd(a, sink),
        Command::Melnikov(a) => melnikov_cmd(a, sink),
        Command::Splitting(a) => splitting_cmd(a, sink),
        Command::Confine(a) => confine_cmd(a, sink),
        Command::Excursion(a) => excursion_cmd(a, sink),
        Command::Itinerary(a) => itinerary_cmd(a, sink),
        Command::Sweep(a) => sweep_cmd(a, sink),
    })
}

fn portrait_cmd(a: PortraitArgs, mut sink: Sink) -> CliResult<()> {
    let spec = ModelSpec::standard(a.family, a.eps, 0.0)?;
    let (xw, yw) = export::portrait_window(a.family);
    let (xr, yr) = (a.x_range.unwrap_or(xw), a.y_range.unwrap_or(yw));
    if !(xr.1 > xr.0 && yr.1 > yr.0) || a.nx < 2 || a.ny < 2 {
        return Err(usage("portrait window and grid must be non-degenerate"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..a.ny {
        let y = yr.0 + (yr.1 - yr.0) * j as f64 / (a.ny - 1) as f64;
        for i in 0..a.nx {
            let x = xr.0 + (xr.1 - xr.0) * i as f64 / (a.nx - 1) as f64;
            let h = spec.integrable_energy(x, y);
            lo = lo.min(h);
            hi = hi.max(h);
        }
    }
    let levels = export::portrait_levels(&spec, a.levels, lo, hi);
    let segments = export::level_segments(&spec, &levels, xr, yr, a.nx, a.ny);
    let cps = critical_points(&spec);
    let saddles = cps
        .iter()
        .filter(|c| c.kind == CriticalKind::Saddle)
        .count();
    let portrait = export::Portrait {
        family: a.family,
        epsilon: a.eps,
        x_range: xr,
        y_range: yr,
        nx: a.nx,
        ny: a.ny,
        levels,
        saddles,
        centers: cps.len() - saddles,
        critical_points: cps,
    };
    sink.manifest.spec = Some(spec);
    sink.primary(|w| export::write_level_segments(w, &segments))?;
    sink.json(".json", &portrait)?;
    sink.finish()
}

fn orbit_cmd(a: OrbitArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let cfg = a.integrator.config(IntegratorConfig::default())?;
    let s0 = PhaseState::new(a.x0, a.y0, a.t0);
    let t1 = a.t0 + a.tmax;
    let traj = match a.dt {
        Some(dt) => advance_sampled(&spec, s0, t1, dt, &cfg)?,
        None => advance(&spec, s0, t1, &cfg)?,
    };
    let summary = json!({
        "samples": traj.len(),
        "final": traj.last(),
        "y_excursion": traj.y_excursion(),
        "max_energy_drift": traj.max_energy_drift(),
    });
    let out = traj.strided(a.stride);
    sink.manifest.spec = Some(spec);
    sink.manifest.integrator = Some(cfg);
    sink.primary(|w| export::write_trajectory(w, &out))?;
    sink.json(".json", &summary)?;
    sink.finish()
}

fn strobe_cmd(a: StrobeArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let cfg = a.integrator.config(IntegratorConfig::default())?;
    let s0 = PhaseState::new(a.x0, a.y0, a.t0);
    let its = if a.inverse {
        strobe_inverse(&spec, s0, a.n, &cfg)?
    } else {
        strobe(&spec, s0, a.n, &cfg)?
    };
    let stride = a.stride.max(1);
    let states: Vec<PhaseState> = std::iter::once(s0)
        .chain(its.iter().copied())
        .enumerate()
        .filter(|(k, _)| k % stride == 0 || *k == its.len())
        .map(|(_, s)| s)
        .collect();
    let y0 = s0.y;
    let excursion = its.iter().map(|s| (s.y - y0).abs()).fold(0.0, f64::max);
    let summary = json!({ "iterates": its.len(), "final": its.last(), "y_excursion": excursion });
    sink.manifest.spec = Some(spec.clone());
    sink.manifest.integrator = Some(cfg);
    sink.primary(|w| export::write_states(w, &spec, &states))?;
    sink.json(".json", &summary)?;
    sink.finish()
}

fn saddle_cmd(a: SaddleArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let cfg = a.integrator.config(IntegratorConfig::default())?;
    let orbit = refine_fixed_point(&spec, PhaseState::new(a.seed.0, a.seed.1, a.phase), &cfg)?;
    sink.manifest.spec = Some(spec);
    sink.manifest.integrator = Some(cfg);
    let target = match (a.continue_mu, a.continue_eps) {
        (Some(m), _) => Some(ContinuationTarget::Mu(m)),
        (_, Some(e)) => Some(ContinuationTarget::Epsilon(e)),
        _ => None,
    };
    let Some(target) = target else {
        sink.json(".json", &orbit)?;
        return sink.finish();
    };
    if a.steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    let cont = continue_orbit(&orbit, target, a.steps, &cfg);
    let param = |o: &crate::fixedpoints::HyperbolicOrbit| match target {
        ContinuationTarget::Mu(_) => o.spec.mu,
        ContinuationTarget::Epsilon(_) => o.spec.epsilon,
    };
    let chain = cont.chain.clone();
    sink.primary(|w| {
        writeln!(w, "param,x,y,lambda_u,lambda_s,residual")?;
        for o in &chain {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                export::num(param(o)),
                export::num(o.base.x),
                export::num(o.base.y),
                export::num(o.lambda_u()),
                export::num(o.lambda_s()),
                export::num(o.residual)
            )?;
        }
        Ok(())
    })?;
    let failure = cont.failure.as_ref().map(|e| e.to_string());
    sink.json(
        ".json",
        &json!({ "orbit": orbit, "continuation": cont.chain, "failure": failure }),
    )?;
    sink.finish()?;
    match cont.failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn arc_options(
    seed_offset: Option<f64>,
    max_spacing: Option<f64>,
    max_points: Option<usize>,
    base: ArcOptions,
) -> ArcOptions {
    ArcOptions {
        seed_offset: seed_offset.unwrap_or(base.seed_offset),
        max_spacing: max_spacing.unwrap_or(base.max_spacing),
        max_points: max_points.unwrap_or(base.max_points),
        ..base
    }
}

fn manifold_cmd(a: ManifoldArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let cfg = a.integrator.config(IntegratorConfig::default())?;
    let opts = arc_options(
        a.seed_offset,
        a.max_spacing,
        a.max_points,
        ArcOptions::default(),
    );
    let orbit = refine_fixed_point(&spec, PhaseState::new(a.seed.0, a.seed.1, a.phase), &cfg)?;
    let kind: ManifoldKind = a.kind.into();
    let arc = grow_manifold(&orbit, kind, a.branch, a.arclength, &opts, &cfg)?;
    if arc.truncated() {
        warn!(
            "arc stopped on a budget at arclength {:.4}",
            arc.arclength()
        );
    }
    sink.manifest.spec = Some(spec.clone());
    sink.manifest.integrator = Some(cfg);
    sink.primary(|w| export::write_arc(w, &arc))?;
    let mut summary = json!({
        "owner": orbit,
        "kind": kind,
        "branch": arc.branch,
        "arclength": arc.arclength(),
        "points": arc.points.len(),
        "end": arc.end,
        "options": opts,
    });
    if let Some(t) = a.target {
        let other = refine_fixed_point(&spec, PhaseState::new(t.0, t.1, a.phase), &cfg)?;
        let other_kind = match kind {
            ManifoldKind::Unstable => ManifoldKind::Stable,
            ManifoldKind::Stable => ManifoldKind::Unstable,
        };
        let branch = a.target_branch.unwrap_or_else(|| {
            let v = match other_kind {
                ManifoldKind::Stable => other.v_s(),
                ManifoldKind::Unstable => other.v_u(),
            };
            let d = v[0] * (orbit.base.x - other.base.x) + v[1] * (orbit.base.y - other.base.y);
            if d >= 0.0 {
                1
            } else {
                -1
            }
        });
        let arc2 = grow_manifold(&other, other_kind, branch, a.arclength, &opts, &cfg)?;
        let (au, as_) = match kind {
            ManifoldKind::Unstable => (&arc, &arc2),
            ManifoldKind::Stable => (&arc2, &arc),
        };
        let tol = if a.tol > 0.0 { a.tol } else { CROSSING_TOL };
        let crossings = find_crossings(au, as_, tol)?;
        info!("{} crossings", crossings.len());
        let name = format!("{}.target.csv", sink.prefix);
        sink.file(&name, |w| export::write_arc(w, &arc2))?;
        sink.json(".crossings.json", &crossings)?;
        summary["target"] = json!({
            "owner": other,
            "kind": other_kind,
            "branch": branch,
            "arclength": arc2.arclength(),
            "crossings": crossings.len(),
        });
    }
    sink.json(".json", &summary)?;
    sink.finish()
}

fn melnikov_cmd(a: MelnikovArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let from = PhaseState::at(a.from.0, a.from.1);
    let to = PhaseState::at(a.to.0, a.to.1);
    let sep = separatrix(&spec.unperturbed(), from, to, a.t_cut)?;
    let profile = melnikov_profile(&sep, &spec.perturbation_per_unit_mu(), a.n_t0)?;
    let predicted = (spec.mu > 0.0).then(|| predict_splitting(&profile, spec.mu));
    sink.manifest.spec = Some(spec);
    sink.primary(|w| export::write_profile(w, &profile))?;
    let summary = json!({
        "from": sep.from,
        "to": sep.to,
        "level": sep.level,
        "branch": sep.branch,
        "mismatch": sep.mismatch,
        "zeros": profile.zeros,
        "harmonics": profile.harmonics,
        "section_point": profile.section_point,
        "grad_norm": profile.grad_norm,
        "max_abs": profile.max_abs(),
        "tail_envelope": profile.tail_envelope,
        "tail_bound": profile.tail_bound,
        "predicted_max_gap": predicted,
    });
    sink.json(".json", &summary)?;
    sink.finish()
}

fn splitting_cmd(a: SplittingArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let cfg = a.integrator.config(IntegratorConfig::default())?;
    let base = SplittingOptions::default();
    let opts = SplittingOptions {
        n_phases: a.phases,
        section_x: a.section_x,
        arc: arc_options(None, a.max_spacing, None, base.arc),
        max_arclength: a.max_arclength.unwrap_or(base.max_arclength),
        refine_zeros: !a.no_refine,
    };
    let from = PhaseState::at(a.from.0, a.from.1);
    let to = PhaseState::at(a.to.0, a.to.1);
    let result = crate::manifolds::splitting_distance(&spec, from, to, &opts, &cfg)?;
    sink.manifest.spec = Some(spec);
    sink.manifest.integrator = Some(cfg);
    sink.primary(|w| export::write_splitting(w, &result))?;
    let summary = json!({
        "from": result.from,
        "to": result.to,
        "section_x": result.section_x,
        "branch_unstable": result.branch_unstable,
        "branch_stable": result.branch_stable,
        "max_gap": result.max_gap,
        "zeros": result.zeros,
        "options": opts,
    });
    sink.json(".json", &summary)?;
    sink.finish()
}

fn confine_cmd(a: ConfineArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let opts = a.budget.options(&a.integrator)?;
    let result = confinement_test(&spec, &opts)?;
    info!("verdict {:?}", result.verdict);
    sink.manifest.spec = Some(spec.clone());
    sink.manifest.integrator = Some(opts.integrator);
    if let Some(states) = export::evidence_orbit(&spec, &result.evidence, &opts)? {
        let name = format!("{}.evidence.csv", sink.prefix);
        if sink.to_stdout {
            sink.primary(|w| export::write_states(w, &spec, &states))?;
        } else {
            sink.file(&name, |w| export::write_states(w, &spec, &states))?;
        }
    }
    sink.json(".json", &json!({ "result": result, "options": opts }))?;
    sink.finish()
}

fn excursion_cmd(a: ExcursionArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let cfg = a.integrator.config(IntegratorConfig::default())?;
    let pts: Vec<(f64, f64)> = match (&a.seeds, a.seed_x, &a.seed_y) {
        (Some(s), None, None) => s.0.clone(),
        (None, Some(x), Some(ys)) => ys.0.iter().map(|&y| (x, y)).collect(),
        _ => return Err(usage("give either --seeds or --seed-x with --seed-y")),
    };
    if pts.is_empty() {
        return Err(usage("no seeds"));
    }
    let rule = match (a.delta, a.y_minus, a.y_plus) {
        (Some(delta), None, None) => PassageRule::Displacement { delta },
        (None, Some(y_minus), Some(y_plus)) => PassageRule::Directional { y_minus, y_plus },
        _ => return Err(usage("give either --delta or --y-minus with --y-plus")),
    };
    let seeds: Vec<PhaseState> = pts
        .iter()
        .map(|&(x, y)| PhaseState::new(x, y, a.t0))
        .collect();
    let records = excursion_stats(&spec, &seeds, a.t0 + a.tmax, rule, a.stop_at_passage, &cfg)?;
    let passed = records.iter().filter(|r| r.first_passage.is_some()).count();
    let summary = json!({
        "rule": rule,
        "seeds": records.len(),
        "passed": passed,
        "median_passage": median_passage(&records),
    });
    sink.manifest.spec = Some(spec);
    sink.manifest.integrator = Some(cfg);
    sink.primary(|w| export::write_excursions(w, &records))?;
    sink.json(".json", &summary)?;
    sink.finish()
}

fn itinerary_cmd(a: ItineraryArgs, mut sink: Sink) -> CliResult<()> {
    let spec = a.model.spec()?;
    let cfg = a.integrator.config(IntegratorConfig::default())?;
    let base = ItineraryOptions::default();
    let opts = ItineraryOptions {
        r_cell: a.r_cell.unwrap_or(base.r_cell),
        dt: a.dt.unwrap_or(base.dt),
    };
    let it = itinerary(&spec, PhaseState::at(a.x0, a.y0), a.tmax, &opts, &cfg)?;
    let summary = json!({
        "visits": it.len(),
        "counts": it.counts,
        "legal": it.is_legal(),
        "symbols": it.symbols(),
        "options": opts,
    });
    sink.manifest.spec = Some(spec);
    sink.manifest.integrator = Some(cfg);
    sink.primary(|w| export::write_itinerary(w, &it))?;
    sink.json(".json", &summary)?;
    sink.finish()
}

fn sweep_cmd(a: SweepArgs, mut sink: Sink) -> CliResult<()> {
    let p = a.perturbation.perturbation()?;
    let eps0 = a.eps.0.first().copied().unwrap_or(1.0);
    let mu0 = a.mu.0.first().copied().unwrap_or(0.0);
    let base = ModelSpec::new(a.family, eps0, mu0, p, a.perturbation.coupling)?;
    let opts = a.budget.options(&a.integrator)?;
    let grid = SweepGrid {
        eps: a.eps.0.clone(),
        mu: a.mu.0.clone(),
    };
    info!(
        "sweeping {} cells on {} threads",
        grid.eps.len() * grid.mu.len(),
        rayon::current_num_threads()
    );
    let map = sweep(&base, &grid, &opts)?;
    sink.manifest.spec = Some(base.clone());
    sink.manifest.integrator = Some(opts.integrator);
    sink.primary(|w| export::write_regime_map(w, &map))?;
    if !a.no_evidence {
        for cell in &map.cells {
            let spec = base.with_epsilon(cell.eps).with_mu(cell.mu);
            if let Some(states) = export::evidence_orbit(&spec, &cell.evidence, &opts)? {
                let name = format!("{}.evidence/{}.csv", sink.prefix, cell.evidence_id);
                sink.file(&name, |w| export::write_states(w, &spec, &states))?;
            }
        }
    }
    let count = |v: Verdict| map.cells.iter().filter(|c| c.verdict == v).count();
    let summary = json!({
        "family": map.family,
        "grid": grid,
        "counts": {
            "confined": count(Verdict::Confined),
            "overlapped": count(Verdict::Overlapped),
            "undetermined": count(Verdict::Undetermined),
        },
        "boundary": map.boundary,
        "fit": map.fit,
        "violations": map.violations,
        "options": opts,
    });
    sink.json(".json", &summary)?;
    sink.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_is_not_an_error() {
        assert_eq!(run(["overlap-lab", "--help"]), EXIT_OK);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["overlap-lab", "orbit", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["overlap-lab", "frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn command_names_cover_every_subcommand() {
        use clap::CommandFactory;
        let names: Vec<String> = Cli::command()
            .get_subcommands()
            .map(|c| c.get_name().to_string())
            .collect();
        for n in [
            "portrait",
            "orbit",
            "strobe",
            "saddle",
            "manifold",
            "melnikov",
            "splitting",
            "confine",
            "excursion",
            "itinerary",
            "sweep",
        ] {
            assert!(names.iter().any(|m| m == n), "{n}");
        }
    }
}
