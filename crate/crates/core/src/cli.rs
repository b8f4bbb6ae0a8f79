//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when numerical work ran and a
//! check or computation failed, 2 for usage and config errors (always
//! reported before any numerical work starts).
//!
//! `CHI_SPT_THREADS` caps the number of worker threads.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{find_mu_star, fit_orders, ErrorTarget, SweepSpec, MU_MAX};
use crate::error::ChiError;
use crate::lyapunov::{
    build_certificates, check_full_system_stability, default_grid, empirical_stability,
    InitialCondition, StabilityCriterion,
};
use crate::manifold::solve_h;
use crate::model::builtin::builtin_text;
use crate::model::{parse_config_document, validate_assumptions, ChiSystem, SystemConfig};
use crate::report::{write_atomic, Report, RunManifest, ScalingCheck, SimulationSummary, Status};
use crate::simulate::{
    simulate_boundary_layer_with, simulate_full, simulate_reduced, BoundaryMode, Trajectory,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const THREADS_ENV: &str = "CHI_SPT_THREADS";
pub const DEFAULT_OUT_DIR: &str = "chi-spt-out";

#[derive(Debug, Parser)]
#[command(
    name = "chi-spt",
    version,
    about = "Two-time-scale discrete system toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the standing assumptions on sampled points.
    Validate(ValidateArgs),
    /// Simulate the full, reduced or boundary-layer model and write CSV.
    Simulate(SimulateArgs),
    /// Fit the order of the approximation errors over a mu sweep.
    VerifyScaling(ScalingArgs),
    /// Build Lyapunov certificates and check full-system decay.
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Config file, or the name of a shipped system (lin1, sat1, coupled2,
    /// unstable_boundary, singular_gz).
    pub config: String,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Defaults to the config's analysis.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write report.json and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Full,
    Reduced,
    Boundary,
}

impl ModelKind {
    fn as_str(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::Reduced => "reduced",
            ModelKind::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_enum, default_value_t = ModelKind::Full)]
    pub model: ModelKind,
    /// Comma-separated; defaults to analysis.x0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Comma-separated; defaults to analysis.z0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z0: Option<Vec<f64>>,
    /// Boundary-layer start; defaults to `z0 - h(x0)`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    /// Number of steps; each CSV gets N + 1 rows.
    #[arg(long = "N", alias = "n-steps")]
    pub n_steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Boundary layer around `x_s[0]` instead of tracking `x_s[n]`.
    #[arg(long)]
    pub freeze_slow_state: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Slow,
    FastComposite,
    FastTail,
    All,
}

impl TargetArg {
    fn targets(self) -> Vec<ErrorTarget> {
        match self {
            TargetArg::Slow => vec![ErrorTarget::SlowError],
            TargetArg::FastComposite => vec![ErrorTarget::FastCompositeError],
            TargetArg::FastTail => vec![ErrorTarget::FastTailError],
            TargetArg::All => ErrorTarget::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Comma-separated mu values; defaults to analysis.mu_values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Option<Vec<f64>>,
    #[arg(long = "N", alias = "n-steps")]
    pub n_steps: Option<usize>,
    #[arg(long, value_enum, default_value_t = TargetArg::All)]
    pub target: TargetArg,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z0: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// `default` (3 x 3 grid at 0 and +-1/2 of the domain bounds) or
    /// `;`-separated points `x1,..:z1,..`.
    #[arg(long, default_value = "default", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long = "N", alias = "n-steps")]
    pub n_steps: Option<usize>,
    /// Samples for the decrease factors.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also search the stability threshold below this mu.
    #[arg(long)]
    pub mu_star: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

type UsageResult<T> = std::result::Result<T, Usage>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let go = || match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::VerifyScaling(a) => cmd_verify_scaling(a),
        Command::Stability(a) => cmd_stability(a),
    };
    let result = match pool {
        Some(p) => p.install(go),
        None => go(),
    };
    match result {
        Ok(code) => code,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

fn thread_pool() -> UsageResult<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Usage(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
    Ok(Some(pool))
}

/// Reads a config file, falling back to a shipped system of that name.
pub fn load_config(spec: &str) -> crate::Result<SystemConfig> {
    let path = Path::new(spec);
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => match builtin_text(spec) {
            Some(t) if !path.exists() => t.to_string(),
            _ => {
                return Err(ChiError::Io(format!(
                    "cannot read config `{}`: {e}",
                    path.display()
                )))
            }
        },
    };
    parse_config_document(&text).map_err(|e| ChiError::Config(format!("{}: {e}", path.display())))
}

fn positive_mu(mu: f64) -> UsageResult<f64> {
    if mu > 0.0 && mu.is_finite() {
        Ok(mu)
    } else {
        Err(Usage(format!(
            "mu must be a positive finite number, got {mu}"
        )))
    }
}

fn load_system(spec: &str, mu: Option<f64>) -> UsageResult<(SystemConfig, ChiSystem)> {
    let mut cfg = load_config(spec)?;
    if let Some(mu) = mu {
        cfg.mu = positive_mu(mu)?;
    }
    let sys = cfg.build()?;
    Ok((cfg, sys))
}

fn vector(
    name: &str,
    flag: Option<Vec<f64>>,
    fallback: Option<&Vec<f64>>,
    dim: usize,
) -> UsageResult<Vec<f64>> {
    let v = flag
        .or_else(|| fallback.cloned())
        .ok_or_else(|| Usage(format!("--{name} is required (the config sets no default)")))?;
    if v.len() != dim {
        return Err(Usage(format!(
            "--{name} needs {dim} components, got {}",
            v.len()
        )));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Usage(format!("--{name} has a non-finite component")));
    }
    Ok(v)
}

fn steps(flag: Option<usize>, cfg: &SystemConfig) -> UsageResult<usize> {
    let n = flag.unwrap_or(cfg.analysis.n_steps);
    if n == 0 {
        return Err(Usage("N must be >= 1".into()));
    }
    Ok(n)
}

/// Output directory, created before numerical work so a bad path is a
/// usage error.
fn out_dir(flag: Option<PathBuf>) -> UsageResult<PathBuf> {
    let dir = flag.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    std::fs::create_dir_all(&dir).map_err(|e| {
        Usage(format!(
            "cannot create output directory `{}`: {e}",
            dir.display()
        ))
    })?;
    Ok(dir)
}

struct Sink {
    dir: PathBuf,
    written: Vec<String>,
    failed: bool,
}

impl Sink {
    fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            written: Vec::new(),
            failed: false,
        }
    }

    fn write(&mut self, name: &str, contents: &str) {
        match write_atomic(&self.dir.join(name), contents) {
            Ok(()) => self.written.push(name.to_string()),
            Err(e) => {
                eprintln!("error: {e}");
                self.failed = true;
            }
        }
    }

    /// Writes the report and the manifest, returning the final exit code.
    fn finish(mut self, report: &Report, mut manifest: RunManifest) -> i32 {
        self.write("report.json", &report.to_json());
        let mut code = if report.status == Status::Pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        };
        if self.failed {
            code = EXIT_FAIL;
        }
        manifest.outputs = self.written.clone();
        manifest.outputs.push("manifest.json".into());
        manifest.outcome.exit_code = code;
        manifest.outcome.status = Status::from_bool(code == EXIT_PASS);
        if manifest.outcome.error.is_none() {
            manifest.outcome.error = report.error.clone();
        }
        self.write("manifest.json", &manifest.to_json());
        if self.failed {
            EXIT_FAIL
        } else {
            code
        }
    }
}

fn record_error(report: &mut Report, manifest: &mut RunManifest, e: &ChiError) {
    eprintln!("error: {e}");
    report.status = Status::Fail;
    report.error = Some(e.to_string());
    manifest.outcome.error = Some(e.to_string());
    manifest.outcome.divergence_index = e.divergence_index();
}

fn cmd_validate(a: ValidateArgs) -> UsageResult<i32> {
    let (cfg, sys) = load_system(&a.config.config, None)?;
    if a.samples == 0 {
        return Err(Usage("--samples must be >= 1".into()));
    }
    let seed = a.seed.unwrap_or(cfg.analysis.seed);
    let sink = a.out.map(|d| out_dir(Some(d))).transpose()?.map(Sink::new);

    let mut report = Report::new("validate", sys.name());
    let mut manifest = RunManifest::new("validate", &a.config.config);
    manifest.param("system", sys.name());
    manifest.param("mu", sys.mu());
    manifest.param("samples", a.samples);
    manifest.param("seed", seed);
    manifest.param("solver", cfg.solver);

    match validate_assumptions(&sys, a.samples, seed, &cfg.solver) {
        Ok(r) => {
            print_assumption_table(&r);
            report.status = Status::from_bool(r.all_pass);
            report.assumptions = Some(r);
        }
        Err(e) => record_error(&mut report, &mut manifest, &e),
    }
    print!("{}", report.to_json());
    Ok(match sink {
        Some(s) => s.finish(&report, manifest),
        None if report.status == Status::Pass => EXIT_PASS,
        None => EXIT_FAIL,
    })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn print_assumption_table(r: &crate::model::AssumptionReport) {
    println!(
        "system {} ({} samples, seed {})",
        r.system, r.n_samples, r.seed
    );
    println!(
        "{:<24} {:>14} {:>12}  result",
        "check", "value", "threshold"
    );
    let inv = &r.invertibility;
    println!(
        "{:<24} {:>14.6e} {:>12.1e}  {}",
        "sigma_min(dg/dz - I)",
        inv.margin,
        inv.threshold,
        verdict(inv.pass)
    );
    let l = &r.lipschitz;
    println!(
        "{:<24} {:>14.6e} {:>12}  {}",
        "L_f (estimate)",
        l.l_f,
        "finite",
        verdict(l.l_f.is_finite())
    );
    println!(
        "{:<24} {:>14.6e} {:>12}  {}",
        "L_g (estimate)",
        l.l_g,
        "finite",
        verdict(l.l_g.is_finite())
    );
    match l.l_h {
        Some(v) => println!(
            "{:<24} {:>14.6e} {:>12}  {}",
            "L_h (estimate)",
            v,
            "finite",
            verdict(v.is_finite())
        ),
        None => println!(
            "{:<24} {:>14} {:>12}  FAIL ({})",
            "L_h (estimate)",
            "-",
            "finite",
            l.l_h_error.as_deref().unwrap_or("unavailable")
        ),
    }
    let o = &r.origin;
    println!(
        "{:<24} {:>14.6e} {:>12.1e}  {}",
        "|f(0)|",
        o.f_residual,
        o.tol,
        verdict(o.f_residual <= o.tol)
    );
    println!(
        "{:<24} {:>14.6e} {:>12.1e}  {}",
        "|g(0, 0, 0)|",
        o.g_residual,
        o.tol,
        verdict(o.g_residual <= o.tol)
    );
    println!("overall: {}", verdict(r.all_pass));
}

fn cmd_simulate(a: SimulateArgs) -> UsageResult<i32> {
    let (cfg, sys) = load_system(&a.config.config, a.mu)?;
    let n = steps(a.n_steps, &cfg)?;
    let x0 = vector("x0", a.x0, cfg.analysis.x0.as_ref(), sys.n_x())?;
    let z0 = match a.model {
        ModelKind::Full => Some(vector("z0", a.z0, cfg.analysis.z0.as_ref(), sys.m_z())?),
        ModelKind::Reduced => None,
        ModelKind::Boundary => match a.y0 {
            Some(_) => None,
            None => Some(
                vector("z0", a.z0, cfg.analysis.z0.as_ref(), sys.m_z()).map_err(|_| {
                    Usage("boundary model needs --y0, or --z0 / analysis.z0 to derive it".into())
                })?,
            ),
        },
    };
    let y0 = match (&a.y0, a.model) {
        (Some(_), ModelKind::Boundary) => Some(vector("y0", a.y0.clone(), None, sys.m_z())?),
        (Some(_), _) => return Err(Usage("--y0 only applies to --model boundary".into())),
        _ => None,
    };
    let mut sink = Sink::new(out_dir(a.out)?);

    let mut report = Report::new("simulate", sys.name());
    let mut manifest = RunManifest::new("simulate", &a.config.config);
    manifest.param("system", sys.name());
    manifest.param("model", a.model.as_str());
    manifest.param("mu", sys.mu());
    manifest.param("n_steps", n);
    manifest.param("x0", &x0);
    if let Some(z0) = &z0 {
        manifest.param("z0", z0);
    }
    if let Some(y0) = &y0 {
        manifest.param("y0", y0);
    }
    if a.model == ModelKind::Boundary {
        manifest.param("freeze_slow_state", a.freeze_slow_state);
    }
    manifest.param("solver", cfg.solver);

    let solver = cfg.solver;
    let outcome: crate::Result<Vec<(&str, Trajectory)>> = (|| match a.model {
        ModelKind::Full => {
            let (x, z) = simulate_full(&sys, &x0, z0.as_deref().unwrap_or_default(), n)?;
            Ok(vec![("x.csv", x), ("z.csv", z)])
        }
        ModelKind::Reduced => {
            let (xs, zs) = simulate_reduced(&sys, &x0, n, &solver)?;
            Ok(vec![("x_s.csv", xs), ("z_s.csv", zs)])
        }
        ModelKind::Boundary => {
            let y0 = match (&y0, &z0) {
                (Some(y0), _) => y0.clone(),
                (None, Some(z0)) => {
                    let h0 = solve_h(&sys, &x0, &solver)?;
                    z0.iter().zip(&h0).map(|(z, h)| z - h).collect()
                }
                (None, None) => unreachable!("checked above"),
            };
            let (xs, _) = simulate_reduced(&sys, &x0, n, &solver)?;
            let mode = if a.freeze_slow_state {
                BoundaryMode::FreezeSlowState
            } else {
                BoundaryMode::Tracking
            };
            let y = simulate_boundary_layer_with(&sys, &xs, &y0, n, &solver, mode)?;
            Ok(vec![("x_s.csv", xs), ("y.csv", y)])
        }
    })();

    match outcome {
        Ok(trajs) => {
            let rows = trajs.first().map(|(_, t)| t.len()).unwrap_or(0);
            for (name, t) in &trajs {
                sink.write(name, &t.to_csv());
            }
            report.status = Status::Pass;
            report.simulation = Some(SimulationSummary {
                model: a.model.as_str().into(),
                n_steps: n,
                mu: sys.mu(),
                files: trajs.iter().map(|(n, _)| n.to_string()).collect(),
                rows_per_file: rows,
            });
            println!(
                "{}: {} model, {} steps, wrote {} to {}",
                sys.name(),
                a.model.as_str(),
                n,
                trajs.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
                sink.dir.display()
            );
        }
        Err(e) => record_error(&mut report, &mut manifest, &e),
    }
    Ok(sink.finish(&report, manifest))
}

fn cmd_verify_scaling(a: ScalingArgs) -> UsageResult<i32> {
    let (cfg, sys) = load_system(&a.config.config, None)?;
    let mut mu_values = a.mu.unwrap_or_else(|| cfg.analysis.mu_values.clone());
    for m in &mu_values {
        positive_mu(*m)?;
        if *m > MU_MAX {
            return Err(Usage(format!(
                "mu values must not exceed {MU_MAX}, got {m}"
            )));
        }
    }
    mu_values.sort_by(|p, q| q.total_cmp(p));
    mu_values.dedup();
    if mu_values.len() < 2 {
        return Err(Usage(
            "verify-scaling needs at least two distinct mu values".into(),
        ));
    }
    let n = steps(a.n_steps, &cfg)?;
    let x0 = vector("x0", a.x0, cfg.analysis.x0.as_ref(), sys.n_x())?;
    let z0 = vector("z0", a.z0, cfg.analysis.z0.as_ref(), sys.m_z())?;
    let targets = a.target.targets();
    let sink = Sink::new(out_dir(a.out)?);

    let spec = SweepSpec {
        x0,
        z0,
        mu_values,
        n_steps: n,
        solver: cfg.solver,
    };
    let mut report = Report::new("verify-scaling", sys.name());
    let mut manifest = RunManifest::new("verify-scaling", &a.config.config);
    manifest.param("system", sys.name());
    manifest.param("mu_values", &spec.mu_values);
    manifest.param("n_steps", n);
    manifest.param("x0", &spec.x0);
    manifest.param("z0", &spec.z0);
    manifest.param(
        "targets",
        targets.iter().map(|t| t.as_str()).collect::<Vec<_>>(),
    );
    manifest.param("solver", cfg.solver);

    match fit_orders(&sys, &spec, &targets) {
        Ok(reports) => {
            let checks: Vec<ScalingCheck> = reports.into_iter().map(ScalingCheck::new).collect();
            for c in &checks {
                println!(
                    "{:<22} slope {:>8.5} r2 {:>8.6} spread {:>7.3}  {}",
                    c.report.target.as_str(),
                    c.report.slope,
                    c.report.r2,
                    c.constant_spread,
                    verdict(c.pass)
                );
            }
            report.status = Status::from_bool(checks.iter().all(|c| c.pass));
            report.scaling = Some(checks);
        }
        Err(e) => record_error(&mut report, &mut manifest, &e),
    }
    Ok(sink.finish(&report, manifest))
}

/// Parses `default` or `;`-separated `x1,..:z1,..` points.
pub fn parse_grid(text: &str, sys: &ChiSystem) -> crate::Result<Vec<InitialCondition>> {
    if text.trim() == "default" {
        return Ok(default_grid(sys));
    }
    let comps = |s: &str, dim: usize, what: &str| -> crate::Result<Vec<f64>> {
        let v = s
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        ChiError::InvalidArgument(format!("bad grid component `{}`", c.trim()))
                    })
            })
            .collect::<crate::Result<Vec<f64>>>()?;
        if v.len() != dim {
            return Err(ChiError::InvalidArgument(format!(
                "grid {what} needs {dim} components, got {}",
                v.len()
            )));
        }
        Ok(v)
    };
    let grid = text
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (x, z) = p.split_once(':').ok_or_else(|| {
                ChiError::InvalidArgument(format!("grid point `{}` must look like x:z", p.trim()))
            })?;
            Ok((comps(x, sys.n_x(), "x")?, comps(z, sys.m_z(), "z")?))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Err(ChiError::InvalidArgument("stability grid is empty".into()));
    }
    Ok(grid)
}

fn cmd_stability(a: StabilityArgs) -> UsageResult<i32> {
    let (cfg, sys) = load_system(&a.config.config, a.mu)?;
    let n = steps(a.n_steps, &cfg)?;
    let grid = parse_grid(&a.grid, &sys)?;
    if a.samples == 0 {
        return Err(Usage("--samples must be >= 1".into()));
    }
    let seed = a.seed.unwrap_or(cfg.analysis.seed);
    let mu_star_hi = a.mu_star.map(positive_mu).transpose()?;
    let sink = Sink::new(out_dir(a.out)?);

    let mut report = Report::new("stability", sys.name());
    let mut manifest = RunManifest::new("stability", &a.config.config);
    manifest.param("system", sys.name());
    manifest.param("mu", sys.mu());
    manifest.param("n_steps", n);
    manifest.param("grid", &grid);
    manifest.param("samples", a.samples);
    manifest.param("seed", seed);
    if let Some(hi) = mu_star_hi {
        manifest.param("mu_star_hi", hi);
    }
    manifest.param("solver", cfg.solver);

    let outcome: crate::Result<bool> = (|| {
        let certs = build_certificates(&sys, a.samples, seed, &cfg.solver)?;
        println!(
            "{}: sigma_reduced {:.12} sigma_boundary {:.12}",
            sys.name(),
            certs.reduced.sigma,
            certs.boundary.sigma
        );
        let stability = match &certs.composite {
            Some(c) => {
                println!(
                    "composite: gamma [{:.6}, {:.6}] sigma {:.12}",
                    c.gamma_lo, c.gamma_hi, c.sigma
                );
                check_full_system_stability(&sys, c, &grid, n, &cfg.solver)?
            }
            None => {
                println!("composite: no certificate (a decrease factor is not below 1)");
                let criterion = StabilityCriterion {
                    grid: grid.clone(),
                    n_steps: n,
                    delta: 0.0,
                    solver: cfg.solver,
                };
                empirical_stability(&sys, &criterion)?
            }
        };
        match stability.rho_max {
            Some(r) => println!(
                "full system: max fitted rate {r:.6}  {}",
                verdict(stability.all_pass)
            ),
            None => println!(
                "full system: no fitted rate  {}",
                verdict(stability.all_pass)
            ),
        }
        let ok = certs.composite.is_some() && stability.all_pass;
        report.certificates = Some(certs);
        report.stability = Some(stability);
        if let Some(hi) = mu_star_hi {
            let criterion = StabilityCriterion {
                grid: grid.clone(),
                n_steps: n,
                ..StabilityCriterion::default_for(&sys)
            };
            let ms = find_mu_star(&sys, hi, &criterion)?;
            println!("mu*: {:.6}", ms.mu_star);
            report.mu_star = Some(ms);
        }
        Ok(ok)
    })();

    match outcome {
        Ok(ok) => report.status = Status::from_bool(ok),
        Err(e) => record_error(&mut report, &mut manifest, &e),
    }
    Ok(sink.finish(&report, manifest))
}
