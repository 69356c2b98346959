//! The `hsp` command-line tool.
//!
//! Exit codes: 0 when every check passed, 1 when a mathematical check failed
//! or an integration broke down, 2 for configuration and usage errors.
//!
//! Settings resolve as flag, then `--config` file, then the per-command
//! default. The resolved settings are echoed into every output artifact.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::canonical::builtin_canonical_map;
use crate::dynamics::{catalog, CatalogHamiltonian, Hamiltonian, Params, CATALOG_NAMES};
use crate::error::Error;
use crate::geometry::{Dimension, PhaseVector};
use crate::integrate::{integrate, Integrator, Method};
use crate::report::{write_trajectory_csv, CheckRecord, SuiteSummary, TrajectoryJson, TrajectoryMetadata};
use crate::suites::{
    flow_summary, group_check, noncommute, random_base_points, transform_demo, verify_cases, GroupCheckConfig,
    VerifyCase, GENERATOR_TOL,
};
use crate::verify::{JacobianConfig, Tolerances};

const DEFAULTS_HELP: &str = "\
Defaults (flag > --config file > default):
  --n            2 (group-check, noncommute); 1 otherwise, 2 for charged_uniform_B
  --seed         42
  --samples      1000 random elements (group-check), 2 base points (verify),
                 5 table points (transform)
  --hamiltonian  harmonic; verify runs every catalog Hamiltonian
  --params       catalog defaults, every parameter 1
  --y0           p = 0, q = 1 in every coordinate
  --method       implicit_midpoint
  --dt           1e-3; 1e-4 for verify
  --t0, --t1     0 and 10 (flow), 0 and 5 (transform); verify uses the
                 horizons 0.1 and 1.0 unless --t1 is given, then t1 - t0
  --tol-sym      1e-6 (also the transform correspondence threshold)
  --tol-deg      1e-8
  --tol-dec      1e-5
  --format       csv for flow, json otherwise
  --jobs         1
  --map          identity; --map-params as k=v (lambda, theta, g)

noncommute reads f and v from --params as f1..fn, v1..vn (default f = v = e1).

Exit status: 0 all checks passed, 1 a check or integration failed,
2 configuration or usage error.";

#[derive(Debug, Parser)]
#[command(
    name = "hsp",
    version,
    about = "Checks for the extended phase space group HSp(2n) and Hamiltonian flows",
    after_help = DEFAULTS_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Group law, normality and metric invariance over seeded random elements
    GroupCheck(Flags),
    /// Integrate a catalog Hamiltonian and write the trajectory
    Flow(Flags),
    /// Certify flow Jacobians and generators on a grid of base points
    Verify(Flags),
    /// Compose a force and a boost in both orders
    Noncommute(Flags),
    /// Transform a Hamiltonian by a canonical map and compare trajectories
    Transform(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, clap::Args)]
#[command(after_help = DEFAULTS_HELP)]
struct Flags {
    /// JSON file with any of the settings below (snake_case keys)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Degrees of freedom
    #[arg(long = "n")]
    n: Option<usize>,
    /// Seed for the ChaCha8 generator
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random samples or base points
    #[arg(long)]
    samples: Option<usize>,
    /// Catalog Hamiltonian: free, harmonic, linear_potential, driven_oscillator, charged_uniform_B
    #[arg(long)]
    hamiltonian: Option<String>,
    /// Hamiltonian parameters as k=v,k=v
    #[arg(long, allow_hyphen_values = true)]
    params: Option<String>,
    /// Initial point p1..pn,q1..qn
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<String>,
    /// implicit_midpoint, stormer_verlet or rk4
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t1: Option<f64>,
    /// Threshold for the symplectic metric residual
    #[arg(long)]
    tol_sym: Option<f64>,
    /// Threshold for the degenerate line element residual
    #[arg(long)]
    tol_deg: Option<f64>,
    /// Threshold for the block decomposition
    #[arg(long)]
    tol_dec: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Fault injection: add this to entry (0,0) of every element
    #[arg(long, allow_hyphen_values = true)]
    perturb: Option<f64>,
    /// Canonical map: identity, scaling, phase_rotation, shear
    #[arg(long)]
    map: Option<String>,
    /// Map parameters as k=v
    #[arg(long, allow_hyphen_values = true)]
    map_params: Option<String>,
}

/// `--params` in a config file may be a `k=v` string or an object.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ParamsInput {
    Text(String),
    Map(Params),
}

impl ParamsInput {
    fn resolve(self) -> Result<Params, Error> {
        match self {
            ParamsInput::Text(s) => Params::parse(&s),
            ParamsInput::Map(p) => Ok(p),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<usize>,
    seed: Option<u64>,
    samples: Option<usize>,
    hamiltonian: Option<String>,
    params: Option<ParamsInput>,
    y0: Option<Vec<f64>>,
    method: Option<String>,
    dt: Option<f64>,
    t0: Option<f64>,
    t1: Option<f64>,
    tol_sym: Option<f64>,
    tol_deg: Option<f64>,
    tol_dec: Option<f64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    perturb: Option<f64>,
    map: Option<String>,
    map_params: Option<ParamsInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    GroupCheck,
    Flow,
    Verify,
    Noncommute,
    Transform,
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub hamiltonian: String,
    pub params: Params,
    pub y0: Option<Vec<f64>>,
    pub method: Method,
    pub dt: f64,
    pub t0: f64,
    /// `None` for verify without an explicit horizon.
    pub t1: Option<f64>,
    pub tol_sym: f64,
    pub tol_deg: f64,
    pub tol_dec: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub perturb: Option<f64>,
    pub map: String,
    pub map_params: Params,
}

/// A configuration or usage error, reported with exit status 2.
#[derive(Debug)]
struct ConfigError(String);

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

fn config_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn parse_list(s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().map_err(|_| config_err(format!("`{x}` is not a number"))))
        .collect()
}

fn positive(name: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(config_err(format!("--{name} must be positive and finite, got {x}")))
    }
}

fn resolve(command: CommandKind, flags: Flags) -> Result<RunConfig, ConfigError> {
    let file = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| config_err(format!("invalid config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let hamiltonian = flags.hamiltonian.or(file.hamiltonian).unwrap_or_else(|| {
        if command == CommandKind::Verify { "all" } else { "harmonic" }.to_string()
    });
    let params = match flags.params {
        Some(s) => Params::parse(&s)?,
        None => file.params.map(ParamsInput::resolve).transpose()?.unwrap_or_default(),
    };
    let map_params = match flags.map_params {
        Some(s) => Params::parse(&s)?,
        None => file.map_params.map(ParamsInput::resolve).transpose()?.unwrap_or_default(),
    };
    let default_n = match command {
        CommandKind::GroupCheck | CommandKind::Noncommute => 2,
        _ if hamiltonian == "charged_uniform_B" => 2,
        _ => 1,
    };
    let n = flags.n.or(file.n).unwrap_or(default_n);
    if n == 0 {
        return Err(config_err("--n must be at least 1"));
    }
    let y0 = match flags.y0 {
        Some(s) => Some(parse_list(&s)?),
        None => file.y0,
    };
    if let Some(y) = &y0 {
        if y.len() != 2 * n {
            return Err(config_err(format!("--y0 needs {} values for n = {n}, got {}", 2 * n, y.len())));
        }
    }
    let method: Method = flags
        .method
        .or(file.method)
        .unwrap_or_else(|| "implicit_midpoint".into())
        .parse()
        .map_err(|e: Error| config_err(format!("unknown method: {e}")))?;
    let default_dt = if command == CommandKind::Verify { 1e-4 } else { 1e-3 };
    let dt = positive("dt", flags.dt.or(file.dt).unwrap_or(default_dt))?;
    let t0 = flags.t0.or(file.t0).unwrap_or(0.0);
    let t1 = flags.t1.or(file.t1).or(match command {
        CommandKind::Flow => Some(10.0),
        CommandKind::Transform => Some(5.0),
        _ => None,
    });
    if !t0.is_finite() || t1.is_some_and(|t| !t.is_finite()) {
        return Err(config_err("times must be finite"));
    }
    if let Some(t1) = t1 {
        let ordered = match command {
            CommandKind::Verify => t1 >= t0,
            _ => t1 > t0,
        };
        if !ordered {
            return Err(config_err(format!("need --t1 > --t0, got {t0} and {t1}")));
        }
    }
    let samples = flags.samples.or(file.samples).unwrap_or(match command {
        CommandKind::GroupCheck => 1000,
        CommandKind::Verify => 2,
        _ => 5,
    });
    if samples == 0 {
        return Err(config_err("--samples must be at least 1"));
    }
    let jobs = flags.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(config_err("--jobs must be at least 1"));
    }
    let perturb = flags.perturb.or(file.perturb);
    if perturb.is_some_and(|p| !p.is_finite()) {
        return Err(config_err("--perturb must be finite"));
    }
    let format = flags.format.or(file.format).unwrap_or(if command == CommandKind::Flow {
        Format::Csv
    } else {
        Format::Json
    });

    let cfg = RunConfig {
        command,
        n,
        seed: flags.seed.or(file.seed).unwrap_or(42),
        samples,
        hamiltonian,
        params,
        y0,
        method,
        dt,
        t0,
        t1,
        tol_sym: positive("tol-sym", flags.tol_sym.or(file.tol_sym).unwrap_or(1e-6))?,
        tol_deg: positive("tol-deg", flags.tol_deg.or(file.tol_deg).unwrap_or(1e-8))?,
        tol_dec: positive("tol-dec", flags.tol_dec.or(file.tol_dec).unwrap_or(1e-5))?,
        format,
        out: flags.out.or(file.out),
        jobs,
        perturb,
        map: flags.map.or(file.map).unwrap_or_else(|| "identity".into()),
        map_params,
    };

    // construct everything once so that bad names and parameters fail early
    let dim = cfg.dim()?;
    match command {
        CommandKind::Flow | CommandKind::Transform => {
            catalog(&cfg.hamiltonian, dim, &cfg.params)?;
        }
        CommandKind::Verify => {
            cfg.verify_hamiltonians()?;
        }
        CommandKind::Noncommute => {
            cfg.force_velocity()?;
        }
        CommandKind::GroupCheck => {}
    }
    if command == CommandKind::Transform {
        builtin_canonical_map(&cfg.map, dim, &cfg.map_params)?;
    }
    Ok(cfg)
}

impl RunConfig {
    fn dim(&self) -> Result<Dimension, ConfigError> {
        Ok(Dimension::new(self.n)?)
    }

    fn integrator(&self) -> Integrator {
        Integrator::new(self.method, self.dt)
    }

    fn initial_point(&self) -> PhaseVector {
        match &self.y0 {
            Some(y) => PhaseVector::from_column_slice(y),
            None => PhaseVector::from_fn(2 * self.n, |i, _| if i < self.n { 0.0 } else { 1.0 }),
        }
    }

    fn verify_hamiltonians(&self) -> Result<Vec<CatalogHamiltonian>, ConfigError> {
        let names: Vec<&str> = if self.hamiltonian == "all" {
            if !self.params.is_empty() {
                return Err(config_err("--params needs a single --hamiltonian"));
            }
            CATALOG_NAMES.to_vec()
        } else {
            vec![self.hamiltonian.as_str()]
        };
        names
            .into_iter()
            .map(|name| {
                let n = if name == "charged_uniform_B" { 2 } else { self.n };
                Ok(catalog(name, Dimension::new(n)?, &self.params)?)
            })
            .collect()
    }

    fn force_velocity(&self) -> Result<(DVector<f64>, DVector<f64>), ConfigError> {
        let allowed: Vec<String> = (1..=self.n).flat_map(|i| [format!("f{i}"), format!("v{i}")]).collect();
        let allowed: Vec<&str> = allowed.iter().map(String::as_str).collect();
        self.params.check_keys(&allowed)?;
        let unit = |i: usize| if i == 0 { 1.0 } else { 0.0 };
        let (f, v) = if self.params.is_empty() {
            (DVector::from_fn(self.n, |i, _| unit(i)), DVector::from_fn(self.n, |i, _| unit(i)))
        } else {
            (
                DVector::from_fn(self.n, |i, _| self.params.get_or(&format!("f{}", i + 1), 0.0)),
                DVector::from_fn(self.n, |i, _| self.params.get_or(&format!("v{}", i + 1), 0.0)),
            )
        };
        Ok((f, v))
    }

    fn echo(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }
}

/// What a finished command hands back: text for the terminal, an optional
/// artifact for `--out`, and whether every check passed.
struct Outcome {
    text: String,
    artifact: Option<Vec<u8>>,
    passed: bool,
}

enum Failure {
    Config(ConfigError),
    Runtime(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out` and diagnostics to `err`. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let (kind, flags) = match cli.command {
        Command::GroupCheck(f) => (CommandKind::GroupCheck, f),
        Command::Flow(f) => (CommandKind::Flow, f),
        Command::Verify(f) => (CommandKind::Verify, f),
        Command::Noncommute(f) => (CommandKind::Noncommute, f),
        Command::Transform(f) => (CommandKind::Transform, f),
    };
    let result = resolve(kind, flags).map_err(Failure::from).and_then(|cfg| {
        let outcome = match cfg.command {
            CommandKind::GroupCheck => run_group_check(&cfg),
            CommandKind::Flow => run_flow(&cfg),
            CommandKind::Verify => run_verify(&cfg),
            CommandKind::Noncommute => run_noncommute(&cfg),
            CommandKind::Transform => run_transform(&cfg),
        }?;
        Ok((cfg, outcome))
    });
    match result {
        Ok((cfg, outcome)) => {
            let _ = write!(out, "{}", outcome.text);
            if let (Some(path), Some(bytes)) = (&cfg.out, &outcome.artifact) {
                if let Err(e) = write_file(path, bytes) {
                    let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
                    return 2;
                }
                let _ = writeln!(out, "wrote {}", path.display());
            }
            if outcome.passed {
                0
            } else {
                1
            }
        }
        Err(Failure::Config(e)) => {
            let _ = writeln!(err, "error: {}\n\nRun with --help for usage.", e.0);
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

/// Entry point for the binary.
pub fn main_exit_code() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn write_file(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)
}

fn to_json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn records_csv(records: &[CheckRecord]) -> Vec<u8> {
    let mut s = String::from("check,passed,max_residual,inputs\n");
    for r in records {
        let inputs = serde_json::to_string(&r.inputs).unwrap_or_default().replace('"', "\"\"");
        let _ = writeln!(s, "{},{},{:.16e},\"{inputs}\"", r.check, r.passed, r.max_residual());
    }
    s.into_bytes()
}

fn records_artifact(cfg: &RunConfig, records: &[CheckRecord], extra: Value) -> Vec<u8> {
    match cfg.format {
        Format::Csv => records_csv(records),
        Format::Json => to_json_bytes(&json!({
            "config": cfg.echo(),
            "records": records,
            "summary": SuiteSummary::of(records),
            "details": extra,
        })),
    }
}

fn show_params(p: &Params) -> String {
    if p.is_empty() {
        "defaults".into()
    } else {
        p.to_string()
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "FAIL"
    }
}

fn run_group_check(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let dim = cfg.dim()?;
    let gc = GroupCheckConfig {
        perturb: cfg.perturb,
        jobs: cfg.jobs,
        ..GroupCheckConfig::new(dim, cfg.seed, cfg.samples)
    };
    let suites = group_check(&gc)?;
    let mut inputs = Map::new();
    inputs.insert("n".into(), json!(cfg.n));
    inputs.insert("seed".into(), json!(cfg.seed));
    inputs.insert("samples".into(), json!(cfg.samples));
    inputs.insert("perturb".into(), json!(cfg.perturb));
    let records: Vec<CheckRecord> = suites.iter().map(|s| s.to_record(inputs.clone())).collect();
    let summary = SuiteSummary::of(&records);

    let mut text = format!("group-check n={} seed={} samples={}", cfg.n, cfg.seed, cfg.samples);
    if let Some(p) = cfg.perturb {
        let _ = write!(text, " perturb={p}");
    }
    let _ = writeln!(text, "\n{:<24}{:>14}{:>10}  result", "suite", "max_residual", "tol");
    for s in &suites {
        let _ = writeln!(text, "{:<24}{:>14.3e}{:>10.0e}  {}", s.name, s.max_residual, s.tol, verdict(s.passed));
    }
    let _ = writeln!(text, "{}/{} suites passed", summary.passed, summary.total);
    if !summary.all_passed() {
        let _ = writeln!(text, "failing suites: {}", summary.failed_checks.join(", "));
    }
    Ok(Outcome {
        artifact: Some(records_artifact(cfg, &records, Value::Null)),
        passed: summary.all_passed(),
        text,
    })
}

fn run_flow(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let dim = cfg.dim()?;
    let h = catalog(&cfg.hamiltonian, dim, &cfg.params)?;
    let t1 = cfg.t1.expect("flow always has t1");
    let traj = integrate(&h, &cfg.initial_point(), cfg.t0, t1, &cfg.integrator())?;
    let summary = flow_summary(&h, &traj)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "flow {} ({}) method={} dt={} t=[{}, {}]",
        h.name(),
        show_params(h.params()),
        traj.method,
        traj.dt,
        cfg.t0,
        t1
    );
    let _ = writeln!(text, "samples          {}", summary.samples);
    let _ = writeln!(text, "H start          {:.16e}", summary.h_start);
    let _ = writeln!(text, "H end            {:.16e}", summary.h_end);
    let _ = writeln!(text, "max |H - H0|     {:.3e}", summary.max_energy_drift);
    let _ = writeln!(text, "e end            {:.16e}", summary.e_end);
    if summary.autonomous {
        let _ = writeln!(text, "autonomous: energy is conserved by the exact flow; drift above is the method's");
    }
    let a = &summary.audit;
    let _ = writeln!(
        text,
        "energy audit     v.dp {:.6e}  -f.dq {:.6e}  r.dt {:.6e}  dH {:.6e}  residual {:.3e}",
        a.kinetic, a.work, a.power, a.delta_h, a.residual
    );
    if let Some(g) = &summary.gyration {
        let _ = writeln!(
            text,
            "gyration radius  fit {:.12e}  m|v|c/(eB) {:.12e}  relative error {:.3e}",
            g.radius_fit, g.radius_theory, g.relative_error
        );
    }

    let artifact = match cfg.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &traj).map_err(|e| config_err(e.to_string()))?;
            buf
        }
        Format::Json => {
            let meta = TrajectoryMetadata {
                method: traj.method,
                dt: traj.dt,
                hamiltonian: h.name().to_string(),
                params: h.params().clone(),
                seed: cfg.seed,
                n: cfg.n,
                t0: cfg.t0,
                t1,
            };
            let doc = json!({
                "config": cfg.echo(),
                "summary": summary,
                "trajectory": TrajectoryJson::new(meta, &traj),
            });
            to_json_bytes(&doc)
        }
    };
    Ok(Outcome {
        text,
        artifact: Some(artifact),
        passed: true,
    })
}

fn run_verify(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let horizons: Vec<f64> = match cfg.t1 {
        Some(t1) => vec![t1 - cfg.t0],
        None => vec![0.1, 1.0],
    };
    let mut cases = Vec::new();
    for h in cfg.verify_hamiltonians()? {
        for mut z0 in random_base_points(h.dim(), cfg.seed, cfg.samples) {
            // base times are offsets from --t0
            z0.t += cfg.t0;
            for (k, &s) in horizons.iter().enumerate() {
                cases.push(VerifyCase {
                    hamiltonian: h.clone(),
                    z0: z0.clone(),
                    s,
                    generator: k == 0,
                });
            }
        }
    }
    let tol = Tolerances {
        symplectic: cfg.tol_sym,
        degenerate: cfg.tol_deg,
        decomposition: cfg.tol_dec,
    };
    let records = verify_cases(&cases, &cfg.integrator(), &JacobianConfig::flow(), &tol, cfg.jobs)?;
    let summary = SuiteSummary::of(&records);

    let mut text = format!(
        "verify method={} dt={} fd=central_4th h={:e} tol_sym={:e} tol_deg={:e} tol_dec={:e} tol_gen={:e}\n",
        cfg.method,
        cfg.dt,
        JacobianConfig::flow().h,
        tol.symplectic,
        tol.degenerate,
        tol.decomposition,
        GENERATOR_TOL
    );
    for r in &records {
        let name = r.inputs.get("hamiltonian").and_then(Value::as_str).unwrap_or("?");
        let s = r.inputs.get("s").map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            text,
            "{:<16}{:<20}s={:<6}sym {:>10.3e}  deg {:>10.3e}  {}",
            r.check,
            name,
            s,
            r.residuals.get("symplectic").copied().unwrap_or(f64::NAN),
            r.residuals.get("degenerate").copied().unwrap_or(f64::NAN),
            verdict(r.passed)
        );
    }
    let _ = writeln!(text, "{}/{} checks passed", summary.passed, summary.total);
    Ok(Outcome {
        artifact: Some(records_artifact(cfg, &records, Value::Null)),
        passed: summary.all_passed(),
        text,
    })
}

fn run_noncommute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let (f, v) = cfg.force_velocity()?;
    let rep = noncommute(&f, &v)?;
    let mut text = String::new();
    let _ = writeln!(text, "noncommute f={:?} v={:?}", rep.f, rep.v);
    let _ = writeln!(
        text,
        "force . boost    w={:?} r={}",
        rep.force_then_boost.w, rep.force_then_boost.r
    );
    let _ = writeln!(
        text,
        "boost . force    w={:?} r={}",
        rep.boost_then_force.w, rep.boost_then_force.r
    );
    let _ = writeln!(text, "discrepancy      {}  (2|f.v| = {})", rep.discrepancy, rep.expected_magnitude);
    let _ = writeln!(text, "commute          {}", rep.commute);
    let _ = writeln!(text, "{:>8}{:>8}{:>16}{:>16}{:>12}", "a", "b", "disc(af,bv)", "ab.disc(f,v)", "residual");
    for row in &rep.sweep {
        let _ = writeln!(
            text,
            "{:>8}{:>8}{:>16}{:>16}{:>12.1e}",
            row.force_scale, row.velocity_scale, row.discrepancy, row.bilinear_reference, row.residual
        );
    }
    let _ = writeln!(text, "bilinear         {}", verdict(rep.passed));

    let artifact = match cfg.format {
        Format::Json => to_json_bytes(&json!({ "config": cfg.echo(), "report": rep })),
        Format::Csv => {
            let mut s = String::from("force_scale,velocity_scale,discrepancy,bilinear_reference,residual\n");
            for row in &rep.sweep {
                let _ = writeln!(
                    s,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    row.force_scale, row.velocity_scale, row.discrepancy, row.bilinear_reference, row.residual
                );
            }
            s.into_bytes()
        }
    };
    Ok(Outcome {
        text,
        artifact: Some(artifact),
        passed: rep.passed,
    })
}

fn run_transform(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let dim = cfg.dim()?;
    let h = catalog(&cfg.hamiltonian, dim, &cfg.params)?;
    let map = builtin_canonical_map(&cfg.map, dim, &cfg.map_params)?;
    let points: Vec<PhaseVector> = random_base_points(dim, cfg.seed, cfg.samples)
        .into_iter()
        .map(|z| z.y)
        .collect();
    let t1 = cfg.t1.expect("transform always has t1");
    let rep = transform_demo(
        &h,
        &map,
        &points,
        &cfg.initial_point(),
        cfg.t0,
        t1,
        &cfg.integrator(),
        cfg.tol_sym,
    )?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "transform {} ({}) by {} ({})",
        h.name(),
        show_params(h.params()),
        map.name(),
        show_params(&cfg.map_params)
    );
    let _ = writeln!(text, "{:<44}{:>22}{:>22}", "y~", "H~(y~)", "H(y~)");
    for row in &rep.table {
        let coords: Vec<String> = row.y_tilde.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(text, "{:<44}{:>22.12e}{:>22.12e}", coords.join(","), row.h_tilde, row.h_at_same_point);
    }
    let _ = writeln!(text, "map symplectic residual   {:.3e}", rep.map_symplectic_residual);
    let _ = writeln!(text, "map round trip error      {:.3e}", rep.map_round_trip_error);
    let _ = writeln!(
        text,
        "max |map(phi(t)) - phi~(t)| {:.3e}  (tol {:e})  {}",
        rep.max_deviation,
        rep.tol,
        verdict(rep.passed)
    );

    let artifact = match cfg.format {
        Format::Json => to_json_bytes(&json!({ "config": cfg.echo(), "report": rep })),
        Format::Csv => {
            let mut s = String::new();
            let m = dim.phase_len();
            let cols: Vec<String> = (1..=dim.n())
                .map(|i| format!("p{i}"))
                .chain((1..=dim.n()).map(|i| format!("q{i}")))
                .collect();
            let _ = writeln!(s, "{},h_tilde,h_at_preimage,h_at_same_point", cols.join(","));
            for row in &rep.table {
                for x in row.y_tilde.iter().take(m) {
                    let _ = write!(s, "{x:.16e},");
                }
                let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", row.h_tilde, row.h_at_preimage, row.h_at_same_point);
            }
            s.into_bytes()
        }
    };
    Ok(Outcome {
        text,
        artifact: Some(artifact),
        passed: rep.passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("hsp").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn zero_dimension_is_a_usage_error() {
        let (code, _, err) = run_args(&["group-check", "--n", "0"]);
        assert_eq!(code, 2);
        assert!(err.contains("--n"));
    }

    #[test]
    fn unknown_flag_and_subcommand() {
        assert_eq!(run_args(&["group-check", "--bogus"]).0, 2);
        assert_eq!(run_args(&["frobnicate"]).0, 2);
        assert_eq!(run_args(&[]).0, 2);
    }

    #[test]
    fn help_lists_defaults() {
        let (code, out, _) = run_args(&["flow", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("implicit_midpoint") && out.contains("1e-8"));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        for args in [
            &["flow", "--method", "euler"][..],
            &["flow", "--hamiltonian", "nope"],
            &["flow", "--params", "m=-1"],
            &["flow", "--params", "mass=2"],
            &["flow", "--dt", "0"],
            &["flow", "--t0", "1", "--t1", "1"],
            &["flow", "--y0", "1,2,3"],
            &["flow", "--hamiltonian", "charged_uniform_B", "--n", "1"],
            &["transform", "--map", "scaling", "--map-params", "lambda=0"],
            &["noncommute", "--params", "x1=1"],
            &["verify", "--jobs", "0"],
        ] {
            assert_eq!(run_args(args).0, 2, "{args:?}");
        }
    }

    #[test]
    fn verlet_on_magnetic_field_is_a_runtime_failure() {
        let (code, _, err) = run_args(&["flow", "--hamiltonian", "charged_uniform_B", "--method", "stormer_verlet"]);
        assert_eq!(code, 1);
        assert!(err.contains("separable"), "{err}");
    }

    #[test]
    fn noncommute_default_is_two() {
        let (code, out, _) = run_args(&["noncommute"]);
        assert_eq!(code, 0);
        assert!(out.contains("discrepancy      -2"), "{out}");
    }

    #[test]
    fn config_file_and_flag_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        fs::write(&cfg, r#"{"n": 1, "seed": 7, "samples": 20}"#).unwrap();
        let cfg = cfg.to_str().unwrap();
        let (code, out, _) = run_args(&["group-check", "--config", cfg, "--seed", "9"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("group-check n=1 seed=9 samples=20"), "{out}");

        let bad = dir.path().join("bad.json");
        fs::write(&bad, r#"{"n": 1, "colour": "red"}"#).unwrap();
        assert_eq!(run_args(&["group-check", "--config", bad.to_str().unwrap()]).0, 2);
        assert_eq!(run_args(&["group-check", "--config", "/nonexistent/x.json"]).0, 2);
    }

    #[test]
    fn config_params_as_object() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        fs::write(&cfg, r#"{"hamiltonian": "harmonic", "params": {"k": 4}, "t1": 1}"#).unwrap();
        let (code, out, _) = run_args(&["flow", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.contains("k=4"), "{out}");
    }
}
