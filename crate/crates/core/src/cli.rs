//! Command-line frontend for the `qumode` binary.
//!
//! Every JSON output is an envelope holding the command name, the fully
//! resolved configuration, the result, any warnings and, unless
//! `--no-timestamp` is given, a Unix timestamp.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dqc1::{estimate_trace_with, required_samples, trace_mixture, variance_bounds, TraceOptions};
use crate::error::Error;
use crate::estimation::{
    estimate_phases_with_threshold, success_probability, time_energy_check, ExperimentConfig, Histogram,
    DEFAULT_PEAK_THRESHOLD,
};
use crate::factoring::factor;
use crate::numtheory::ceil_log2;
use crate::qumode::{
    fft_oracle_distribution, momentum_distribution, sample_momentum_with, write_density_csv,
    write_samples_binary, write_samples_csv, GridSpec, QumodeWavefunction, SamplingOptions, DEFAULT_CHUNK_SIZE,
    MIN_GRID_POINTS,
};
use crate::resources::{resource_report, ResourceContext};
use crate::spectrum::{exact_normalized_trace, ModularProblem, PhaseSpectrum};

/// Directory for relative output paths and default output files.
pub const OUT_DIR_ENV: &str = "QUMODE_OUT_DIR";

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const EMPTY_ESTIMATE: i32 = 3;
    pub const REJECTED: i32 = 4;
    pub const BUDGET_EXHAUSTED: i32 = 5;
}

const AFTER_HELP: &str = "\
CSV outputs:
  density     p_E,density                 one row per grid point
  sample      p_E                         one row per draw; --format binary writes
                                          raw little-endian f64 with no header
  histogram   bin_center,mass             phase-est --histogram, occupied bins only
  spectrum    num,den,phase,multiplicity  spectrum --format csv

Exit codes:
  0 ok, 1 I/O failure, 2 usage or validation error, 3 no peak above threshold,
  4 N rejected by classical checks, 5 run budget exhausted

--config FILE reads a JSON object whose keys are flag names (\"s0\", \"delta-E\",
\"N\", ...). Flags on the command line take precedence. QUMODE_OUT_DIR sets the
directory for relative output paths and for default output files.";

#[derive(Parser, Debug)]
#[command(name = "qumode", version, about = "Squeezed-qumode phase estimation, trace estimation and factoring")]
#[command(after_help = AFTER_HELP, args_override_self = true)]
pub struct Cli {
    /// JSON file of flag values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Leave the timestamp out of JSON output.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Worker threads for sampling. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output file. Defaults to stdout, or to a file in QUMODE_OUT_DIR when set.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenphases of l -> lq mod N.
    #[command(args_override_self = true)]
    Spectrum(SpectrumArgs),
    /// Recover eigenphases from sampled momentum outcomes.
    #[command(args_override_self = true)]
    PhaseEst(PhaseEstArgs),
    /// Estimate Tr(U)/2^n from samples at tau = 1.
    #[command(args_override_self = true)]
    Trace(TraceArgs),
    /// Factor N by order finding.
    #[command(args_override_self = true)]
    Factor(FactorArgs),
    /// Momentum density on a grid, as CSV.
    #[command(args_override_self = true)]
    Density(DensityArgs),
    /// Raw momentum samples.
    #[command(args_override_self = true)]
    Sample(SampleArgs),
    /// Squeezing, photon number and qudit dimension for a task.
    #[command(args_override_self = true)]
    Resources(ResourcesArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SourceArgs {
    /// Spectrum JSON: {"n": .., "entries": [{"num", "den", "mult"} or {"phase", "mult"}]}.
    #[arg(long = "spec-file", value_name = "FILE", conflicts_with_all = ["modulus", "base", "phase"])]
    pub spec_file: Option<PathBuf>,
    /// Modulus of the modular-multiplication unitary.
    #[arg(long = "N", requires = "base")]
    #[serde(rename = "N")]
    pub modulus: Option<u64>,
    /// Base of the modular-multiplication unitary.
    #[arg(long = "q", requires = "modulus")]
    #[serde(rename = "q")]
    pub base: Option<u64>,
    /// Single eigenphase on a one-state register.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["modulus", "base"])]
    pub phase: Option<f64>,
}

impl SourceArgs {
    fn load(&self) -> Result<PhaseSpectrum, CliError> {
        if let Some(path) = &self.spec_file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            return Ok(PhaseSpectrum::from_json(&text)?);
        }
        if let (Some(n), Some(q)) = (self.modulus, self.base) {
            return Ok(ModularProblem::new(n, q)?.spectrum());
        }
        if let Some(phi) = self.phase {
            return Ok(PhaseSpectrum::degenerate(0, phi)?);
        }
        Err(CliError::Usage(
            "no spectrum source; pass --spec-file, --N with --q, or --phase".into(),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumFormat {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub modulus: u64,
    #[arg(long = "q")]
    #[serde(rename = "q")]
    pub base: u64,
    #[arg(long, value_enum, default_value_t = SpectrumFormat::Json)]
    pub format: SpectrumFormat,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PhaseEstArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Squeezing factor. Defaults to the smallest s0 >= 1 with T_bound tau s0 delta_E >= 1.
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Target eigenvalue accuracy.
    #[arg(long = "delta-E", default_value_t = 0.01)]
    pub delta_e: f64,
    /// Measurement budget.
    #[arg(long = "t-bound", default_value_t = 100)]
    pub t_bound: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minimum mass of a reported peak.
    #[arg(long, default_value_t = DEFAULT_PEAK_THRESHOLD)]
    pub threshold: f64,
    /// Also write the histogram as CSV (bin_center,mass).
    #[arg(long, value_name = "PATH")]
    pub histogram: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TraceArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
    #[arg(long = "delta-re", default_value_t = 0.05)]
    pub delta_re: f64,
    #[arg(long = "delta-im", default_value_t = 0.05)]
    pub delta_im: f64,
    /// Sample count. Defaults to the CLT budget for the requested delta.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report the raw mean of exp(i p_E) without the squeezing correction.
    #[arg(long)]
    pub no_correction: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FactorArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub modulus: u64,
    /// Squeezing factor. Defaults to 2^(2n)/tau with n = ceil(log2 N).
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Total number of order-finding runs across all bases.
    #[arg(long = "t-bound", default_value_t = 1000)]
    pub t_bound: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StateArgs {
    /// Squeezing factor of the control state.
    #[arg(long, default_value_t = 1.0, conflicts_with_all = ["alpha_re", "alpha_im"])]
    pub s0: f64,
    /// Real part of a coherent control amplitude.
    #[arg(long = "alpha-re", allow_hyphen_values = true)]
    pub alpha_re: Option<f64>,
    /// Imaginary part of a coherent control amplitude.
    #[arg(long = "alpha-im", allow_hyphen_values = true)]
    pub alpha_im: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
}

impl StateArgs {
    fn wavefunction(&self) -> Result<QumodeWavefunction, CliError> {
        let psi = if self.alpha_re.is_some() || self.alpha_im.is_some() {
            let alpha = Complex64::new(self.alpha_re.unwrap_or(0.0), self.alpha_im.unwrap_or(0.0));
            QumodeWavefunction::coherent(alpha)?
        } else {
            QumodeWavefunction::squeezed(self.s0)?
        };
        Ok(psi.with_x0(self.x0)?)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = MIN_GRID_POINTS)]
    pub points: usize,
    /// Grid start; defaults to 10 peak widths below the lowest mean.
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    /// Grid end; defaults to 10 peak widths above the highest mean.
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    /// Evaluate by FFT of the position wavefunction instead of the closed form.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Csv,
    Binary,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draws per independent generator stream.
    #[arg(long = "chunk-size", default_value_t = DEFAULT_CHUNK_SIZE)]
    pub chunk_size: usize,
    #[arg(long, value_enum, default_value_t = SampleFormat::Csv)]
    pub format: SampleFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextKind {
    Dqc1,
    Factoring,
    PhaseEstimation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ResourcesArgs {
    #[arg(long, value_enum)]
    pub context: ContextKind,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub modulus: Option<u64>,
    #[arg(long = "delta-E", default_value_t = 0.01)]
    pub delta_e: f64,
    #[arg(long = "t-bound", default_value_t = 100)]
    pub t_bound: u64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Lib(Error::Rejected { .. }) => exit::REJECTED,
            CliError::Lib(Error::BudgetExhausted { .. }) => exit::BUDGET_EXHAUSTED,
            CliError::Lib(Error::Io(_)) => exit::FAILURE,
            CliError::Lib(_) => exit::USAGE,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

/// Where results go and how envelopes are stamped.
struct Sink<'a> {
    out: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    no_timestamp: bool,
    stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    fn write(&mut self, command: &str, ext: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = match (&self.out, &self.out_dir) {
            (Some(p), _) => Some(self.resolve(p)),
            (None, Some(dir)) => Some(dir.join(format!("{command}.{ext}"))),
            (None, None) => None,
        };
        match target {
            Some(path) => write_file(&path, bytes),
            None => Ok(self.stdout.write_all(bytes)?),
        }
    }

    fn envelope(&self, command: &str, config: Value, result: Value, warnings: &[String]) -> Value {
        let mut v = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "result": result,
            "warnings": warnings,
        });
        if !self.no_timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            v["timestamp"] = json!(secs);
        }
        v
    }

    fn write_json(&mut self, command: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        text.push('\n');
        self.write(command, "json", text.as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(fs::write(path, bytes)?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

/// Global flags that take a value, so their values are never mistaken for
/// a subcommand name.
const VALUE_GLOBALS: [&str; 3] = ["--config", "--threads", "--out"];

/// Splices the flags of a `--config` JSON file in right after the
/// subcommand, ahead of every flag given on the command line.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut config = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            config = args.get(i + 1).cloned();
            i += 2;
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.into());
            i += 1;
        } else {
            i += 1;
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let path = PathBuf::from(path);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let map = match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => map,
        Ok(_) => return Err(CliError::Usage("config file must hold a JSON object".into())),
        Err(e) => return Err(CliError::Usage(format!("config file: {e}"))),
    };

    let mut flags: Vec<OsString> = Vec::new();
    let mut command = None;
    for (key, value) in &map {
        if key == "command" {
            command = value.as_str().map(str::to_string);
            continue;
        }
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let items = match value {
            Value::Array(items) => items.clone(),
            other => vec![other.clone()],
        };
        for item in items {
            match item {
                Value::Bool(true) => flags.push(flag.clone().into()),
                Value::Bool(false) | Value::Null => {}
                Value::String(s) => {
                    flags.push(flag.clone().into());
                    flags.push(s.into());
                }
                Value::Number(n) => {
                    flags.push(flag.clone().into());
                    flags.push(n.to_string().into());
                }
                _ => return Err(CliError::Usage(format!("config key {key}: unsupported value"))),
            }
        }
    }

    let names: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if VALUE_GLOBALS.contains(&a.as_ref()) {
            i += 2;
            continue;
        }
        if names.iter().any(|n| *n == a) {
            sub = Some(i);
            break;
        }
        i += 1;
    }
    let mut out = vec![args[0].clone()];
    match sub {
        Some(s) => {
            out.push(args[s].clone());
            out.extend(flags);
            out.extend(args[1..s].iter().cloned());
            out.extend(args[s + 1..].iter().cloned());
        }
        None => {
            if let Some(c) = command {
                out.push(c.into());
            }
            out.extend(flags);
            out.extend(args[1..].iter().cloned());
        }
    }
    Ok(out)
}

/// Runs the CLI with the process environment and standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, out_dir, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI against explicit streams and output directory.
pub fn run_with<I, T>(args: I, out_dir: Option<PathBuf>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            return e.code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let mut sink = Sink {
        out: cli.out.clone(),
        out_dir,
        no_timestamp: cli.no_timestamp,
        stdout,
    };
    match dispatch(&cli, &mut sink, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: &Cli, sink: &mut Sink, stderr: &mut dyn Write) -> Result<i32, CliError> {
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    match &cli.command {
        Command::Spectrum(a) => cmd_spectrum(a, sink),
        Command::PhaseEst(a) => cmd_phase_est(a, cli.threads, sink, stderr),
        Command::Trace(a) => cmd_trace(a, cli.threads, sink),
        Command::Factor(a) => cmd_factor(a, sink),
        Command::Density(a) => cmd_density(a, sink),
        Command::Sample(a) => cmd_sample(a, cli.threads, sink),
        Command::Resources(a) => cmd_resources(a, sink),
    }
}

fn cmd_spectrum(a: &SpectrumArgs, sink: &mut Sink) -> Result<i32, CliError> {
    let problem = ModularProblem::new(a.modulus, a.base)?;
    let spec = problem.spectrum();
    match a.format {
        SpectrumFormat::Json => {
            let trace = exact_normalized_trace(&spec, 1.0);
            let result = json!({
                "spectrum": spec,
                "order": problem.order(),
                "n_qubits": problem.n_qubits(),
                "cycle_lengths": problem.cycle_lengths(),
                "normalized_trace": {"re": trace.re, "im": trace.im},
            });
            let env = sink.envelope("spectrum", to_value(a), result, &[]);
            sink.write_json("spectrum", &env)?;
        }
        SpectrumFormat::Csv => {
            let mut text = String::from("num,den,phase,multiplicity\n");
            for e in spec.entries() {
                let (num, den) = match e.phase.as_fraction() {
                    Some((n, d)) => (n.to_string(), d.to_string()),
                    None => (String::new(), String::new()),
                };
                text.push_str(&format!("{num},{den},{},{}\n", e.phase.value(), e.multiplicity));
            }
            sink.write("spectrum", "csv", text.as_bytes())?;
        }
    }
    Ok(exit::OK)
}

fn cmd_phase_est(a: &PhaseEstArgs, threads: usize, sink: &mut Sink, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let spec = a.source.load()?;
    let s0 = a.s0.unwrap_or_else(|| (1.0 / (a.t_bound as f64 * a.tau * a.delta_e)).max(1.0));
    let cfg = ExperimentConfig {
        s0,
        tau: a.tau,
        x0: a.x0,
        samples: a.samples,
        seed: a.seed,
        delta_e: a.delta_e,
        t_bound: a.t_bound,
    };
    cfg.validate()?;
    let mut warnings = Vec::new();
    let check = time_energy_check(&cfg)?;
    if !check.satisfied {
        warnings.push(format!(
            "time-energy condition fails: T_bound erf(tau s0 delta_E) = {:.6e} < 1",
            check.margin
        ));
    }
    let mix = cfg.mixture(&spec)?;
    let opts = SamplingOptions {
        threads,
        ..Default::default()
    };
    let samples = sample_momentum_with(&mix, cfg.samples, cfg.seed, opts)?;
    let report = estimate_phases_with_threshold(&samples, &cfg, a.threshold)?;
    if let Some(path) = &a.histogram {
        let mut buf = Vec::new();
        Histogram::new(&samples, report.bin_width).write_csv(&mut buf)?;
        write_file(&sink.resolve(path), &buf)?;
    }
    for w in &warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let config = json!({
        "source": a.source,
        "experiment": cfg,
        "threshold": a.threshold,
        "histogram": a.histogram,
        "threads": threads,
    });
    let result = json!({
        "report": report,
        "success_probability": success_probability(&spec, &cfg)?,
        "time_energy": check,
    });
    let env = sink.envelope("phase-est", config, result, &warnings);
    sink.write_json("phase-est", &env)?;
    if report.peaks.is_empty() {
        let _ = writeln!(stderr, "error: no peak holds at least {} of the samples", a.threshold);
        return Ok(exit::EMPTY_ESTIMATE);
    }
    Ok(exit::OK)
}

fn cmd_trace(a: &TraceArgs, threads: usize, sink: &mut Sink) -> Result<i32, CliError> {
    let spec = a.source.load()?;
    let delta = Complex64::new(a.delta_re, a.delta_im);
    let samples_n = match a.samples {
        Some(n) => n,
        None => required_samples(delta, a.s0)? as usize,
    };
    let mix = trace_mixture(&spec, a.s0)?;
    let opts = SamplingOptions {
        threads,
        ..Default::default()
    };
    let samples = sample_momentum_with(&mix, samples_n, a.seed, opts)?;
    let est = estimate_trace_with(
        &samples,
        a.s0,
        TraceOptions {
            correct: !a.no_correction,
            target_delta: Some(delta),
        },
    )?;
    let exact = exact_normalized_trace(&spec, 1.0);
    let err = est.value - exact;
    let config = json!({
        "source": a.source,
        "s0": a.s0,
        "tau": 1.0,
        "delta": {"re": a.delta_re, "im": a.delta_im},
        "samples": samples_n,
        "seed": a.seed,
        "corrected": !a.no_correction,
        "threads": threads,
    });
    let result = json!({
        "estimate": est,
        "exact": {"re": exact.re, "im": exact.im},
        "within_delta": err.re.abs() <= a.delta_re && err.im.abs() <= a.delta_im,
        "variance": variance_bounds(&spec, a.s0)?,
    });
    let env = sink.envelope("trace", config, result, &[]);
    sink.write_json("trace", &env)?;
    Ok(exit::OK)
}

fn cmd_factor(a: &FactorArgs, sink: &mut Sink) -> Result<i32, CliError> {
    if !(a.tau > 0.0 && a.tau.is_finite()) {
        return Err(CliError::Usage(format!("tau must be positive, got {}", a.tau)));
    }
    let s0 = a
        .s0
        .unwrap_or_else(|| 2f64.powi(2 * ceil_log2(a.modulus.max(2)) as i32) / a.tau);
    let cfg = ExperimentConfig {
        s0,
        tau: a.tau,
        t_bound: a.t_bound,
        seed: a.seed,
        ..Default::default()
    };
    let config = json!({
        "N": a.modulus,
        "s0": s0,
        "tau": a.tau,
        "t_bound": a.t_bound,
        "seed": a.seed,
    });
    match factor(a.modulus, &cfg, a.seed) {
        Ok(res) => {
            let env = sink.envelope("factor", config, to_value(&res), &[]);
            sink.write_json("factor", &env)?;
            Ok(exit::OK)
        }
        Err(e @ (Error::Rejected { .. } | Error::BudgetExhausted { .. })) => {
            let mut env = sink.envelope("factor", config, Value::Null, &[]);
            env["error"] = json!({"message": e.to_string()});
            sink.write_json("factor", &env)?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_density(a: &DensityArgs, sink: &mut Sink) -> Result<i32, CliError> {
    let spec = a.source.load()?;
    let psi = a.state.wavefunction()?;
    let mut grid = GridSpec::covering(&spec, &psi, a.state.tau, a.points);
    if let Some(lo) = a.lo {
        grid.lo = lo;
    }
    if let Some(hi) = a.hi {
        grid.hi = hi;
    }
    if grid.points < 2 || !(grid.hi > grid.lo) {
        return Err(CliError::Usage("density grid needs hi > lo and at least 2 points".into()));
    }
    let mut buf = Vec::new();
    if a.oracle {
        let d = fft_oracle_distribution(&spec, &psi, a.state.tau, &grid)?;
        write_density_csv(&mut buf, d.points())?;
    } else {
        let mix = momentum_distribution(&spec, &psi, a.state.tau)?;
        write_density_csv(&mut buf, (0..grid.points).map(|j| {
            let p = grid.value(j);
            (p, mix.density_at(p))
        }))?;
    }
    sink.write("density", "csv", &buf)?;
    Ok(exit::OK)
}

fn cmd_sample(a: &SampleArgs, threads: usize, sink: &mut Sink) -> Result<i32, CliError> {
    let spec = a.source.load()?;
    let psi = a.state.wavefunction()?;
    let mix = momentum_distribution(&spec, &psi, a.state.tau)?;
    let opts = SamplingOptions {
        chunk_size: a.chunk_size,
        threads,
    };
    let samples = sample_momentum_with(&mix, a.samples, a.seed, opts)?;
    let mut buf = Vec::new();
    match a.format {
        SampleFormat::Csv => {
            write_samples_csv(&mut buf, &samples)?;
            sink.write("sample", "csv", &buf)?;
        }
        SampleFormat::Binary => {
            write_samples_binary(&mut buf, &samples)?;
            sink.write("sample", "bin", &buf)?;
        }
    }
    Ok(exit::OK)
}

fn cmd_resources(a: &ResourcesArgs, sink: &mut Sink) -> Result<i32, CliError> {
    let context = match a.context {
        ContextKind::Dqc1 => ResourceContext::Dqc1,
        ContextKind::Factoring => ResourceContext::Factoring {
            modulus: a
                .modulus
                .ok_or_else(|| CliError::Usage("--context factoring needs --N".into()))?,
        },
        ContextKind::PhaseEstimation => ResourceContext::PhaseEstimation {
            delta_e: a.delta_e,
            t_bound: a.t_bound,
            tau: a.tau,
        },
    };
    let report = resource_report(context)?;
    match a.format {
        ReportFormat::Json => {
            let env = sink.envelope("resources", to_value(a), to_value(&report), &[]);
            sink.write_json("resources", &env)?;
        }
        ReportFormat::Table => sink.write("resources", "txt", report.to_table().as_bytes())?,
    }
    Ok(exit::OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["qumode"];
        full.extend_from_slice(args);
        let code = run_with(full, None, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn json_of(text: &str) -> Value {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn spectrum_command() {
        let (code, out, _) = run_capture(&["spectrum", "--N", "15", "--q", "2", "--no-timestamp"]);
        assert_eq!(code, 0);
        let v = json_of(&out);
        assert_eq!(v["result"]["spectrum"]["entries"].as_array().unwrap().len(), 4);
        assert_eq!(v["result"]["order"], 4);
        assert!(v.get("timestamp").is_none());
        assert_eq!(v["config"]["N"], 15);

        let (code, _, err) = run_capture(&["spectrum", "--N", "15", "--q", "3"]);
        assert_eq!(code, exit::USAGE);
        assert!(err.contains("gcd(3, 15) = 3"), "{err}");

        let (code, out, _) = run_capture(&["spectrum", "--N", "4", "--q", "3"]);
        assert_eq!(code, 0);
        let entries = json_of(&out)["result"]["spectrum"]["entries"].clone();
        assert_eq!(entries, json!([{"num": 0, "den": 1, "mult": 3}, {"num": 1, "den": 2, "mult": 1}]));

        let (code, out, _) = run_capture(&["spectrum", "--N", "15", "--q", "2", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("num,den,phase,multiplicity\n0,1,0,6\n"));
    }

    #[test]
    fn phase_est_codes() {
        let (code, out, _) = run_capture(&["phase-est", "--phase", "1.5", "--no-timestamp"]);
        assert_eq!(code, 0);
        assert_eq!(json_of(&out)["result"]["report"]["peaks"].as_array().unwrap().len(), 1);

        let (code, out, err) = run_capture(&[
            "phase-est", "--phase", "1.5", "--delta-E", "1e-6", "--s0", "1", "--tau", "1", "--t-bound", "10",
        ]);
        assert_eq!(code, 0);
        assert!(err.contains("warning"));
        assert_eq!(json_of(&out)["warnings"].as_array().unwrap().len(), 1);

        let (code, _, _) = run_capture(&["phase-est", "--phase", "1.5", "--samples", "0"]);
        assert_eq!(code, exit::USAGE);

        let (code, _, _) = run_capture(&["phase-est", "--phase", "1.5", "--threshold", "1.5"]);
        assert_eq!(code, exit::EMPTY_ESTIMATE);

        let (code, _, _) = run_capture(&["phase-est"]);
        assert_eq!(code, exit::USAGE);
    }

    #[test]
    fn trace_command() {
        let (code, out, _) = run_capture(&["trace", "--phase", "0", "--no-timestamp"]);
        assert_eq!(code, 0);
        let v = json_of(&out);
        assert!(v["result"]["within_delta"].as_bool().unwrap());
        assert_eq!(v["config"]["samples"], 452);

        assert_eq!(run_capture(&["trace"]).0, exit::USAGE);
    }

    #[test]
    fn factor_codes() {
        let (code, out, _) = run_capture(&["factor", "--N", "15", "--seed", "7", "--no-timestamp"]);
        assert_eq!(code, 0);
        assert_eq!(json_of(&out)["result"]["factors"], json!([3, 5]));

        let (code, _, err) = run_capture(&["factor", "--N", "17"]);
        assert_eq!(code, exit::REJECTED);
        assert!(err.contains("prime"));

        let exhausted = (0..20).any(|seed| {
            let s = seed.to_string();
            run_capture(&["factor", "--N", "15", "--s0", "1", "--tau", "1", "--t-bound", "1", "--seed", &s]).0
                == exit::BUDGET_EXHAUSTED
        });
        assert!(exhausted);
    }

    #[test]
    fn resources_command() {
        let (code, out, _) = run_capture(&["resources", "--context", "dqc1", "--no-timestamp"]);
        assert_eq!(code, 0);
        let r = json_of(&out)["result"].clone();
        assert_eq!((r["s0"].as_f64(), r["qudit_dim"].as_f64()), (Some(1.0), Some(2.0)));

        let (code, out, _) = run_capture(&["resources", "--context", "factoring", "--N", "15", "--format", "table"]);
        assert_eq!(code, 0);
        assert!(out.contains("qudit_dim_ideal"));
        assert_eq!(run_capture(&["resources", "--context", "factoring"]).0, exit::USAGE);
    }

    #[test]
    fn sample_and_density() {
        let (code, out, _) = run_capture(&["sample", "--phase", "0.5", "--samples", "10"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 11);
        assert_eq!(out.lines().next(), Some("p_E"));

        let (code, out, _) = run_capture(&["density", "--N", "15", "--q", "2", "--s0", "4"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), MIN_GRID_POINTS + 1);

        let (code, _, _) = run_capture(&["density", "--phase", "0", "--alpha-re", "1", "--alpha-im", "1", "--oracle"]);
        assert_eq!(code, 0);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let one = run_capture(&["sample", "--N", "15", "--q", "2", "--samples", "5000", "--chunk-size", "512"]);
        let four = run_capture(&[
            "sample", "--N", "15", "--q", "2", "--samples", "5000", "--chunk-size", "512", "--threads", "4",
        ]);
        assert_eq!(one.1, four.1);
    }

    #[test]
    fn config_file_and_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"N": 15, "q": 2, "format": "csv", "no_timestamp": true}"#).unwrap();
        let p = path.to_str().unwrap();

        let (code, out, _) = run_capture(&["spectrum", "--config", p]);
        assert_eq!(code, 0, "{out}");
        assert!(out.starts_with("num,den"));

        let (code, out, _) = run_capture(&["--config", p, "spectrum", "--q", "4", "--format", "json"]);
        assert_eq!(code, 0);
        let v = json_of(&out);
        assert_eq!(v["config"]["q"], 4);
        assert!(v.get("timestamp").is_none());

        fs::write(&path, r#"{"command": "factor", "N": 21, "seed": 3, "no-timestamp": true}"#).unwrap();
        let (code, out, _) = run_capture(&["--config", p]);
        assert_eq!(code, 0);
        assert_eq!(json_of(&out)["result"]["factors"], json!([3, 7]));
    }

    #[test]
    fn output_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            ["qumode", "resources", "--context", "dqc1"],
            Some(dir.path().to_path_buf()),
            &mut out,
            &mut err,
        );
        assert_eq!(code, 0);
        assert!(out.is_empty());
        assert!(dir.path().join("resources.json").exists());

        let code = run_with(
            ["qumode", "phase-est", "--phase", "1", "--out", "sub/pe.json", "--histogram", "h.csv"],
            Some(dir.path().to_path_buf()),
            &mut out,
            &mut err,
        );
        assert_eq!(code, 0);
        assert!(dir.path().join("sub/pe.json").exists());
        let hist = fs::read_to_string(dir.path().join("h.csv")).unwrap();
        assert!(hist.starts_with("bin_center,mass\n"));
    }

    #[test]
    fn help_documents_csv_schemas() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("bin_center,mass") && out.contains("p_E,density"));
    }
}
