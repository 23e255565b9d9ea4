//! Command-line front end.
//!
//! Every subcommand accepts `--config <file.json>` whose keys mirror the long
//! flag names; explicit flags win over file values. Output goes to
//! `--output`, else to `$ZIGZAG_ALOHA_OUT_DIR/<default name>`, else stdout.
//! Files are written through a temporary sibling and renamed into place, so a
//! failed command never leaves a partial file behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{registry, TransitionMatrix};
use crate::error::{Error, Result};
use crate::metrics::{classify_stability, drift_curve, EquilibriumKind};
use crate::model::{ModelParams, Variant};
use crate::optimize::maximize_throughput;
use crate::report::solve_model;
use crate::sim::{simulate, SimConfig, SimResult, TimeAccounting};
use crate::stationary::{occupancy_distance, SolverMethod};

pub const OUT_DIR_ENV: &str = "ZIGZAG_ALOHA_OUT_DIR";
pub const SWEEP_HEADER: &str =
    "variant,axis_value,throughput,avg_backlog,delay,throughput_new,throughput_backlogged,delay_backlogged";
pub const STABILITY_HEADER: &str = "variant,qr,N,drift,psucc,arrival_rate";
const MAX_SWEEP_POINTS: f64 = 1e5;

#[derive(Debug, Parser)]
#[command(name = "zigzag-aloha", version, about = "Slotted Aloha with ZigZag decoding: analysis and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one model: stationary law, metrics, drift and stability (JSON).
    Solve(SolveArgs),
    /// Sweep p_a or q_r over a grid for several variants (CSV).
    Sweep(SweepArgs),
    /// Monte Carlo simulation of the ZigZag receiver (JSON).
    Simulate(SimulateArgs),
    /// Drift curves and equilibrium verdicts (CSV).
    Stability(StabilityArgs),
    /// Throughput-maximizing retransmission probability (JSON).
    Optimize(OptimizeArgs),
    /// Export a transition matrix (CSV, one row per line).
    Matrix(MatrixArgs),
    /// List registered model variants.
    Variants,
}

macro_rules! merge_from {
    ($cli:ident, $file:ident; $($field:ident),+) => {
        $( if $cli.$field.is_none() { $cli.$field = $file.$field; } )+
    };
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("config {}: {e}", path.display())))
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig(format!("missing --{flag}")))
}

fn parse_variants(names: Option<Vec<String>>, default: &[Variant]) -> Result<Vec<Variant>> {
    match names {
        None => Ok(default.to_vec()),
        Some(names) if names.is_empty() => Err(Error::InvalidConfig("empty variant list".into())),
        Some(names) => names.iter().map(|n| n.parse()).collect(),
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ModelArgs {
    /// Number of users M.
    #[arg(long, allow_hyphen_values = true)]
    pub users: Option<i64>,
    /// New-packet transmission probability p_a.
    #[arg(long)]
    pub pa: Option<f64>,
    /// Retransmission probability q_r.
    #[arg(long)]
    pub qr: Option<f64>,
    /// aloha-baseline, zigzag-paper or zigzag-strict.
    #[arg(long)]
    pub variant: Option<String>,
}

impl ModelArgs {
    fn merge(&mut self, file: ModelArgs) {
        merge_from!(self, file; users, pa, qr, variant);
    }

    fn params(&self, default_variant: Variant) -> Result<ModelParams> {
        ModelParams::parse(
            required(self.users, "users")?,
            required(self.pa, "pa")?,
            required(self.qr, "qr")?,
            self.variant.as_deref().unwrap_or(default_variant.name()),
        )
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// direct or power-iteration.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct MatrixArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    #[serde(alias = "p_a")]
    Pa,
    #[serde(alias = "q_r")]
    Qr,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pa" | "p_a" => Ok(SweepAxis::Pa),
            "qr" | "q_r" => Ok(SweepAxis::Qr),
            other => Err(Error::InvalidConfig(format!("unknown axis `{other}` (pa or qr)"))),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SweepArgs {
    /// Swept parameter: pa or qr.
    #[arg(long)]
    pub axis: Option<String>,
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub users: Option<i64>,
    /// Fixed p_a when sweeping q_r.
    #[arg(long)]
    pub pa: Option<f64>,
    /// Fixed q_r when sweeping p_a.
    #[arg(long)]
    pub qr: Option<f64>,
    /// Comma-separated variants; all three by default.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Free-form provenance notes carried from scenario files into the metadata sidecar.
    #[arg(skip)]
    pub assumptions: Option<serde_json::Value>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Validated sweep definition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub users: usize,
    /// The non-swept probability.
    pub fixed: f64,
    pub variants: Vec<Variant>,
}

impl SweepSpec {
    pub fn new(
        axis: SweepAxis,
        start: f64,
        stop: f64,
        step: f64,
        users: i64,
        fixed: f64,
        variants: Vec<Variant>,
    ) -> Result<Self> {
        if !(start > 0.0 && start <= stop && stop < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sweep range must satisfy 0 < start <= stop < 1 (got {start}..{stop})"
            )));
        }
        if !(step > 0.0) || (stop - start) / step > MAX_SWEEP_POINTS {
            return Err(Error::InvalidConfig(format!(
                "step {step} must be positive with at most 1e5 intervals"
            )));
        }
        if variants.is_empty() {
            return Err(Error::InvalidConfig("empty variant list".into()));
        }
        // validates users and the fixed probability
        let probe = ModelParams::parse(users, start, fixed, variants[0].name())?;
        Ok(SweepSpec {
            axis,
            start,
            stop,
            step,
            users: probe.users(),
            fixed,
            variants,
        })
    }

    /// `start, start + step, ...` up to `stop`, rounded to 12 decimals so
    /// that values print cleanly.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| ((self.start + k as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }

    pub fn params_at(&self, value: f64, variant: Variant) -> Result<ModelParams> {
        match self.axis {
            SweepAxis::Pa => ModelParams::new(self.users, value, self.fixed, variant),
            SweepAxis::Qr => ModelParams::new(self.users, self.fixed, value, variant),
        }
    }
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub axis_value: f64,
    pub throughput: f64,
    pub avg_backlog: f64,
    pub delay: Option<f64>,
    pub throughput_new: f64,
    pub throughput_backlogged: f64,
    pub delay_backlogged: Option<f64>,
}

impl SweepRow {
    pub fn compute(spec: &SweepSpec, variant: Variant, value: f64) -> Result<Self> {
        let params = spec.params_at(value, variant)?;
        let m = solve_model(&params, SolverMethod::Direct)?.metrics;
        Ok(SweepRow {
            variant,
            axis_value: value,
            throughput: m.throughput_total,
            avg_backlog: m.avg_backlog,
            delay: m.delay_total,
            throughput_new: m.throughput_new,
            throughput_backlogged: m.throughput_backlogged,
            delay_backlogged: m.delay_backlogged,
        })
    }

    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.variant,
            self.axis_value,
            self.throughput,
            self.avg_backlog,
            opt(self.delay),
            self.throughput_new,
            self.throughput_backlogged,
            opt(self.delay_backlogged)
        )
    }
}

pub fn sweep_rows(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(f64, Variant)> = spec
        .points()
        .into_iter()
        .flat_map(|x| spec.variants.iter().map(move |&v| (x, v)))
        .collect();
    jobs.into_par_iter()
        .map(|(x, v)| SweepRow::compute(spec, v, x))
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 160);
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Parses a sweep CSV back into rows.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != SWEEP_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::InvalidConfig(format!("bad number `{s}`: {e}")))
    };
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(SweepRow {
                variant: rec[0].parse()?,
                axis_value: num(&rec[1])?,
                throughput: num(&rec[2])?,
                avg_backlog: num(&rec[3])?,
                delay: opt(&rec[4])?,
                throughput_new: num(&rec[5])?,
                throughput_backlogged: num(&rec[6])?,
                delay_backlogged: opt(&rec[7])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Frames per replication, warmup included.
    #[arg(long)]
    pub frames: Option<u64>,
    /// Frames discarded before measuring (default 10% of --frames).
    #[arg(long)]
    pub warmup: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// per-frame or per-slot.
    #[arg(long)]
    pub time_accounting: Option<String>,
    /// Append distances to the zigzag-paper and zigzag-strict analytic laws.
    #[arg(long)]
    pub analytic_compare: bool,
    /// Also write the empirical occupancy histogram here (CSV).
    #[arg(long)]
    pub occupancy_csv: Option<PathBuf>,
    /// Also write frame-outcome counts here (CSV).
    #[arg(long)]
    pub outcomes_csv: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub const DEFAULT_FRAMES: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticComparison {
    pub variant: Variant,
    pub total_variation: f64,
    pub analytic_throughput: f64,
    /// Simulated per-frame throughput relative to the analytic value, minus one.
    pub relative_throughput_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    #[serde(flatten)]
    pub result: SimResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_compare: Option<Vec<AnalyticComparison>>,
}

pub fn compare_with_analytic(result: &SimResult) -> Result<Vec<AnalyticComparison>> {
    let frames: u64 = result.replications.iter().map(|r| r.frames).sum();
    let per_frame = result.delivered as f64 / frames as f64;
    [Variant::ZigzagPaper, Variant::ZigzagStrict]
        .into_iter()
        .map(|v| {
            let params = result.config.params.with_variant(v);
            let solved = solve_model(&params, SolverMethod::Direct)?;
            let th = solved.metrics.throughput_total;
            Ok(AnalyticComparison {
                variant: v,
                total_variation: occupancy_distance(
                    &result.empirical_occupancy,
                    &solved.stationary.pi,
                )?,
                analytic_throughput: th,
                relative_throughput_error: per_frame / th - 1.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct StabilityArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub users: Option<i64>,
    #[arg(long)]
    pub pa: Option<f64>,
    /// Comma-separated retransmission probabilities.
    #[arg(long, value_delimiter = ',')]
    pub qr: Option<Vec<f64>>,
    /// Comma-separated variants; aloha-baseline,zigzag-paper by default.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[arg(skip)]
    pub assumptions: Option<serde_json::Value>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn stability_csv(users: i64, p_a: f64, qrs: &[f64], variants: &[Variant]) -> Result<String> {
    if qrs.is_empty() || variants.is_empty() {
        return Err(Error::InvalidConfig("need at least one q_r and one variant".into()));
    }
    let mut rows = String::new();
    let mut summary = String::from("variant,qr,verdict,stable,unstable\n");
    rows.push_str(STABILITY_HEADER);
    rows.push('\n');
    for &v in variants {
        for &q_r in qrs {
            let params = ModelParams::parse(users, p_a, q_r, v.name())?;
            let curve = drift_curve(&params);
            for n in 0..curve.values.len() {
                rows.push_str(&format!(
                    "{v},{q_r},{n},{},{},{}\n",
                    curve.values[n], curve.psucc[n], curve.arrival_rate[n]
                ));
            }
            let at = |kind| {
                curve
                    .equilibria
                    .iter()
                    .filter(|e| e.kind == kind)
                    .map(|e| e.location.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            };
            summary.push_str(&format!(
                "{v},{q_r},{},{},{}\n",
                classify_stability(&curve).as_str(),
                at(EquilibriumKind::Stable),
                at(EquilibriumKind::Unstable)
            ));
        }
    }
    rows.push_str("\n# equilibria\n");
    rows.push_str(&summary);
    Ok(rows)
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct OptimizeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub users: Option<i64>,
    #[arg(long)]
    pub pa: Option<f64>,
    #[arg(long)]
    pub variant: Option<String>,
    /// Coarse grid increment in [1e-4, 0.1].
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Where a command's main output goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sink {
    Stdout,
    File(PathBuf),
}

pub fn resolve_sink(explicit: Option<PathBuf>, default_name: &str) -> Sink {
    match explicit {
        Some(path) if path.as_os_str() == "-" => Sink::Stdout,
        Some(path) => Sink::File(path),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Sink::File(PathBuf::from(dir).join(default_name)),
            _ => Sink::Stdout,
        },
    }
}

/// Writes `bytes` to `path` atomically via a temporary sibling.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn emit(sink: &Sink, bytes: &[u8]) -> Result<()> {
    match sink {
        Sink::Stdout => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
        Sink::File(path) => write_atomic(path, bytes),
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Stability(args) => cmd_stability(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Variants => {
            let mut text = String::new();
            for m in registry() {
                text.push_str(&format!("{}\t{}\n", m.name(), m.description()));
            }
            emit(&Sink::Stdout, text.as_bytes())
        }
    }
}

pub fn cmd_solve(mut args: SolveArgs) -> Result<()> {
    if let Some(path) = args.config.clone() {
        let file: SolveArgs = load_config(&path)?;
        args.model.merge(file.model);
        merge_from!(args, file; method, output);
    }
    let params = args.model.params(Variant::ZigzagPaper)?;
    let method: SolverMethod = args.method.as_deref().unwrap_or("direct").parse()?;
    let solved = solve_model(&params, method)?;
    emit(&resolve_sink(args.output, "solve.json"), &json_bytes(&solved)?)
}

pub fn cmd_matrix(mut args: MatrixArgs) -> Result<()> {
    if let Some(path) = args.config.clone() {
        let file: MatrixArgs = load_config(&path)?;
        args.model.merge(file.model);
        merge_from!(args, file; output);
    }
    let params = args.model.params(Variant::ZigzagPaper)?;
    let mut bytes = Vec::new();
    TransitionMatrix::build(&params).write_csv(&mut bytes)?;
    emit(&resolve_sink(args.output, "matrix.csv"), &bytes)
}

pub fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let axis: SweepAxis = required(args.axis.as_deref(), "axis")?.parse()?;
    let fixed = match axis {
        SweepAxis::Pa => required(args.qr, "qr")?,
        SweepAxis::Qr => required(args.pa, "pa")?,
    };
    let variants = parse_variants(args.variants.clone(), &Variant::ALL)?;
    SweepSpec::new(
        axis,
        required(args.start, "start")?,
        required(args.stop, "stop")?,
        required(args.step, "step")?,
        required(args.users, "users")?,
        fixed,
        variants,
    )
}

pub fn cmd_sweep(mut args: SweepArgs) -> Result<()> {
    if let Some(path) = args.config.clone() {
        let file: SweepArgs = load_config(&path)?;
        merge_from!(args, file; axis, start, stop, step, users, pa, qr, variants, assumptions, output);
    }
    let spec = sweep_spec(&args)?;
    let rows = sweep_rows(&spec)?;
    let sink = resolve_sink(args.output, "sweep.csv");
    if let Sink::File(path) = &sink {
        #[derive(Serialize)]
        struct Meta<'a> {
            spec: &'a SweepSpec,
            rows: usize,
            assumptions: &'a Option<serde_json::Value>,
        }
        let meta = Meta {
            spec: &spec,
            rows: rows.len(),
            assumptions: &args.assumptions,
        };
        write_atomic(&sidecar_path(path), &json_bytes(&meta)?)?;
    }
    emit(&sink, sweep_csv(&rows).as_bytes())
}

pub fn sim_config(args: &SimulateArgs) -> Result<SimConfig> {
    let params = args.model.params(Variant::ZigzagStrict)?;
    let frames = args.frames.unwrap_or(DEFAULT_FRAMES);
    let mut config = SimConfig::new(
        params,
        frames,
        args.seed.unwrap_or(DEFAULT_SEED),
        args.replications.unwrap_or(DEFAULT_REPLICATIONS),
    );
    if let Some(w) = args.warmup {
        config.warmup_frames = w;
    }
    if let Some(t) = &args.time_accounting {
        config.time_accounting = t.parse::<TimeAccounting>()?;
    }
    config.validate()?;
    Ok(config)
}

pub fn cmd_simulate(mut args: SimulateArgs) -> Result<()> {
    if let Some(path) = args.config.clone() {
        let file: SimulateArgs = load_config(&path)?;
        args.model.merge(file.model);
        merge_from!(args, file; frames, warmup, seed, replications, time_accounting, occupancy_csv, outcomes_csv, output);
        args.analytic_compare |= file.analytic_compare;
    }
    let config = sim_config(&args)?;
    let result = simulate(&config)?;
    let analytic_compare = if args.analytic_compare {
        Some(compare_with_analytic(&result)?)
    } else {
        None
    };

    if let Some(path) = &args.occupancy_csv {
        let mut text = String::from("N,fraction\n");
        for (n, f) in result.empirical_occupancy.iter().enumerate() {
            text.push_str(&format!("{n},{f}\n"));
        }
        write_atomic(path, text.as_bytes())?;
    }
    if let Some(path) = &args.outcomes_csv {
        let c = &result.frames_by_outcome;
        let text = format!(
            "outcome,frames\nidle,{}\nsuccess,{}\nzigzag,{}\ncollision,{}\n",
            c.idle, c.success, c.zigzag, c.collision
        );
        write_atomic(path, text.as_bytes())?;
    }

    let report = SimulationReport {
        result,
        analytic_compare,
    };
    emit(&resolve_sink(args.output, "simulate.json"), &json_bytes(&report)?)
}

pub fn cmd_stability(mut args: StabilityArgs) -> Result<()> {
    if let Some(path) = args.config.clone() {
        let file: StabilityArgs = load_config(&path)?;
        merge_from!(args, file; users, pa, qr, variants, assumptions, output);
    }
    let variants = parse_variants(
        args.variants.clone(),
        &[Variant::AlohaBaseline, Variant::ZigzagPaper],
    )?;
    let text = stability_csv(
        required(args.users, "users")?,
        required(args.pa, "pa")?,
        &required(args.qr.clone(), "qr")?,
        &variants,
    )?;
    emit(&resolve_sink(args.output, "stability.csv"), text.as_bytes())
}

pub fn cmd_optimize(mut args: OptimizeArgs) -> Result<()> {
    if let Some(path) = args.config.clone() {
        let file: OptimizeArgs = load_config(&path)?;
        merge_from!(args, file; users, pa, variant, grid_step, output);
    }
    let users = required(args.users, "users")?;
    let p_a = required(args.pa, "pa")?;
    let variant: Variant = args.variant.as_deref().unwrap_or("zigzag-paper").parse()?;
    // range-check users before the usize conversion
    let params = ModelParams::parse(users, p_a, 0.5, variant.name())?;
    let result = maximize_throughput(
        params.users(),
        p_a,
        variant,
        args.grid_step.unwrap_or(DEFAULT_GRID_STEP),
    )?;
    emit(&resolve_sink(args.output, "optimize.json"), &json_bytes(&result)?)
}
