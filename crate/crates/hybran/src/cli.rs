//! The `hybran` command-line front end.
//!
//! Every command that writes files also writes `<output>.manifest.json` holding
//! the resolved flags, seed, file paths and timings. Files are written to a
//! temporary sibling and renamed into place.
//!
//! Boxes use the grammar `"lo1,hi1;lo2,hi2"`; bounds may be written as `pi` or `-pi`.
//! Exit codes: 0 success, 1 validation error, 2 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::automaton::{HybridAutomaton, MODEL_VERSION};
use crate::dataset::{holdout_split, SegmentMode, DEFAULT_MIN_PAIRS};
use crate::dynamics::{self, generate_traces, stream_rng, LimitCycle, LimitCycleParams, Trace, PRNG_ID};
use crate::error::{Error, Result};
use crate::geometry::{HyperRect, Partition};
use crate::nn::{Batch, TrainConfig};
use crate::pipeline::{fit_hybrid, fit_single, FitConfig};
use crate::reach::{reach, MergePolicy, ReachConfig};
use crate::svg;

pub const THREADS_ENV: &str = "HYBRAN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hybran", about = "Neural-network hybrid automata from trajectory data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample trajectories of a ground-truth system into a trace CSV.
    GenData(GenDataArgs),
    /// Fit a hybrid (per-cell) or single-network model to a trace CSV.
    Train(TrainArgs),
    /// One-step MSE of one or more models on a trace CSV.
    Eval(EvalArgs),
    /// Run a model forward under sampled inputs.
    Simulate(SimulateArgs),
    /// Interval reachable sets of a model.
    Reach(ReachArgs),
    /// Print the tool, model-format and PRNG versions.
    Version,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    LimitCycle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Hybrid,
    Single,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentArg {
    Source,
    WithinCell,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeArg {
    PerCellMerge,
    ExactUnion,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long, value_enum, default_value = "limit-cycle")]
    pub system: SystemKind,
    #[arg(long, default_value_t = 50)]
    pub traces: usize,
    #[arg(long, default_value_t = 150)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Box the initial states are drawn from.
    #[arg(long, allow_hyphen_values = true, default_value = "-4,4;-pi,pi")]
    pub init_box: String,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI / 3.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.2)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.5)]
    pub delta: f64,
    /// Leave the angle unwrapped instead of mapping it into (-pi, pi].
    #[arg(long)]
    pub no_wrap: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Trace CSV.
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long, allow_hyphen_values = true, default_value = "-4,4;-pi,pi")]
    pub domain: String,
    /// Segments per dimension, e.g. `4,3`.
    #[arg(long, default_value = "4,3")]
    pub segments: String,
    #[arg(long, default_value_t = 20)]
    pub hidden: usize,
    #[arg(long, value_enum, default_value = "hybrid")]
    pub mode: Mode,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    /// Minibatch size, or `full`.
    #[arg(long, default_value = "256")]
    pub batch: String,
    /// Support of the input law; defaults to the limit-cycle input range.
    #[arg(long, allow_hyphen_values = true)]
    pub input_box: Option<String>,
    /// Fraction of traces (taken from the end of the file) kept out of training.
    #[arg(long, default_value_t = 0.0)]
    pub holdout: f64,
    #[arg(long, value_enum, default_value = "source")]
    pub segment_mode: SegmentArg,
    #[arg(long, default_value_t = DEFAULT_MIN_PAIRS)]
    pub min_pairs: usize,
    /// Serve cells with fewer than `--min-pairs` pairs by the global network.
    #[arg(long)]
    pub fallback_sparse: bool,
    /// Train the cells one after another.
    #[arg(long)]
    pub serial: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Model JSON; repeat for several models.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub traces: PathBuf,
    /// Evaluate only on this trailing fraction of the traces.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Also write the table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Initial state; drawn uniformly from the model domain when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 150)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of simulations.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReachArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub init_box: String,
    /// Defaults to the input box stored in the model.
    #[arg(long, allow_hyphen_values = true)]
    pub input_box: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "per-cell-merge")]
    pub merge: MergeArg,
    #[arg(long, default_value_t = 4096)]
    pub max_fragments: usize,
    /// Number of Monte Carlo trajectories drawn over the plot.
    #[arg(long, default_value_t = 0)]
    pub overlay_sim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Outputs go to `<prefix>.reach.csv`, `.timing.csv`, `.volume.csv` and `.svg`.
    #[arg(long)]
    pub out_prefix: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    tool_version: &'a str,
    model_version: u32,
    prng: &'a str,
    seed: Option<u64>,
    config: &'a C,
    inputs: Vec<String>,
    outputs: Vec<String>,
    timings: serde_json::Value,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // Fails only if a pool already exists, e.g. on a second in-process run.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Reach(a) => reach_cmd(&a),
        Command::Version => {
            println!("hybran {}", env!("CARGO_PKG_VERSION"));
            println!("model format {MODEL_VERSION}");
            println!("prng {PRNG_ID}");
            Ok(())
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    match s.trim() {
        "pi" => Ok(std::f64::consts::PI),
        "-pi" => Ok(-std::f64::consts::PI),
        t => t
            .parse()
            .map_err(|_| Error::invalid(format!("`{t}` is not a number"))),
    }
}

/// Parses `"lo1,hi1;lo2,hi2;..."`.
pub fn parse_box(s: &str) -> Result<HyperRect> {
    let bounds = s
        .split(';')
        .map(|dim| {
            let v: Vec<&str> = dim.split(',').collect();
            if v.len() != 2 {
                return Err(Error::invalid(format!("box dimension `{dim}` is not `lo,hi`")));
            }
            Ok((parse_number(v[0])?, parse_number(v[1])?))
        })
        .collect::<Result<Vec<_>>>()?;
    HyperRect::from_bounds(&bounds)
}

/// Parses a comma-separated vector.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_number).collect()
}

fn parse_segments(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("segment count `{t}` is not a positive integer")))
        })
        .collect()
}

fn parse_batch(s: &str) -> Result<Batch> {
    if s == "full" {
        return Ok(Batch::Full);
    }
    match s.parse() {
        Ok(k) if k > 0 => Ok(Batch::Size(k)),
        _ => Err(Error::invalid(format!("batch must be `full` or a positive integer, got `{s}`"))),
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut p = output.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

fn write_manifest<C: Serialize>(
    command: &str,
    seed: Option<u64>,
    config: &C,
    inputs: &[&Path],
    outputs: &[&Path],
    timings: serde_json::Value,
) -> Result<()> {
    let m = RunManifest {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        model_version: MODEL_VERSION,
        prng: PRNG_ID,
        seed,
        config,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        timings,
    };
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    write_atomic(&manifest_path(outputs[0]), text.as_bytes())
}

fn read_traces(path: &Path) -> Result<Vec<Trace>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    dynamics::read_traces_csv(BufReader::new(f)).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        e => e,
    })
}

fn read_model(path: &Path) -> Result<HybridAutomaton> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    HybridAutomaton::from_json(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn traces_csv(traces: &[Trace]) -> Vec<u8> {
    let mut buf = Vec::new();
    dynamics::write_traces_csv(&mut buf, traces).expect("writing to memory");
    buf
}

fn uniform_in(rect: &HyperRect, rng: &mut impl Rng) -> Vec<f64> {
    rect.lo()
        .iter()
        .zip(rect.hi())
        .map(|(&l, &h)| if l < h { rng.gen_range(l..=h) } else { l })
        .collect()
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let start = Instant::now();
    let system = LimitCycle::new(LimitCycleParams {
        tau: a.tau,
        omega: a.omega,
        mu: a.mu,
        delta: a.delta,
        wrap_theta: !a.no_wrap,
    })?;
    let init = parse_box(&a.init_box)?;
    let traces = generate_traces(&system, a.traces, a.steps, &init, a.seed)?;
    write_atomic(&a.out, &traces_csv(&traces))?;
    write_manifest(
        "gen-data",
        Some(a.seed),
        a,
        &[],
        &[&a.out],
        json!({ "total_seconds": start.elapsed().as_secs_f64() }),
    )
}

fn train(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let traces = read_traces(&a.traces)?;
    let (train_set, _) = holdout_split(&traces, a.holdout)?;
    let domain = parse_box(&a.domain)?;
    let input_box = match &a.input_box {
        Some(s) => parse_box(s)?,
        None => LimitCycleParams::default().input_box(),
    };
    let mut cfg = FitConfig::new(a.hidden);
    cfg.train = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch: parse_batch(&a.batch)?,
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.segment_mode = match a.segment_mode {
        SegmentArg::Source => SegmentMode::Source,
        SegmentArg::WithinCell => SegmentMode::WithinCell,
    };
    cfg.min_pairs = a.min_pairs;
    cfg.fallback_sparse = a.fallback_sparse;
    cfg.parallel = !a.serial;

    let fit = match a.mode {
        Mode::Hybrid => {
            let partition = Partition::new(domain, &parse_segments(&a.segments)?)?;
            fit_hybrid(&train_set, partition, input_box, &cfg)?
        }
        Mode::Single => fit_single(&train_set, domain, input_box, &cfg)?,
    };
    write_atomic(&a.out, fit.automaton.to_json().as_bytes())?;

    let cells: Vec<_> = fit
        .stats
        .cells
        .iter()
        .zip(&fit.cell_losses)
        .map(|(c, loss)| json!({ "cell": c.cell, "pairs": c.pairs, "sparse": c.sparse, "loss": loss }))
        .collect();
    let report = json!({
        "mode": a.mode,
        "cells": cells,
        "fallback_cells": fit.automaton.meta().fallback_cells,
        "train_wall_seconds": fit.wall_seconds,
        "train_serial_seconds": fit.serial_seconds,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    write_manifest(
        "train",
        Some(a.seed),
        a,
        &[&a.traces],
        &[&a.out],
        json!({
            "train_wall_seconds": fit.wall_seconds,
            "train_serial_seconds": fit.serial_seconds,
            "total_seconds": start.elapsed().as_secs_f64(),
        }),
    )
}

fn eval(a: &EvalArgs) -> Result<()> {
    let start = Instant::now();
    let traces = read_traces(&a.traces)?;
    let test: Vec<Trace> = match a.holdout {
        Some(f) => holdout_split(&traces, f)?.1,
        None => traces,
    };
    let mut rows = Vec::with_capacity(a.model.len());
    for path in &a.model {
        let report = read_model(path)?.evaluate_mse(&test)?;
        rows.push(json!({
            "model": path.display().to_string(),
            "mse": report.mse,
            "pairs": report.pairs,
            "per_cell": report.per_cell,
        }));
    }
    let text = serde_json::to_string_pretty(&rows).expect("table serializes");
    println!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
        let mut inputs: Vec<&Path> = a.model.iter().map(PathBuf::as_path).collect();
        inputs.push(&a.traces);
        write_manifest(
            "eval",
            None,
            a,
            &inputs,
            &[out],
            json!({ "total_seconds": start.elapsed().as_secs_f64() }),
        )?;
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let model = read_model(&a.model)?;
    let x0 = a.x0.as_deref().map(parse_vector).transpose()?;
    if let Some(x) = &x0 {
        if x.len() != model.state_dim() {
            return Err(Error::invalid(format!(
                "x0 has {} entries, model state has {}",
                x.len(),
                model.state_dim()
            )));
        }
    }
    let mut traces = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let mut rng = stream_rng(a.seed, i as u64);
        let x = x0
            .clone()
            .unwrap_or_else(|| uniform_in(model.partition().domain(), &mut rng));
        let inputs: Vec<Vec<f64>> = (0..a.steps).map(|_| uniform_in(model.input_box(), &mut rng)).collect();
        let sim = model.simulate(&x, &inputs)?;
        traces.push(Trace::new(i, sim.trajectory, inputs)?);
    }
    write_atomic(&a.out, &traces_csv(&traces))?;
    write_manifest(
        "simulate",
        Some(a.seed),
        a,
        &[&a.model],
        &[&a.out],
        json!({ "total_seconds": start.elapsed().as_secs_f64() }),
    )
}

fn reach_cmd(a: &ReachArgs) -> Result<()> {
    let start = Instant::now();
    let model = read_model(&a.model)?;
    let init = parse_box(&a.init_box)?;
    let input_box = match &a.input_box {
        Some(s) => parse_box(s)?,
        None => model.input_box().clone(),
    };
    let cfg = ReachConfig {
        horizon: a.steps,
        input_box: input_box.clone(),
        merge: match a.merge {
            MergeArg::PerCellMerge => MergePolicy::PerCellMerge,
            MergeArg::ExactUnion => MergePolicy::ExactUnion,
        },
        max_fragments: a.max_fragments,
    };
    let set = reach(&model, &init, &cfg)?;
    let reach_seconds = start.elapsed().as_secs_f64();

    let mut overlay = Vec::with_capacity(a.overlay_sim);
    for i in 0..a.overlay_sim {
        let mut rng = stream_rng(a.seed, i as u64);
        let x0 = uniform_in(&init, &mut rng);
        let inputs: Vec<Vec<f64>> = (0..a.steps).map(|_| uniform_in(&input_box, &mut rng)).collect();
        overlay.push(model.simulate(&x0, &inputs)?.trajectory);
    }

    let path = |ext: &str| PathBuf::from(format!("{}.{ext}", a.out_prefix));
    let (reach_csv, timing_csv, volume_csv, svg_path) =
        (path("reach.csv"), path("timing.csv"), path("volume.csv"), path("svg"));
    let mut buf = Vec::new();
    set.write_csv(&mut buf).expect("writing to memory");
    write_atomic(&reach_csv, &buf)?;
    buf.clear();
    set.write_timing_csv(&mut buf).expect("writing to memory");
    write_atomic(&timing_csv, &buf)?;
    buf.clear();
    set.write_volume_csv(&mut buf).expect("writing to memory");
    write_atomic(&volume_csv, &buf)?;
    write_atomic(&svg_path, svg::render(&set, model.partition().domain(), &overlay).as_bytes())?;

    eprintln!(
        "{} steps, {} fragments, {:.3} s",
        a.steps,
        set.fragment_count(),
        reach_seconds
    );
    write_manifest(
        "reach",
        Some(a.seed),
        a,
        &[&a.model],
        &[&reach_csv, &timing_csv, &volume_csv, &svg_path],
        json!({
            "reach_seconds": reach_seconds,
            "total_seconds": start.elapsed().as_secs_f64(),
        }),
    )
}
