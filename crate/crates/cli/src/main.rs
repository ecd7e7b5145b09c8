//! `tearfilm` command-line interface.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use tearfilm::eval::{evaluate, Binning};
use tearfilm::ingest::ingest_intensity;
use tearfilm::learners::{
    self, load_checkpoint, save_checkpoint, LearnerKind, Target, TrainConfig,
};
use tearfilm::ode::simulate_ode;
use tearfilm::pde::{simulate_pde_with, PdeOptions, DEFAULT_NR};
use tearfilm::physics::{nondim_ode, nondim_pde, OdeParams, PdeParams, PhysicalConstants};
use tearfilm::sampling::{
    build_dataset, BuildConfig, Dataset, ModelKind, NoiseMode, NoiseScale, Split,
};
use tearfilm::series::{time_grid, SERIES_LEN};

#[derive(Parser)]
#[command(
    name = "tearfilm",
    version,
    about = "Tear-film simulation, dataset generation and operator learning"
)]
struct Cli {
    /// JSON file of option values; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the center-of-glob ODE model for one parameter set.
    SimulateOde(SimulateOdeArgs),
    /// Solve the radial PDE model for one parameter set.
    SimulatePde(SimulatePdeArgs),
    /// Sample parameters, simulate, screen and write a training dataset.
    GenDataset(GenDatasetArgs),
    /// Train a learner on a dataset.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a dataset.
    Evaluate(EvaluateArgs),
    /// Predict from a measured intensity CSV.
    Predict(PredictArgs),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(clap::Args, Serialize)]
struct SimulateOdeArgs {
    /// Parameter JSON in laboratory units.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Optional JSON overriding physical constants.
    #[arg(long)]
    constants: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateOdeConfig {
    params: PathBuf,
    #[serde(default)]
    constants: Option<PathBuf>,
    out: PathBuf,
}

#[derive(clap::Args, Serialize)]
struct SimulatePdeArgs {
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    constants: Option<PathBuf>,
    /// Collocation points in r.
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every field at every output time.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    full_fields: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulatePdeConfig {
    params: PathBuf,
    #[serde(default)]
    constants: Option<PathBuf>,
    #[serde(default = "default_nr")]
    nr: usize,
    out: PathBuf,
    #[serde(default)]
    full_fields: bool,
}

fn default_nr() -> usize {
    DEFAULT_NR
}

#[derive(clap::Args, Serialize)]
struct GenDatasetArgs {
    /// ode or pde.
    #[arg(long)]
    model: Option<String>,
    /// Accepted source samples; each yields three rows.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    nr: Option<usize>,
    /// additive or multiplicative.
    #[arg(long)]
    noise_mode: Option<String>,
    /// realized (the smoothed noise has the target deviation) or white.
    #[arg(long)]
    noise_scale: Option<String>,
    /// Keep all rows of a source in the same split.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    grouped_split: bool,
    /// Also export CSV copies of every matrix.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    csv: bool,
    #[arg(long)]
    constants: Option<PathBuf>,
    /// First Halton index; drawn from the seed when absent.
    #[arg(long)]
    halton_start: Option<u64>,
    #[arg(long)]
    max_trials: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenDatasetConfig {
    model: String,
    count: usize,
    #[serde(default)]
    seed: u64,
    out: PathBuf,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default = "default_nr")]
    nr: usize,
    #[serde(default = "default_noise_mode")]
    noise_mode: String,
    #[serde(default = "default_noise_scale")]
    noise_scale: String,
    #[serde(default)]
    grouped_split: bool,
    #[serde(default)]
    csv: bool,
    #[serde(default)]
    constants: Option<PathBuf>,
    #[serde(default)]
    halton_start: Option<u64>,
    #[serde(default)]
    max_trials: Option<u64>,
}

fn default_noise_mode() -> String {
    "additive".into()
}

fn default_noise_scale() -> String {
    "realized".into()
}

#[derive(clap::Args, Serialize)]
struct TrainArgs {
    /// ffn, pca or pcax.
    #[arg(long)]
    kind: Option<String>,
    /// h or c.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Smoothness weight of the FFN loss.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Input principal components.
    #[arg(long)]
    k_in: Option<usize>,
    /// Output principal components.
    #[arg(long)]
    k_out: Option<usize>,
    /// Checkpoint path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Loss history CSV; defaults to the checkpoint path with `.loss.csv`.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainCliConfig {
    kind: String,
    target: String,
    data: PathBuf,
    out: PathBuf,
    #[serde(default)]
    history: Option<PathBuf>,
    #[serde(flatten)]
    train: TrainConfig,
}

#[derive(clap::Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// train or test.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateConfig {
    ckpt: PathBuf,
    data: PathBuf,
    #[serde(default = "default_split")]
    split: String,
    out: PathBuf,
    #[serde(default)]
    binning: Binning,
}

fn default_split() -> String {
    "test".into()
}

#[derive(clap::Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// CSV with columns time_seconds, intensity.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Initial thickness (um), fluorescein (%) and trial length (s), comma separated.
    #[arg(long)]
    ext: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictConfig {
    ckpt: PathBuf,
    input: PathBuf,
    #[serde(default)]
    ext: Option<String>,
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn constants(path: Option<&Path>) -> Result<PhysicalConstants> {
    match path {
        Some(p) => Ok(PhysicalConstants::from_json(&read(p)?)?),
        None => Ok(PhysicalConstants::default()),
    }
}

fn series_csv(columns: &[&str], series: &[&[f64]]) -> String {
    let n = series.iter().map(|s| s.len()).min().unwrap_or(0);
    let t = time_grid(SERIES_LEN);
    let mut out = format!("t,{}\n", columns.join(","));
    for k in 0..n {
        out.push_str(&t[k].to_string());
        for s in series {
            out.push(',');
            out.push_str(&s[k].to_string());
        }
        out.push('\n');
    }
    out
}

fn simulate_ode_cmd(cfg: SimulateOdeConfig) -> Result<()> {
    let params: OdeParams =
        serde_json::from_str(&read(&cfg.params)?).context("parsing ODE parameters")?;
    let k = constants(cfg.constants.as_deref())?;
    let nd = nondim_ode(&params, &k)?;
    log::info!("nondimensional parameters: {}", serde_json::to_string(&nd)?);
    let sol = simulate_ode(&nd)?;
    if !sol.is_complete() {
        log::warn!("thickness floor reached: {:?}", sol.status);
    }
    let csv = series_csv(
        &["h", "c", "f", "I"],
        &[&sol.h, &sol.c, &sol.f, &sol.intensity],
    );
    write(&cfg.out.join("solution.csv"), &csv)?;
    write(
        &cfg.out.join("solution.json"),
        &serde_json::to_string_pretty(&sol)?,
    )?;
    log::info!("wrote {}", cfg.out.display());
    Ok(())
}

fn simulate_pde_cmd(cfg: SimulatePdeConfig) -> Result<()> {
    let params: PdeParams =
        serde_json::from_str(&read(&cfg.params)?).context("parsing PDE parameters")?;
    let k = constants(cfg.constants.as_deref())?;
    let nd = nondim_pde(&params, &k)?;
    log::info!("nondimensional parameters: {}", serde_json::to_string(&nd)?);
    let opts = PdeOptions {
        keep_fields: cfg.full_fields,
        ..PdeOptions::with_nr(cfg.nr)
    };
    let sol = simulate_pde_with(&nd, &opts)?;
    if !sol.is_complete() {
        log::warn!("thickness floor reached: {:?}", sol.status);
    }
    log::info!("integrator statistics: {:?}", sol.stats);
    let csv = series_csv(
        &["h", "c", "f", "I"],
        &[&sol.h, &sol.c, &sol.f, &sol.intensity],
    );
    write(&cfg.out.join("solution.csv"), &csv)?;
    if let Some(fields) = &sol.fields {
        fields.write(&cfg.out, &nd)?;
    }
    log::info!("wrote {}", cfg.out.display());
    Ok(())
}

fn gen_dataset_cmd(cfg: GenDatasetConfig) -> Result<()> {
    let model: ModelKind = cfg.model.parse()?;
    let mut build = BuildConfig::new(model, cfg.count, cfg.seed);
    build.nr = cfg.nr;
    build.noise_mode = cfg.noise_mode.parse::<NoiseMode>()?;
    build.noise_scale = cfg.noise_scale.parse::<NoiseScale>()?;
    build.grouped_split = cfg.grouped_split;
    build.constants = constants(cfg.constants.as_deref())?;
    build.jobs = cfg.jobs;
    build.halton_start = cfg.halton_start;
    build.max_trials = cfg.max_trials;
    let ds = build_dataset(&build)?;
    ds.save(&cfg.out)?;
    if cfg.csv {
        ds.export_csv(&cfg.out)?;
    }
    let s = &ds.manifest.screening;
    log::info!(
        "{} rows from {} sources ({} trials, {} rejected)",
        ds.rows(),
        s.accepted,
        s.trials,
        s.rejected_total()
    );
    log::info!("manifest sha256 {}", ds.manifest_hash()?);
    Ok(())
}

fn history_path(cfg: &TrainCliConfig) -> PathBuf {
    cfg.history.clone().unwrap_or_else(|| {
        let mut name = cfg.out.as_os_str().to_owned();
        name.push(".loss.csv");
        PathBuf::from(name)
    })
}

fn train_cmd(cfg: TrainCliConfig) -> Result<()> {
    let kind: LearnerKind = cfg.kind.parse()?;
    let target: Target = cfg.target.parse()?;
    let ds = Dataset::load(&cfg.data)?;
    let (learner, history) =
        learners::train(kind, target, &ds, &cfg.train, |r| match r.test_loss {
            Some(t) => log::info!(
                "epoch {:>5} train_loss {:.6e} test_loss {:.6e}",
                r.epoch,
                r.train_loss,
                t
            ),
            None => log::info!("epoch {:>5} train_loss {:.6e}", r.epoch, r.train_loss),
        })?;
    save_checkpoint(&learner, &cfg.out)?;
    let hist = history_path(&cfg);
    write(&hist, &learners::history_csv(&history))?;
    log::info!("wrote {} and {}", cfg.out.display(), hist.display());
    Ok(())
}

fn evaluate_cmd(cfg: EvaluateConfig) -> Result<()> {
    let learner = load_checkpoint(&cfg.ckpt)?;
    let ds = Dataset::load(&cfg.data)?;
    learner.check_provenance(&ds.manifest_hash()?);
    let split: Split = cfg.split.parse()?;
    let report = evaluate(&learner, &ds, split, cfg.binning)?;
    report.emit(&cfg.out)?;
    let s = &report.summary;
    log::info!(
        "{} cases: mean rRMSE {:.4e}, median {:.4e}, max {:.4e}, {:.1}% below 0.1",
        s.cases,
        s.mean_rrmse,
        s.median_rrmse,
        s.max_rrmse,
        100.0 * s.fraction_below_0_1
    );
    Ok(())
}

fn parse_ext(text: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("--ext value {v:?}"))
        })
        .collect::<Result<_>>()?;
    if values.len() != learners::EXT_DIM || values.iter().any(|v| !v.is_finite()) {
        bail!("--ext expects three finite numbers: h0 (um), f0 (%), ts (s)");
    }
    Ok(values)
}

fn predict_cmd(cfg: PredictConfig) -> Result<()> {
    let learner = load_checkpoint(&cfg.ckpt)?;
    let bytes = fs::read(&cfg.input).with_context(|| format!("reading {}", cfg.input.display()))?;
    let n = learner.info.n;
    let intensity = ingest_intensity(&bytes, n)?;
    let ext = match (&cfg.ext, learner.kind().uses_ext()) {
        (Some(e), true) => Some(parse_ext(e)?),
        (None, true) => bail!("this checkpoint needs --ext h0,f0,ts"),
        (Some(_), false) => {
            log::warn!("--ext ignored: the checkpoint does not use external parameters");
            None
        }
        (None, false) => None,
    };
    let pred = learner.predict(&intensity, ext.as_deref())?;
    let name = match learner.target() {
        Target::H => "h",
        Target::C => "c",
    };
    let t = time_grid(n);
    let mut csv = format!("t,{name}\n");
    for (tk, v) in t.iter().zip(&pred) {
        csv.push_str(&format!("{tk},{v}\n"));
    }
    write(&cfg.out, &csv)?;
    log::info!("wrote {} samples to {}", pred.len(), cfg.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::SimulateOde(a) => simulate_ode_cmd(config::resolve("simulate-ode", file, &a)?),
        Command::SimulatePde(a) => simulate_pde_cmd(config::resolve("simulate-pde", file, &a)?),
        Command::GenDataset(a) => gen_dataset_cmd(config::resolve("gen-dataset", file, &a)?),
        Command::Train(a) => train_cmd(config::resolve("train", file, &a)?),
        Command::Evaluate(a) => evaluate_cmd(config::resolve("evaluate", file, &a)?),
        Command::Predict(a) => predict_cmd(config::resolve("predict", file, &a)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
