//! `fern` subcommands.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fern_core::data::OperatorDataset;
use fern_core::dense_nets::Activation;
use fern_core::evalkit::{basis_diagnostics, evaluate, sweep_basis_count, DEFAULT_BINS};
use fern_core::json::Provenance;
use fern_core::operator_models::{ModelKind, OperatorModel};
use fern_core::trainer::{train, BatchSize, TrainConfig};
use fern_core::{FernError, Result};
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, ArchConfig, ExperimentConfig, ModelConfig, SolverConfig, SEED_ENV};
use crate::pipeline::{file_hash, init_model, repro, GenConfig, Stamped};
use crate::presets;

#[derive(Debug, Parser)]
#[command(name = "fern", version, about = "Operator learning with learnable finite-element hat bases")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a PDE for random initial conditions and write a dataset.
    Gen(GenArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Relative L2 errors of a model on a dataset.
    Eval(EvalArgs),
    /// Center histogram and per-bin mean support of a hat model.
    Analyze(AnalyzeArgs),
    /// Test error against the number of hat functions.
    Sweep(SweepArgs),
    /// Run a bundled experiment preset (or a config file) end to end.
    Repro(ReproArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub pde: String,
    #[arg(long)]
    pub dofs: Option<usize>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 22)]
    pub sensors: usize,
    #[arg(long, default_value = "uniform:100")]
    pub mesh: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver cells (default per equation).
    #[arg(long, requires = "dt")]
    pub cells: Option<usize>,
    /// Solver time step (default per equation).
    #[arg(long, requires = "cells")]
    pub dt: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Hidden widths of each branch net.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub branch_hidden: Vec<usize>,
    #[arg(long, default_value = "tanh")]
    pub branch_act: Activation,
    /// Hidden widths of the DeepONet trunk.
    #[arg(long, value_delimiter = ',', default_value = "100,100,100,100,100,100")]
    pub trunk_hidden: Vec<usize>,
    #[arg(long, default_value = "tanh")]
    pub trunk_act: Activation,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lr_min: f64,
    /// Learning-rate factor for the hat or trunk parameters.
    #[arg(long, default_value_t = 1.0)]
    pub basis_lr_scale: f64,
    /// `full` or a mini-batch size.
    #[arg(long, default_value = "full")]
    pub batch: BatchSize,
    /// Fit targets divided by their RMS.
    #[arg(long)]
    pub normalize_targets: bool,
    /// Initial hat support.
    #[arg(long, default_value_t = 0.05)]
    pub h0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl OptimArgs {
    fn config(&self) -> TrainConfig {
        let mut c = TrainConfig {
            epochs: self.epochs,
            lr0: self.lr0,
            lr_min: self.lr_min,
            batch: self.batch,
            seed: self.seed,
            basis_lr_scale: self.basis_lr_scale,
            normalize_targets: self.normalize_targets,
            ..TrainConfig::default()
        };
        c.hat_init.h0 = self.h0;
        c
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "fern")]
    pub model: ModelKind,
    #[arg(long)]
    pub n_basis: usize,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch `epoch,lr,loss` CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose domain sets the bins (default [0, 1]).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// `bin_lo,bin_hi,count,mean_support` CSV; a stamped JSON copy is
    /// written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "20,40,60,80,100")]
    pub ns: Vec<usize>,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// `N,mean_err,std_err` CSV; a stamped JSON copy is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    /// Preset name (see `--list`).
    #[arg(required_unless_present_any = ["config", "list"])]
    pub preset: Option<String>,
    /// Experiment config file instead of a preset.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Output directory (default: the config's `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the preset names and exit.
    #[arg(long)]
    pub list: bool,
}

/// `FERN_SEED` when set, else `seed`.
fn seed_or_env(seed: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| FernError::domain(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(seed),
    }
}

/// `out` with its extension replaced by `.config.json`.
fn config_path(out: &Path) -> PathBuf {
    out.with_extension("config.json")
}

fn stamped_json(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => sweep(a),
        Command::Repro(a) => repro_cmd(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let kind: fern_pde::PdeKind = a.pde.parse()?;
    let cfg = GenConfig {
        pde: kind.name().into(),
        dofs: a.dofs.unwrap_or(kind.default_dofs()),
        sensors: a.sensors,
        n: a.n,
        mesh: a.mesh,
        seed: seed_or_env(a.seed)?,
        solver: a.cells.zip(a.dt).map(|(cells, dt)| SolverConfig { cells, dt }),
    };
    let ds = cfg.generate()?;
    ds.save(&a.out)?;
    fern_core::json::write_file(config_path(&a.out), &cfg)?;
    println!("wrote {} samples of {} to {}", ds.len(), ds.pde, a.out.display());
    Ok(())
}

/// Resolved inputs of a `train` run.
#[derive(Debug, Serialize, Deserialize)]
struct TrainRun {
    data: String,
    data_sha256: String,
    model: ModelConfig,
    training: TrainConfig,
}

fn model_config(kind: ModelKind, n_basis: usize, net: &NetArgs) -> ModelConfig {
    ModelConfig {
        kind,
        n_basis,
        branch: ArchConfig::new(&net.branch_hidden, net.branch_act),
        trunk: (kind == ModelKind::DeepONet).then(|| ArchConfig::new(&net.trunk_hidden, net.trunk_act)),
    }
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let ds = OperatorDataset::load(&a.data)?;
    let mut training = a.optim.config();
    training.seed = seed_or_env(training.seed)?;
    let run = TrainRun {
        data: a.data.display().to_string(),
        data_sha256: file_hash(&a.data)?,
        model: model_config(a.model, a.n_basis, &a.net),
        training,
    };
    let model = init_model(&run.model, ds.sensor_count(), &ds, run.training.hat_init.h0, run.training.seed)?;
    let (model, history) = train(model, &ds, &run.training)?;
    let prov = Provenance { config_hash: config_hash(&run)?, seed: run.training.seed };
    model.save(&a.out, Some(prov))?;
    fern_core::json::write_file(config_path(&a.out), &run)?;
    if let Some(h) = &a.history {
        history.write_csv(h)?;
    }
    println!(
        "trained {} N={} for {} epochs: final loss {:.6e}, wrote {}",
        run.model.kind,
        run.model.n_basis,
        history.len(),
        history.final_loss().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

/// Provenance of an artifact derived from existing files.
fn derived(files: &[&Path], model: Option<&Path>) -> Result<Provenance> {
    let hashes: Vec<String> = files.iter().map(file_hash).collect::<Result<_>>()?;
    let seed = match model {
        Some(p) => fern_core::json::read_file::<fern_core::operator_models::ModelBundle>(p)?
            .provenance
            .map_or(0, |p| p.seed),
        None => 0,
    };
    Ok(Provenance { config_hash: config_hash(&hashes)?, seed })
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let model = OperatorModel::load(&a.model)?;
    let ds = OperatorDataset::load(&a.data)?;
    let mut report = evaluate(&model, &ds)?;
    report.config.insert("model".into(), a.model.display().to_string());
    report.config.insert("data".into(), a.data.display().to_string());
    report.config.insert("pde".into(), ds.pde.clone());
    report.provenance = Some(derived(&[&a.model, &a.data], Some(&a.model))?);
    println!(
        "{} N={} on {} ({} samples): relative L2 {:.4} ± {:.4}",
        model.kind(),
        model.n_basis(),
        ds.pde,
        ds.len(),
        report.mean,
        report.std
    );
    if let Some(out) = &a.out {
        report.save(out)?;
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let model = OperatorModel::load(&a.model)?;
    let hat = model
        .hat()
        .ok_or_else(|| FernError::domain(format!("analyze needs a fern model, got {}", model.kind())))?;
    let (domain, inputs) = match &a.data {
        Some(p) => (OperatorDataset::load(p)?.domain, vec![a.model.as_path(), p.as_path()]),
        None => ([0.0, 1.0], vec![a.model.as_path()]),
    };
    let d = basis_diagnostics(hat, domain, a.bins)?;
    d.write_csv(&a.out)?;
    Stamped::new(&d, derived(&inputs, Some(&a.model))?).save(stamped_json(&a.out))?;
    println!("{} centers in {} bins ({} outside), wrote {}", d.total(), a.bins, d.overflow, a.out.display());
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let train_ds = OperatorDataset::load(&a.train)?;
    let test_ds = OperatorDataset::load(&a.test)?;
    let mut cfg = a.optim.config();
    cfg.seed = seed_or_env(cfg.seed)?;
    let branch = ArchConfig::new(&a.net.branch_hidden, a.net.branch_act).shape(train_ds.sensor_count(), 1)?;
    let s = sweep_basis_count(&train_ds, &test_ds, &a.ns, &branch, &cfg)?;
    s.write_csv(&a.out)?;
    let mut prov = derived(&[&a.train, &a.test], None)?;
    prov.config_hash = config_hash(&(prov.config_hash, &cfg, &a.ns))?;
    prov.seed = cfg.seed;
    Stamped::new(&s, prov).save(stamped_json(&a.out))?;
    for r in &s.rows {
        println!("N = {:>4}: {:.4} ± {:.4}", r.n, r.mean_err, r.std_err);
    }
    println!("log-log slope {:.3}", s.slope);
    Ok(())
}

fn repro_cmd(a: ReproArgs) -> Result<()> {
    if a.list {
        for c in presets::all() {
            println!("{:<22} {} dofs={} {} N={}", c.name, c.pde, c.dofs, c.model.kind, c.model.n_basis);
        }
        return Ok(());
    }
    let cfg = match (&a.preset, &a.config) {
        (_, Some(path)) => ExperimentConfig::load(path)?,
        (Some(name), None) => presets::find(name)?,
        (None, None) => return Err(FernError::domain("name a preset or pass --config")),
    };
    let mut cfg = cfg.with_env_seed()?;
    if let Some(out) = &a.out {
        cfg.output_dir = out.display().to_string();
    }
    let dir = PathBuf::from(&cfg.output_dir);
    let done = repro(&cfg, &dir)?;
    println!(
        "{}: {} N={} test relative L2 {:.4} ± {:.4} over {} samples",
        cfg.name,
        cfg.model.kind,
        cfg.model.n_basis,
        done.report.mean,
        done.report.std,
        done.report.errors.len()
    );
    if let Some(s) = &done.sweep {
        println!("sweep slope {:.3}", s.slope);
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

/// 1 I/O, 2 bad arguments, 3 schema or grid mismatch, 4 numerical failure.
pub fn exit_code(err: &FernError) -> i32 {
    match err {
        FernError::Domain(_) => 2,
        FernError::Schema(_) | FernError::Json(_) | FernError::Grid(_) => 3,
        FernError::Training { .. } | FernError::Solver(_) => 4,
        FernError::Io(_) | FernError::Csv(_) => 1,
    }
}
