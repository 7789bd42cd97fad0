//! Dataset generation, model construction, training and evaluation driven
//! by an [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use fern_core::data::OperatorDataset;
use fern_core::evalkit::{basis_diagnostics, evaluate, sweep_basis_count, BasisDiagnostics, EvalReport, Sweep};
use fern_core::json::{self, Provenance, SCHEMA_VERSION};
use fern_core::operator_models::{DeepONetModel, FernModel, ModelKind, OperatorModel, PodModel};
use fern_core::pod::{compute_pod, SnapshotMatrix};
use fern_core::trainer::{train, TrainHistory};
use fern_core::{FernError, Result};
use fern_pde::{generate_dataset, GenRequest, MeshPolicy, PdeSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{config_hash, ExperimentConfig, ModelConfig, SplitConfig, SolverConfig};

/// JSON body with the schema version and provenance stamped on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub schema_version: u32,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Stamped<T> {
    pub fn new(body: T, provenance: Provenance) -> Self {
        Self { schema_version: SCHEMA_VERSION, provenance, body }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        json::write_file(path, self)
    }
}

/// Everything that determines one generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub pde: String,
    pub dofs: usize,
    pub sensors: usize,
    pub n: usize,
    pub mesh: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
}

impl GenConfig {
    pub fn from_experiment(cfg: &ExperimentConfig, split: &SplitConfig) -> Self {
        Self {
            pde: cfg.pde.clone(),
            dofs: cfg.dofs,
            sensors: cfg.sensors,
            n: split.n,
            mesh: split.mesh.clone(),
            seed: split.seed,
            solver: cfg.solver,
        }
    }

    pub fn request(&self) -> Result<(PdeSpec, GenRequest)> {
        let kind: fern_pde::PdeKind = self.pde.parse()?;
        let mesh: MeshPolicy = self.mesh.parse()?;
        let mut req = GenRequest::new(kind, self.n, mesh, self.seed);
        req.dofs = self.dofs;
        req.sensors = self.sensors;
        if let Some(s) = self.solver {
            req.settings = fern_pde::SolverSettings { cells: s.cells, dt: s.dt };
        }
        Ok((PdeSpec::new(kind), req))
    }

    /// Solves every sample and stamps the dataset with this config's hash.
    pub fn generate(&self) -> Result<OperatorDataset> {
        let (spec, req) = self.request()?;
        let mut ds = generate_dataset(&spec, &req)?;
        ds.provenance = Some(Provenance { config_hash: config_hash(self)?, seed: self.seed });
        Ok(ds)
    }
}

/// Fresh model for `train_ds`. POD modes come from the training outputs.
pub fn init_model(model: &ModelConfig, sensors: usize, train_ds: &OperatorDataset, h0: f64, seed: u64) -> Result<OperatorModel> {
    let branch = model.branch.shape(sensors, 1)?;
    let built: OperatorModel = match model.kind {
        ModelKind::Fern => FernModel::init(&branch, model.n_basis, train_ds.domain, h0, seed)?.into(),
        ModelKind::DeepONet => {
            let trunk = model
                .trunk
                .as_ref()
                .ok_or_else(|| FernError::domain("a DeepONet model needs a trunk architecture"))?;
            DeepONetModel::init(&branch, model.n_basis, &trunk.hidden, trunk.activation, seed)?.into()
        }
        ModelKind::Pod => {
            let snaps = SnapshotMatrix::from_dataset(train_ds)?;
            let modes = compute_pod(&snaps, model.n_basis)?;
            PodModel::init(&branch, snaps.grid.clone(), modes, seed)?.into()
        }
    };
    Ok(built)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_hash(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// `dir/name` as a path.
fn at(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[derive(Debug, Clone)]
pub struct ReproOutcome {
    pub config: ExperimentConfig,
    pub report: EvalReport,
    pub history: TrainHistory,
    pub model: OperatorModel,
    pub diagnostics: Option<BasisDiagnostics>,
    pub sweep: Option<Sweep>,
    pub files: Vec<PathBuf>,
}

/// Runs a whole experiment and writes every artifact into `dir`:
/// `config.json`, `train.json`, `test.json`, `model.json`, `history.csv`,
/// `report.json`, plus `basis.csv`/`basis.json` for hat models and
/// `sweep.csv`/`sweep.json` when the config lists basis counts.
pub fn repro(cfg: &ExperimentConfig, dir: &Path) -> Result<ReproOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let prov = cfg.provenance(cfg.training.seed)?;
    let mut files = vec![];
    let mut keep = |p: PathBuf| -> PathBuf {
        files.push(p.clone());
        p
    };
    cfg.save(keep(at(dir, "config.json")))?;

    log::info!("{}: generating {} training samples", cfg.name, cfg.train_data.n);
    let train_ds = GenConfig::from_experiment(cfg, &cfg.train_data).generate()?;
    train_ds.save(keep(at(dir, "train.json")))?;
    log::info!("{}: generating {} test samples", cfg.name, cfg.test_data.n);
    let test_ds = GenConfig::from_experiment(cfg, &cfg.test_data).generate()?;
    test_ds.save(keep(at(dir, "test.json")))?;

    let model = init_model(&cfg.model, cfg.sensors, &train_ds, cfg.training.hat_init.h0, cfg.training.seed)?;
    let (model, history) = train(model, &train_ds, &cfg.training)?;
    model.save(keep(at(dir, "model.json")), Some(prov.clone()))?;
    history.write_csv(keep(at(dir, "history.csv")))?;

    let mut report = evaluate(&model, &test_ds)?;
    report.config.insert("experiment".into(), cfg.name.clone());
    report.config.insert("pde".into(), cfg.pde.clone());
    report.config.insert("N".into(), cfg.model.n_basis.to_string());
    report.provenance = Some(prov.clone());
    report.save(keep(at(dir, "report.json")))?;
    log::info!("{}: test error {:.4} ± {:.4}", cfg.name, report.mean, report.std);

    let diagnostics = match model.hat() {
        Some(hat) => {
            let d = basis_diagnostics(hat, train_ds.domain, cfg.bins)?;
            d.write_csv(keep(at(dir, "basis.csv")))?;
            Stamped::new(&d, prov.clone()).save(keep(at(dir, "basis.json")))?;
            Some(d)
        }
        None => None,
    };

    let sweep = if cfg.sweep.is_empty() {
        None
    } else {
        let s = sweep_basis_count(&train_ds, &test_ds, &cfg.sweep, &cfg.branch_shape()?, &cfg.training)?;
        s.write_csv(keep(at(dir, "sweep.csv")))?;
        Stamped::new(&s, prov.clone()).save(keep(at(dir, "sweep.json")))?;
        Some(s)
    };

    Ok(ReproOutcome { config: cfg.clone(), report, history, model, diagnostics, sweep, files })
}
