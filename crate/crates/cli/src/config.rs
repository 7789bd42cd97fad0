//! Experiment configuration files.

use std::path::Path;

use fern_core::dense_nets::{Activation, NetShape};
use fern_core::json::{self, Provenance};
use fern_core::operator_models::ModelKind;
use fern_core::trainer::TrainConfig;
use fern_core::{FernError, Result};
use fern_pde::{MeshPolicy, PdeKind, PdeSpec, SolverSettings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable that replaces every seed of a config.
pub const SEED_ENV: &str = "FERN_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub n: usize,
    pub seed: u64,
    /// `uniform:M`, `thirds:M` or `custom:x1,x2,..`.
    pub mesh: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub cells: usize,
    pub dt: f64,
}

/// Hidden widths and activation of a fully connected net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl ArchConfig {
    pub fn new(hidden: &[usize], activation: Activation) -> Self {
        Self { hidden: hidden.to_vec(), activation }
    }

    pub fn shape(&self, input: usize, output: usize) -> Result<NetShape> {
        let mut widths = vec![input];
        widths.extend_from_slice(&self.hidden);
        widths.push(output);
        NetShape::mlp(&widths, self.activation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_basis: usize,
    pub branch: ArchConfig,
    /// DeepONet only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunk: Option<ArchConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub pde: String,
    pub dofs: usize,
    pub sensors: usize,
    pub train_data: SplitConfig,
    pub test_data: SplitConfig,
    /// Solver grid and step; the equation's defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    pub model: ModelConfig,
    pub training: TrainConfig,
    /// Basis counts for an error-vs-N sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<usize>,
    pub bins: usize,
    pub output_dir: String,
}

impl ExperimentConfig {
    pub fn kind(&self) -> Result<PdeKind> {
        self.pde.parse()
    }

    pub fn spec(&self) -> Result<PdeSpec> {
        Ok(PdeSpec::new(self.kind()?))
    }

    pub fn settings(&self) -> Result<SolverSettings> {
        let kind = self.kind()?;
        Ok(self.solver.map_or(kind.default_settings(), |s| SolverSettings { cells: s.cells, dt: s.dt }))
    }

    pub fn branch_shape(&self) -> Result<NetShape> {
        self.model.branch.shape(self.sensors, 1)
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if !kind.allowed_dofs().contains(&self.dofs) {
            return Err(FernError::domain(format!("field `dofs`: {kind} allows {:?}", kind.allowed_dofs())));
        }
        for (field, split) in [("train_data", &self.train_data), ("test_data", &self.test_data)] {
            split
                .mesh
                .parse::<MeshPolicy>()
                .map_err(|e| FernError::domain(format!("field `{field}.mesh`: {e}")))?;
            if split.n == 0 {
                return Err(FernError::domain(format!("field `{field}.n` must be positive")));
            }
        }
        if self.model.n_basis == 0 {
            return Err(FernError::domain("field `model.n_basis` must be positive"));
        }
        if (self.model.kind == ModelKind::DeepONet) != self.model.trunk.is_some() {
            return Err(FernError::domain("field `model.trunk` is required for deeponet and only for deeponet"));
        }
        if self.bins == 0 {
            return Err(FernError::domain("field `bins` must be positive"));
        }
        self.branch_shape()?;
        self.training.validate()
    }

    /// Replaces every seed with `seed` (test data gets `seed + 1`).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train_data.seed = seed;
        self.test_data.seed = seed.wrapping_add(1);
        self.training.seed = seed;
        self
    }

    /// Applies `FERN_SEED` when it is set.
    pub fn with_env_seed(self) -> Result<Self> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let seed = v
                    .trim()
                    .parse()
                    .map_err(|_| FernError::domain(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
                Ok(self.with_seed(seed))
            }
            Err(_) => Ok(self),
        }
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    pub fn provenance(&self, seed: u64) -> Result<Provenance> {
        Ok(Provenance { config_hash: self.hash()?, seed })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        json::write_file(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = json::from_str(&text).map_err(|e| FernError::Schema(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Hex SHA-256 of the artifact serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let text = json::to_string(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}
