//! Bundled experiment configs.

use fern_core::dense_nets::Activation;
use fern_core::operator_models::ModelKind;
use fern_core::trainer::TrainConfig;
use fern_core::{FernError, Result};
use fern_pde::PdeKind;

use crate::config::{ArchConfig, ExperimentConfig, ModelConfig, SplitConfig};

struct Recipe {
    name: &'static str,
    pde: PdeKind,
    dofs: usize,
    sensors: usize,
    train: (usize, &'static str),
    test: usize,
    kind: ModelKind,
    n_basis: usize,
    branch: Activation,
    trunk: Option<(&'static [usize], Activation)>,
    lr0: f64,
    basis_lr_scale: f64,
    normalize: bool,
    sweep: &'static [usize],
}

const FAST: (f64, f64) = (0.1, 0.1);
const GENTLE: (f64, f64) = (1e-2, 1.0);

fn recipe(name: &'static str, pde: PdeKind, dofs: usize, train: (usize, &'static str), test: usize, n_basis: usize) -> Recipe {
    Recipe {
        name,
        pde,
        dofs,
        sensors: 22,
        train,
        test,
        kind: ModelKind::Fern,
        n_basis,
        branch: Activation::Tanh,
        trunk: None,
        lr0: FAST.0,
        basis_lr_scale: FAST.1,
        normalize: false,
        sweep: &[],
    }
}

fn recipes() -> Vec<Recipe> {
    use PdeKind::*;
    let shallow: &'static [usize] = &[100];
    vec![
        recipe("ac-1dof-fern40", AllenCahn, 1, (167, "uniform:100"), 190, 40),
        Recipe {
            kind: ModelKind::DeepONet,
            trunk: Some((shallow, Activation::Relu)),
            lr0: 1e-3,
            basis_lr_scale: 1.0,
            ..recipe("ac-1dof-deeponet2", AllenCahn, 1, (167, "uniform:100"), 190, 40)
        },
        recipe("ac-2dof-fern80", AllenCahn, 2, (250, "uniform:100"), 100, 80),
        Recipe { sweep: &[20, 40, 60, 80, 100], ..recipe("ac-2dof-sweep", AllenCahn, 2, (250, "uniform:100"), 100, 80) },
        Recipe { branch: Activation::Relu, ..recipe("ch-1dof-fern60", CahnHilliard, 1, (250, "uniform:100"), 190, 60) },
        Recipe { branch: Activation::Relu, ..recipe("ch-2dof-fern250", CahnHilliard, 2, (1000, "uniform:100"), 100, 250) },
        Recipe {
            lr0: GENTLE.0,
            basis_lr_scale: GENTLE.1,
            ..recipe("fp-uniform-fern30", FokkerPlanck, 2, (42, "uniform:64"), 100, 30)
        },
        Recipe {
            lr0: GENTLE.0,
            basis_lr_scale: GENTLE.1,
            ..recipe("fp-thirds-fern30", FokkerPlanck, 2, (42, "thirds:64"), 100, 30)
        },
        Recipe {
            lr0: GENTLE.0,
            basis_lr_scale: GENTLE.1,
            ..recipe("fp-uniform-fern40", FokkerPlanck, 2, (42, "uniform:64"), 100, 40)
        },
        recipe("ad-fern20", AggregationDiffusion, 1, (42, "uniform:64"), 100, 20),
        Recipe { lr0: 1e-2, basis_lr_scale: 0.3, normalize: true, ..recipe("ks-thirds-fern40", KellerSegel, 1, (42, "thirds:49"), 100, 40) },
        Recipe { sensors: 100, ..recipe("kdv-fern80", Kdv, 1, (250, "uniform:64"), 100, 80) },
        recipe("burgers-fern40", Burgers, 2, (84, "uniform:64"), 100, 40),
    ]
}

/// Presets with the same equation, free parameters and sampling share
/// their datasets; `index` numbers the distinct datasets.
fn build(index: usize, r: Recipe) -> ExperimentConfig {
    let base = 1000 + 10 * index as u64;
    let test_mesh = r.train.1.to_string();
    ExperimentConfig {
        name: r.name.into(),
        pde: r.pde.name().into(),
        dofs: r.dofs,
        sensors: r.sensors,
        train_data: SplitConfig { n: r.train.0, seed: base, mesh: r.train.1.into() },
        test_data: SplitConfig { n: r.test, seed: base + 1, mesh: test_mesh },
        solver: None,
        model: ModelConfig {
            kind: r.kind,
            n_basis: r.n_basis,
            branch: ArchConfig::new(&[20], r.branch),
            trunk: r.trunk.map(|(h, a)| ArchConfig::new(h, a)),
        },
        training: TrainConfig {
            lr0: r.lr0,
            basis_lr_scale: r.basis_lr_scale,
            normalize_targets: r.normalize,
            seed: base,
            ..TrainConfig::default()
        },
        sweep: r.sweep.to_vec(),
        bins: fern_core::evalkit::DEFAULT_BINS,
        output_dir: format!("runs/{}", r.name),
    }
}

/// Preset names in listing order.
pub const NAMES: [&str; 13] = [
    "ac-1dof-fern40",
    "ac-1dof-deeponet2",
    "ac-2dof-fern80",
    "ac-2dof-sweep",
    "ch-1dof-fern60",
    "ch-2dof-fern250",
    "fp-uniform-fern30",
    "fp-thirds-fern30",
    "fp-uniform-fern40",
    "ad-fern20",
    "ks-thirds-fern40",
    "kdv-fern80",
    "burgers-fern40",
];

pub fn all() -> Vec<ExperimentConfig> {
    let mut seen: Vec<(PdeKind, usize, usize, (usize, &str))> = Vec::new();
    recipes()
        .into_iter()
        .map(|r| {
            let key = (r.pde, r.dofs, r.sensors, r.train);
            let index = seen.iter().position(|k| *k == key).unwrap_or_else(|| {
                seen.push(key);
                seen.len() - 1
            });
            build(index, r)
        })
        .collect()
}

pub fn find(name: &str) -> Result<ExperimentConfig> {
    all().into_iter().find(|c| c.name == name).ok_or_else(|| {
        FernError::domain(format!("unknown preset `{name}`; available: {}", NAMES.join(", ")))
    })
}
