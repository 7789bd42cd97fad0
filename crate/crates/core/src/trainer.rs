//! Deterministic Adam training with a cosine-annealed learning rate.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{group_by_grid, GridGroup, OperatorDataset};
use crate::error::{FernError, Result};
use crate::hat_basis::DEFAULT_H_MIN;
use crate::operator_models::OperatorModel;
use crate::seeding::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HatInit {
    pub h0: f64,
}

impl Default for HatInit {
    fn default() -> Self {
        Self { h0: 0.05 }
    }
}

/// `"full"` or a positive mini-batch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSize {
    #[default]
    Full,
    Size(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Full => s.serialize_str("full"),
            Self::Size(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Size(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Size(n) => Ok(Self::Size(n)),
            Raw::Word(w) if w == "full" => Ok(Self::Full),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("batch must be \"full\" or an integer, got `{w}`"))),
        }
    }
}

impl std::str::FromStr for BatchSize {
    type Err = FernError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(Self::Full);
        }
        s.parse()
            .map(Self::Size)
            .map_err(|_| FernError::domain(format!("batch must be `full` or an integer, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub batch: BatchSize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub h_min: f64,
    pub hat_init: HatInit,
    /// Learning-rate multiplier for the basis blocks (hat parameters or trunk).
    pub basis_lr_scale: f64,
    /// Fit targets divided by their RMS, then fold the factor into the last
    /// branch layer. Loss history is in the divided units.
    pub normalize_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            lr0: 1e-3,
            lr_min: 0.0,
            batch: BatchSize::Full,
            seed: 0,
            adam: AdamConfig::default(),
            h_min: DEFAULT_H_MIN,
            hat_init: HatInit::default(),
            basis_lr_scale: 1.0,
            normalize_targets: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(FernError::domain("epochs must be at least 1"));
        }
        if !(self.lr0 > self.lr_min && self.lr_min >= 0.0) {
            return Err(FernError::domain(format!(
                "learning rates need lr0 > lr_min ≥ 0 (got {} and {})",
                self.lr0, self.lr_min
            )));
        }
        if self.batch == BatchSize::Size(0) {
            return Err(FernError::domain("batch size must be positive"));
        }
        if !(self.basis_lr_scale > 0.0 && self.basis_lr_scale.is_finite()) {
            return Err(FernError::domain("basis_lr_scale must be positive"));
        }
        if !(self.h_min > 0.0) {
            return Err(FernError::domain("h_min must be positive"));
        }
        Ok(())
    }
}

/// Cosine annealing from `lr0` at epoch 0 to `lr_min` at epoch `total − 1`.
pub fn cosine_lr(epoch: usize, total: usize, lr0: f64, lr_min: f64) -> f64 {
    if total <= 1 {
        return lr0;
    }
    let phase = std::f64::consts::PI * epoch as f64 / (total - 1) as f64;
    lr_min + 0.5 * (lr0 - lr_min) * (1.0 + phase.cos())
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(FernError::domain(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// Moment estimates for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected Adam update. `block` names the parameters in errors.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    adam: &AdamConfig,
    block: &str,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(FernError::domain(format!(
            "block `{block}`: {} params, {} grads, state of {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(FernError::Training {
            epoch: 0,
            message: format!("non-finite gradient in block `{block}` at index {i}"),
        });
    }
    state.t += 1;
    let bc1 = 1.0 - adam.beta1.powi(state.t as i32);
    let bc2 = 1.0 - adam.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = adam.beta1 * state.m[i] + (1.0 - adam.beta1) * g;
        state.v[i] = adam.beta2 * state.v[i] + (1.0 - adam.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + adam.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub lr: Vec<f64>,
    /// Seconds since training started, at the end of each epoch.
    pub wall_time: Vec<f64>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss.last().copied()
    }

    /// `epoch,lr,loss` rows; no wall time.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "lr", "loss"])?;
        for (e, (lr, loss)) in self.lr.iter().zip(&self.loss).enumerate() {
            w.write_record([e.to_string(), format!("{lr:.16e}"), format!("{loss:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows, grid groups and targets of one batch.
struct Batch {
    inputs: Array2<f64>,
    groups: Vec<GridGroup>,
    targets: Vec<Array2<f64>>,
    points: usize,
}

impl Batch {
    fn new(ds: &OperatorDataset, indices: &[usize]) -> Self {
        let inputs = ds.input_matrix(indices);
        let groups = group_by_grid(indices.iter().enumerate().map(|(r, &i)| (r, ds.samples[i].x_out.as_slice())));
        let targets: Vec<Array2<f64>> = groups
            .iter()
            .map(|g| {
                Array2::from_shape_fn((g.samples.len(), g.grid.len()), |(r, m)| {
                    ds.samples[indices[g.samples[r]]].v_out[m]
                })
            })
            .collect();
        let points = targets.iter().map(Array2::len).sum();
        Self { inputs, groups, targets, points }
    }
}

/// Loss and gradient of the batch MSE.
fn batch_step(model: &OperatorModel, batch: &Batch) -> Result<(f64, crate::operator_models::ModelGrads)> {
    let fwd = model.forward(batch.inputs.view(), &batch.groups)?;
    let scale = 1.0 / batch.points as f64;
    let mut sq = 0.0;
    let residuals: Vec<Array2<f64>> = (0..fwd.n_groups())
        .map(|g| {
            let diff = fwd.predictions(g) - &batch.targets[g];
            sq += diff.iter().map(|d| d * d).sum::<f64>();
            diff * (2.0 * scale)
        })
        .collect();
    let grads = model.backward(&fwd, &residuals)?;
    Ok((sq * scale, grads))
}

/// Mean squared error of `model` over every sample and point of `ds`.
pub fn dataset_loss(model: &OperatorModel, ds: &OperatorDataset) -> Result<f64> {
    let indices: Vec<usize> = (0..ds.len()).collect();
    let batch = Batch::new(ds, &indices);
    let fwd = model.forward(batch.inputs.view(), &batch.groups)?;
    let sq: f64 = (0..fwd.n_groups())
        .map(|g| (fwd.predictions(g) - &batch.targets[g]).iter().map(|d| d * d).sum::<f64>())
        .sum();
    Ok(sq / batch.points as f64)
}

/// Root mean square of every training target value (1 when all are zero).
pub fn target_rms(ds: &OperatorDataset) -> f64 {
    let (sq, n) = ds
        .samples
        .iter()
        .flat_map(|s| &s.v_out)
        .fold((0.0, 0usize), |(sq, n), v| (sq + v * v, n + 1));
    let rms = (sq / n.max(1) as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        rms
    } else {
        1.0
    }
}

/// Multiplies every branch's output layer by `factor`.
fn scale_branch_outputs(model: &mut OperatorModel, factor: f64) {
    let last = model.branches()[0].shape().layers.last().expect("branch has layers").param_len();
    for (name, params) in model.param_blocks_mut() {
        if name.starts_with("branch") {
            let n = params.len();
            params[n - last..].iter_mut().for_each(|w| *w *= factor);
        }
    }
}

pub fn train(
    model: OperatorModel,
    ds: &OperatorDataset,
    config: &TrainConfig,
) -> Result<(OperatorModel, TrainHistory)> {
    if !config.normalize_targets {
        return train_raw(model, ds, config);
    }
    let rms = target_rms(ds);
    let mut scaled = ds.clone();
    for s in &mut scaled.samples {
        s.v_out.iter_mut().for_each(|v| *v /= rms);
    }
    log::info!("fitting targets divided by their RMS {rms:.6e}");
    let (mut model, history) = train_raw(model, &scaled, config)?;
    scale_branch_outputs(&mut model, rms);
    Ok((model, history))
}

fn train_raw(
    mut model: OperatorModel,
    ds: &OperatorDataset,
    config: &TrainConfig,
) -> Result<(OperatorModel, TrainHistory)> {
    config.validate()?;
    if ds.is_empty() {
        return Err(FernError::domain("cannot train on an empty dataset"));
    }
    if ds.sensor_count() != model.branch_input_dim() {
        return Err(FernError::domain(format!(
            "dataset has {} sensors but the branch networks take {}",
            ds.sensor_count(),
            model.branch_input_dim()
        )));
    }
    model.project(config.h_min);
    let mut states: Vec<AdamState> = model
        .param_blocks_mut()
        .iter()
        .map(|(_, p)| AdamState::new(p.len()))
        .collect();
    let all: Vec<usize> = (0..ds.len()).collect();
    let full = match config.batch {
        BatchSize::Full => Some(Batch::new(ds, &all)),
        BatchSize::Size(n) if n >= ds.len() => Some(Batch::new(ds, &all)),
        BatchSize::Size(_) => None,
    };
    let mut history = TrainHistory::default();
    let start = Instant::now();
    let mut order = all.clone();
    for epoch in 0..config.epochs {
        let lr = cosine_lr(epoch, config.epochs, config.lr0, config.lr_min);
        let mut step = |batch: &Batch, model: &mut OperatorModel| -> Result<f64> {
            let (loss, grads) = batch_step(model, batch)?;
            if !loss.is_finite() {
                return Err(FernError::Training { epoch, message: format!("loss became {loss}") });
            }
            let grad_blocks = grads.blocks();
            for ((state, (name, params)), g) in states.iter_mut().zip(model.param_blocks_mut()).zip(grad_blocks) {
                let lr = if name.starts_with("branch") { lr } else { lr * config.basis_lr_scale };
                adam_step(params, g, state, lr, &config.adam, &name).map_err(|e| match e {
                    FernError::Training { message, .. } => FernError::Training { epoch, message },
                    other => other,
                })?;
            }
            model.project(config.h_min);
            Ok(loss)
        };
        let loss = match (&full, config.batch) {
            (Some(batch), _) => step(batch, &mut model)?,
            (None, BatchSize::Size(size)) => {
                order.shuffle(&mut stream_rng(config.seed, epoch as u64));
                let mut weighted = 0.0;
                let mut points = 0;
                for chunk in order.chunks(size) {
                    let batch = Batch::new(ds, chunk);
                    weighted += step(&batch, &mut model)? * batch.points as f64;
                    points += batch.points;
                }
                weighted / points as f64
            }
            (None, BatchSize::Full) => unreachable!("full batch is prepared up front"),
        };
        history.loss.push(loss);
        history.lr.push(lr);
        history.wall_time.push(start.elapsed().as_secs_f64());
        if epoch >= 100 && epoch % 100 == 0 && loss > history.loss[epoch - 100] {
            log::warn!(
                "training loss rose over epochs {}..{}: {:.3e} -> {:.3e}",
                epoch - 100,
                epoch,
                history.loss[epoch - 100],
                loss
            );
        }
        if epoch % 250 == 0 || epoch + 1 == config.epochs {
            log::debug!("epoch {epoch}: lr {lr:.3e}, loss {loss:.6e}");
        }
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::{synthetic, uniform};
    use crate::dense_nets::{Activation, NetShape};
    use crate::operator_models::{DeepONetModel, FernModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cosine_endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 2000, 1e-3, 1e-5), 1e-3);
        assert!((cosine_lr(1999, 2000, 1e-3, 1e-5) - 1e-5).abs() < 1e-18);
        assert!((cosine_lr(50, 101, 2.0, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(cosine_lr(0, 1, 0.1, 0.0), 0.1);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[3.0, 4.0, 5.0], &[1.0, 2.0, 3.0]).unwrap(), 4.0);
        assert!(mse_loss(&[1.0], &[]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p: Vec<f64> = (0..37).map(|_| rng.gen()).collect();
        let t: Vec<f64> = (0..37).map(|_| rng.gen()).collect();
        let mut acc = 0.0;
        for i in 0..37 {
            acc += (p[i] - t[i]).powi(2);
        }
        assert!((mse_loss(&p, &t).unwrap() - acc / 37.0).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_grads_leave_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1, &AdamConfig::default(), "b").unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 0.1, &AdamConfig::default(), "b").unwrap();
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        for _ in 0..200 {
            let g = 2.0 * p[0];
            adam_step(&mut p, &[g], &mut s, 0.1, &AdamConfig::default(), "theta").unwrap();
        }
        assert!(p[0].abs() < 1e-2, "theta = {}", p[0]);
    }

    #[test]
    fn adam_names_the_bad_block() {
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        let err = adam_step(&mut p, &[0.0, f64::NAN, 0.0], &mut s, 0.1, &AdamConfig::default(), "hat.supports")
            .unwrap_err();
        assert!(err.to_string().contains("hat.supports"));
    }

    #[test]
    fn batch_size_parses_and_serializes() {
        assert_eq!("full".parse::<BatchSize>().unwrap(), BatchSize::Full);
        assert_eq!("32".parse::<BatchSize>().unwrap(), BatchSize::Size(32));
        assert!("x".parse::<BatchSize>().is_err());
        assert_eq!(serde_json::to_string(&BatchSize::Full).unwrap(), "\"full\"");
        assert_eq!(serde_json::from_str::<BatchSize>("16").unwrap(), BatchSize::Size(16));
    }

    #[test]
    fn config_invariants() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lr0: 0.0, ..Default::default() }.validate().is_err());
    }

    fn small_fern(seed: u64) -> OperatorModel {
        let b = NetShape::mlp(&[6, 8, 1], Activation::Tanh).unwrap();
        FernModel::init(&b, 6, [0.0, 1.0], 0.15, seed).unwrap().into()
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let ds = synthetic(12, 6, &[uniform(11), uniform(7)]);
        let cfg = TrainConfig { epochs: 150, lr0: 1e-2, ..Default::default() };
        let (a, ha) = train(small_fern(3), &ds, &cfg).unwrap();
        let (b, hb) = train(small_fern(3), &ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.loss, hb.loss);
        assert_eq!(ha.len(), 150);
        assert!(ha.loss[149] < 0.5 * ha.loss[0]);
        assert!(a.hat().unwrap().min_support() >= cfg.h_min);
    }

    #[test]
    fn basis_rate_scales_only_the_hat_step() {
        let ds = synthetic(6, 6, &[uniform(11)]);
        let run = |scale: f64| {
            let cfg = TrainConfig { epochs: 1, lr0: 1e-2, basis_lr_scale: scale, ..Default::default() };
            train(small_fern(2), &ds, &cfg).unwrap().0
        };
        let start = small_fern(2);
        let (full, quarter) = (run(1.0), run(0.25));
        assert_eq!(full.branches(), quarter.branches());
        let a0 = &start.hat().unwrap().centers;
        for ((f, q), s) in full.hat().unwrap().centers.iter().zip(&quarter.hat().unwrap().centers).zip(a0) {
            assert!(((q - s) - 0.25 * (f - s)).abs() < 1e-12);
        }
        assert!(TrainConfig { basis_lr_scale: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn normalized_training_matches_training_on_divided_targets() {
        let mut ds = synthetic(6, 6, &[uniform(11)]);
        for s in &mut ds.samples {
            s.v_out.iter_mut().for_each(|v| *v *= 40.0);
        }
        let rms = target_rms(&ds);
        let mut divided = ds.clone();
        for s in &mut divided.samples {
            s.v_out.iter_mut().for_each(|v| *v /= rms);
        }
        let cfg = TrainConfig { epochs: 30, lr0: 1e-2, ..Default::default() };
        let (plain, hp) = train(small_fern(3), &divided, &cfg).unwrap();
        let (norm, hn) = train(small_fern(3), &ds, &TrainConfig { normalize_targets: true, ..cfg }).unwrap();
        assert_eq!(hp.loss, hn.loss);
        assert_eq!(plain.hat(), norm.hat());
        let xs = uniform(23);
        for s in &ds.samples {
            let p = plain.predict(&s.u_sensors, &xs).unwrap();
            let n = norm.predict(&s.u_sensors, &xs).unwrap();
            for (a, b) in p.iter().zip(&n) {
                assert!((a * rms - b).abs() <= 1e-12 * rms.max(b.abs()), "{a} {b}");
            }
        }
    }

    #[test]
    fn mini_batches_are_deterministic() {
        let ds = synthetic(10, 6, &[uniform(9)]);
        let cfg = TrainConfig { epochs: 20, lr0: 1e-2, batch: BatchSize::Size(3), ..Default::default() };
        let (a, _) = train(small_fern(1), &ds, &cfg).unwrap();
        let (b, _) = train(small_fern(1), &ds, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deeponet_trains() {
        let ds = synthetic(8, 6, &[uniform(9)]);
        let b = NetShape::mlp(&[6, 8, 1], Activation::Tanh).unwrap();
        let model = DeepONetModel::init(&b, 4, &[10], Activation::Tanh, 0).unwrap().into();
        let cfg = TrainConfig { epochs: 100, lr0: 1e-2, ..Default::default() };
        let before = dataset_loss(&model, &ds).unwrap();
        let (trained, hist) = train(model, &ds, &cfg).unwrap();
        assert!(dataset_loss(&trained, &ds).unwrap() < 0.5 * before);
        assert!((hist.loss[0] - before).abs() < 1e-12);
    }

    #[test]
    fn sensor_mismatch_is_rejected() {
        let ds = synthetic(3, 5, &[uniform(4)]);
        assert!(matches!(
            train(small_fern(0), &ds, &TrainConfig::default()),
            Err(FernError::Domain(_))
        ));
    }

    #[test]
    fn history_csv_has_one_row_per_epoch() {
        let hist = TrainHistory { loss: vec![1.0, 0.5], lr: vec![1e-3, 0.0], wall_time: vec![0.1, 0.2] };
        let dir = std::env::temp_dir().join(format!("fern-hist-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("h.csv");
        hist.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("epoch,lr,loss\n0,1.0000000000000000e-3,"));
        std::fs::remove_dir_all(dir).ok();
    }
}
