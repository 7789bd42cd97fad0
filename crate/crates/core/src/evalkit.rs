//! Evaluation statistics and learned-basis diagnostics.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::OperatorDataset;
use crate::dense_nets::NetShape;
use crate::error::{FernError, Result};
use crate::hat_basis::HatParams;
use crate::json::{self, Provenance, SCHEMA_VERSION};
use crate::operator_models::{FernModel, OperatorModel, ParamCount};
use crate::trainer::{train, TrainConfig};

pub const DEFAULT_BINS: usize = 10;

/// `‖pred − truth‖₂ / ‖truth‖₂`.
pub fn relative_l2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(FernError::domain(format!(
            "{} predictions for {} reference values",
            pred.len(),
            truth.len()
        )));
    }
    let norm = truth.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(FernError::domain("relative error is undefined for a zero reference"));
    }
    let diff = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>().sqrt();
    Ok(diff / norm)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub model_kind: String,
    pub errors: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over test samples.
    pub std: f64,
    pub std_kind: String,
    pub param_count: ParamCount,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl EvalReport {
    pub fn from_errors(errors: Vec<f64>, model: &OperatorModel) -> Self {
        let (mean, std) = mean_std(&errors);
        Self {
            schema_version: SCHEMA_VERSION,
            model_kind: model.kind().to_string(),
            errors,
            mean,
            std,
            std_kind: "population".into(),
            param_count: model.param_count(),
            config: BTreeMap::new(),
            provenance: None,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        json::write_file(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        json::read_file(path)
    }
}

/// Per-sample predictions of `model` on the dataset's own output grids.
pub fn predict_dataset(model: &OperatorModel, ds: &OperatorDataset) -> Result<Vec<Vec<f64>>> {
    let indices: Vec<usize> = (0..ds.len()).collect();
    let inputs = ds.input_matrix(&indices);
    let groups = ds.grid_groups();
    let fwd = model.forward(inputs.view(), &groups)?;
    let mut out = vec![Vec::new(); ds.len()];
    for g in 0..fwd.n_groups() {
        let pred = fwd.predictions(g);
        for (r, &i) in fwd.rows(g).iter().enumerate() {
            out[i] = pred.row(r).to_vec();
        }
    }
    Ok(out)
}

pub fn evaluate(model: &OperatorModel, ds: &OperatorDataset) -> Result<EvalReport> {
    let preds = predict_dataset(model, ds)?;
    let errors = preds
        .iter()
        .zip(&ds.samples)
        .map(|(p, s)| relative_l2(p, &s.v_out))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_errors(errors, model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Mean support of the bases centered in the bin; absent when empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_support: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDiagnostics {
    pub bins: Vec<BinStat>,
    /// Centers outside the domain.
    pub overflow: usize,
    pub centers: Vec<f64>,
    pub supports: Vec<f64>,
}

impl BasisDiagnostics {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum::<usize>() + self.overflow
    }

    /// `bin_lo,bin_hi,count,mean_support` (empty field for empty bins).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["bin_lo", "bin_hi", "count", "mean_support"])?;
        for b in &self.bins {
            w.write_record([
                format!("{:.16e}", b.lo),
                format!("{:.16e}", b.hi),
                b.count.to_string(),
                b.mean_support.map(|m| format!("{m:.16e}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of centers over `n_bins` equal bins of `domain`; the right
/// edge of the domain belongs to the last bin.
pub fn basis_diagnostics(hat: &HatParams, domain: [f64; 2], n_bins: usize) -> Result<BasisDiagnostics> {
    if n_bins == 0 {
        return Err(FernError::domain("at least one bin is required"));
    }
    let [lo, hi] = domain;
    if !(hi > lo) {
        return Err(FernError::domain("domain must have positive length"));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    let mut sums = vec![0.0; n_bins];
    let mut overflow = 0;
    for (&c, &h) in hat.centers.iter().zip(&hat.supports) {
        if !(lo..=hi).contains(&c) {
            overflow += 1;
            continue;
        }
        let b = (((c - lo) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
        sums[b] += h;
    }
    let bins = (0..n_bins)
        .map(|b| BinStat {
            lo: lo + b as f64 * width,
            hi: if b + 1 == n_bins { hi } else { lo + (b + 1) as f64 * width },
            count: counts[b],
            mean_support: (counts[b] > 0).then(|| sums[b] / counts[b] as f64),
        })
        .collect();
    Ok(BasisDiagnostics {
        bins,
        overflow,
        centers: hat.centers.clone(),
        supports: hat.supports.clone(),
    })
}

/// Least-squares slope of `log(err)` against `log(n)`.
pub fn loglog_slope(ns: &[usize], errs: &[f64]) -> Result<f64> {
    if ns.len() != errs.len() || ns.len() < 2 {
        return Err(FernError::domain("a slope needs at least two (N, error) pairs"));
    }
    if errs.iter().any(|e| !(*e > 0.0)) {
        return Err(FernError::domain("errors must be positive for a log-log fit"));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, _) = mean_std(&xs);
    let (my, _) = mean_std(&ys);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(FernError::domain("basis counts must not all be equal"));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean_err: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub slope: f64,
}

impl Sweep {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["N", "mean_err", "std_err"])?;
        for r in &self.rows {
            w.write_record([r.n.to_string(), format!("{:.16e}", r.mean_err), format!("{:.16e}", r.std_err)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trains one hat-basis model per `N` with the same seed and config and
/// reports test error against `N`.
pub fn sweep_basis_count(
    train_ds: &OperatorDataset,
    test_ds: &OperatorDataset,
    ns: &[usize],
    branch: &NetShape,
    config: &TrainConfig,
) -> Result<Sweep> {
    if ns.len() < 2 || ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] < 2 {
        return Err(FernError::domain("basis counts must be ascending, at least two, each ≥ 2"));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let model = FernModel::init(branch, n, train_ds.domain, config.hat_init.h0, config.seed)?;
        let (trained, history) = train(model.into(), train_ds, config)?;
        let report = evaluate(&trained, test_ds)?;
        log::info!(
            "sweep N = {n}: final loss {:.3e}, test error {:.4} ± {:.4}",
            history.final_loss().unwrap_or(f64::NAN),
            report.mean,
            report.std
        );
        rows.push(SweepRow { n, mean_err: report.mean, std_err: report.std });
    }
    let errs: Vec<f64> = rows.iter().map(|r| r.mean_err).collect();
    let slope = loglog_slope(ns, &errs)?;
    Ok(Sweep { rows, slope })
}
