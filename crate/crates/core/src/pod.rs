//! Proper orthogonal decomposition of output snapshots.

use ndarray::{Array1, Array2, Axis};

use crate::data::{same_grid, OperatorDataset};
use crate::error::{FernError, Result};

/// Output snapshots as columns: `values` is `M × S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub values: Array2<f64>,
    pub grid: Vec<f64>,
}

impl SnapshotMatrix {
    pub fn new(values: Array2<f64>, grid: Vec<f64>) -> Result<Self> {
        if values.nrows() != grid.len() {
            return Err(FernError::domain(format!(
                "{} snapshot rows for a {}-point grid",
                values.nrows(),
                grid.len()
            )));
        }
        Ok(Self { values, grid })
    }

    /// Requires every sample to share one output grid.
    pub fn from_dataset(ds: &OperatorDataset) -> Result<Self> {
        let first = ds
            .samples
            .first()
            .ok_or_else(|| FernError::domain("no samples to build snapshots from"))?;
        let grid = first.x_out.clone();
        let mut values = Array2::zeros((grid.len(), ds.len()));
        for (j, s) in ds.samples.iter().enumerate() {
            if !same_grid(&s.x_out, &grid) {
                return Err(FernError::grid(format!(
                    "sample {j} uses a different output grid; POD needs every training output on one mesh (same-mesh requirement)"
                )));
            }
            values.column_mut(j).assign(&Array1::from(s.v_out.clone()));
        }
        Ok(Self { values, grid })
    }

    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.values.ncols()
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and eigenvectors as columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(FernError::domain("eigen-decomposition needs a square matrix"));
    }
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum();
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    Ok((values, v.select(Axis(1), &order)))
}

/// Top-`n` left singular vectors of the snapshot matrix (no centering).
pub fn compute_pod(snaps: &SnapshotMatrix, n: usize) -> Result<Array2<f64>> {
    let (m, s) = snaps.values.dim();
    if n == 0 || n > m.min(s) {
        return Err(FernError::domain(format!(
            "N = {n} POD modes requested but the rank bound is min(M, S) = {}",
            m.min(s)
        )));
    }
    let v = &snaps.values;
    let mut modes = Array2::<f64>::zeros((m, n));
    let mut filled = vec![false; n];
    if m <= s {
        let (_, vecs) = symmetric_eigen(&v.dot(&v.t()))?;
        modes.assign(&vecs.slice(ndarray::s![.., ..n]));
        filled.fill(true);
    } else {
        let (vals, w) = symmetric_eigen(&v.t().dot(v))?;
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        for k in 0..n {
            let lambda = vals[k];
            if lambda > top * 1e-24 && lambda > 0.0 {
                let u = v.dot(&w.column(k)) / lambda.sqrt();
                modes.column_mut(k).assign(&u);
                filled[k] = true;
            }
        }
    }
    orthonormalize(&mut modes, &filled);
    for mut col in modes.columns_mut() {
        let lead = col
            .iter()
            .copied()
            .reduce(|best, x| if x.abs() > best.abs() { x } else { best })
            .unwrap_or(0.0);
        if lead < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
    Ok(modes)
}

/// Modified Gram–Schmidt; unfilled or degenerate columns are replaced by
/// the first standard basis vectors that remain independent.
fn orthonormalize(modes: &mut Array2<f64>, filled: &[bool]) {
    let (m, n) = modes.dim();
    let mut next_unit = 0;
    for k in 0..n {
        let mut accepted = false;
        let mut candidate = if filled[k] { Some(modes.column(k).to_owned()) } else { None };
        while !accepted {
            let mut c = match candidate.take() {
                Some(c) => c,
                None => {
                    let mut e = Array1::zeros(m);
                    e[next_unit] = 1.0;
                    next_unit += 1;
                    e
                }
            };
            let before = c.dot(&c).sqrt();
            for _pass in 0..2 {
                for j in 0..k {
                    let q = modes.column(j);
                    let proj = q.dot(&c);
                    c.scaled_add(-proj, &q);
                }
            }
            let norm = c.dot(&c).sqrt();
            if norm > 1e-8 * before.max(f64::MIN_POSITIVE) {
                modes.column_mut(k).assign(&(c / norm));
                accepted = true;
            }
        }
    }
}

/// `‖V − Φ Φᵀ V‖_F / ‖V‖_F`.
pub fn pod_reconstruction_error(snaps: &SnapshotMatrix, modes: &Array2<f64>) -> Result<f64> {
    if modes.nrows() != snaps.n_points() {
        return Err(FernError::domain("modes and snapshots disagree on the grid size"));
    }
    let v = &snaps.values;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let residual = v - &modes.dot(&modes.t().dot(v));
    Ok(residual.iter().map(|x| x * x).sum::<f64>().sqrt() / norm)
}
