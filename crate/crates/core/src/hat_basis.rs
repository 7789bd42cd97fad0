//! Finite-element hat functions assembled from ReLUs.
//!
//! A hat `p_{a,h}` rises with slope 1 on `(a-h, a]`, falls with slope -1 on
//! `(a, a+h)` and vanishes elsewhere; its peak value is `h`. The ReLU form
//! `σ(x-(a-h)) - 2σ(x-a) + σ(x-(a+h))` is exact, so a basis of `N` hats costs
//! exactly `2N` trainable numbers.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{FernError, Result};

/// Lower bound kept on every support after each optimizer step.
pub const DEFAULT_H_MIN: f64 = 1e-4;

#[inline]
pub fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

/// Subgradient of the ReLU with the `σ'(0) = 0` convention.
#[inline]
pub fn relu_grad(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn check_support(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(FernError::domain(format!("hat support must be positive, got {h}")))
    }
}

/// Reference piecewise definition of the hat function, written relative to
/// the center so `p(a) = h` holds exactly.
pub fn hat_eval_piecewise(a: f64, h: f64, x: f64) -> Result<f64> {
    check_support(h)?;
    let t = x - a;
    Ok(if -h < t && t <= 0.0 {
        h + t
    } else if 0.0 < t && t < h {
        h - t
    } else {
        0.0
    })
}

/// Hat function via its three-ReLU assembly, evaluated in the local
/// coordinate `t = x - a` so the peak is exactly `h`.
///
/// Outside `(a-h, a+h)` the three terms cancel in exact arithmetic but not
/// always in floating point, so the support is applied explicitly there.
#[inline]
pub fn hat_value(a: f64, h: f64, x: f64) -> f64 {
    let t = x - a;
    if t <= -h || t >= h {
        return 0.0;
    }
    relu(t + h) - 2.0 * relu(t) + relu(t - h)
}

pub fn hat_eval_relu(a: f64, h: f64, x: f64) -> Result<f64> {
    check_support(h)?;
    Ok(hat_value(a, h, x))
}

/// Partial derivatives of the ReLU-assembled hat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatGrad {
    pub d_da: f64,
    pub d_dh: f64,
    pub d_dx: f64,
}

#[inline]
pub fn hat_partials(a: f64, h: f64, x: f64) -> HatGrad {
    let t = x - a;
    let left = relu_grad(t + h);
    let mid = relu_grad(t);
    let right = relu_grad(t - h);
    HatGrad {
        d_da: -left + 2.0 * mid - right,
        d_dh: left - right,
        d_dx: left - 2.0 * mid + right,
    }
}

pub fn hat_grad(a: f64, h: f64, x: f64) -> Result<HatGrad> {
    check_support(h)?;
    Ok(hat_partials(a, h, x))
}

/// Continuous piecewise-linear function with `f(0) = 0`, slope `slopes[0]`
/// left of `interior_nodes[0]` and slope `slopes[j]` between nodes `j-1`
/// and `j`: `k_1 σ(x) + Σ_j (k_{j+1} - k_j) σ(x - x_j)`.
pub fn pwl_from_slopes(slopes: &[f64], interior_nodes: &[f64], x: f64) -> Result<f64> {
    if slopes.is_empty() {
        return Err(FernError::domain("at least one slope is required"));
    }
    if interior_nodes.len() + 1 != slopes.len() {
        return Err(FernError::domain(format!(
            "{} slopes need {} interior nodes, got {}",
            slopes.len(),
            slopes.len() - 1,
            interior_nodes.len()
        )));
    }
    if interior_nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(FernError::domain("interior nodes must be strictly increasing"));
    }
    let mut value = slopes[0] * relu(x);
    for (j, &node) in interior_nodes.iter().enumerate() {
        value += (slopes[j + 1] - slopes[j]) * relu(x - node);
    }
    Ok(value)
}

/// Learnable hat basis: one center and one support per basis function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatParams {
    pub centers: Vec<f64>,
    pub supports: Vec<f64>,
}

impl HatParams {
    pub fn new(centers: Vec<f64>, supports: Vec<f64>) -> Result<Self> {
        let params = Self { centers, supports };
        params.validate()?;
        Ok(params)
    }

    /// `n` hats with centers at the midpoints of `n` equal cells of
    /// `[lo, hi]`, all with support `h0`.
    pub fn uniform(n: usize, lo: f64, hi: f64, h0: f64) -> Result<Self> {
        if n == 0 {
            return Err(FernError::domain("a hat basis needs at least one function"));
        }
        if !(hi > lo) {
            return Err(FernError::domain(format!("empty domain [{lo}, {hi}]")));
        }
        let width = (hi - lo) / n as f64;
        let centers = (0..n).map(|k| lo + (k as f64 + 0.5) * width).collect();
        Self::new(centers, vec![h0; n])
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(FernError::domain("a hat basis needs at least one function"));
        }
        if self.centers.len() != self.supports.len() {
            return Err(FernError::domain(format!(
                "{} centers but {} supports",
                self.centers.len(),
                self.supports.len()
            )));
        }
        if let Some(h) = self.supports.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(FernError::domain(format!("hat support must be positive, got {h}")));
        }
        if let Some(a) = self.centers.iter().find(|a| !a.is_finite()) {
            return Err(FernError::domain(format!("hat center must be finite, got {a}")));
        }
        Ok(())
    }

    /// Projects every support onto `[h_min, ∞)`.
    pub fn project_supports(&mut self, h_min: f64) {
        for h in &mut self.supports {
            if *h < h_min {
                *h = h_min;
            }
        }
    }

    pub fn min_support(&self) -> f64 {
        self.supports.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `Φ[m][k] = p_{a_k, h_k}(x_m)`.
pub fn basis_matrix(params: &HatParams, xs: &[f64]) -> Array2<f64> {
    let n = params.len();
    let mut phi = Array2::zeros((xs.len(), n));
    for (m, &x) in xs.iter().enumerate() {
        for k in 0..n {
            phi[[m, k]] = hat_value(params.centers[k], params.supports[k], x);
        }
    }
    phi
}

/// `(∂Φ/∂a, ∂Φ/∂h)`, each `M×N`; column `k` only depends on hat `k`.
pub fn basis_param_grads(params: &HatParams, xs: &[f64]) -> (Array2<f64>, Array2<f64>) {
    let n = params.len();
    let mut d_a = Array2::zeros((xs.len(), n));
    let mut d_h = Array2::zeros((xs.len(), n));
    for (m, &x) in xs.iter().enumerate() {
        for k in 0..n {
            let g = hat_partials(params.centers[k], params.supports[k], x);
            d_a[[m, k]] = g.d_da;
            d_h[[m, k]] = g.d_dh;
        }
    }
    (d_a, d_h)
}
