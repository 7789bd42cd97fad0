//! Natural cubic spline interpolation.

use fern_core::{FernError, Result};

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the nodes.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(FernError::domain("spline needs at least 3 matching nodes"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FernError::domain("spline nodes must be strictly increasing"));
        }
        // Tridiagonal system for the interior second derivatives.
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        let mut m = vec![0.0; n];
        // Forward sweep over rows 1..n-1 with m[0] = m[n-1] = 0.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let lower = x[i] - x[i - 1];
            let denom = diag[i] - if i > 1 { lower * c[i - 1] } else { 0.0 };
            c[i] = upper[i] / denom;
            d[i] = (rhs[i] - if i > 1 { lower * d[i - 1] } else { 0.0 }) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { x, y, m })
    }

    /// Value at `t`; outside the node range the end cubic is extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}
