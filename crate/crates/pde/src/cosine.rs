//! Neumann problems on nodes via the even (cosine) extension: Allen–Cahn
//! and Cahn–Hilliard.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Cosine transform on `cells + 1` equispaced nodes, through a complex FFT
/// of the length-`2·cells` even extension.
#[derive(Clone)]
pub struct CosineTransform {
    cells: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Squared wavenumber of each extended mode.
    pub q2: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl CosineTransform {
    pub fn new(cells: usize, length: f64) -> Self {
        let m = 2 * cells;
        let mut planner = FftPlanner::new();
        let q2 = (0..m)
            .map(|k| {
                let q = PI * k.min(m - k) as f64 / length;
                q * q
            })
            .collect();
        Self {
            cells,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            q2,
            buf: vec![Complex::default(); m],
        }
    }

    pub fn forward(&mut self, u: &[f64], out: &mut [Complex<f64>]) {
        let n = self.cells;
        for j in 0..=n {
            out[j] = Complex::new(u[j], 0.0);
        }
        for j in 1..n {
            out[2 * n - j] = Complex::new(u[j], 0.0);
        }
        self.fwd.process(out);
    }

    pub fn inverse(&mut self, coeffs: &[Complex<f64>], u: &mut [f64]) {
        let n = self.cells;
        self.buf.copy_from_slice(coeffs);
        self.inv.process(&mut self.buf);
        let scale = 1.0 / (2 * n) as f64;
        for j in 0..=n {
            u[j] = self.buf[j].re * scale;
        }
    }

    pub fn modes(&self) -> usize {
        2 * self.cells
    }
}

#[derive(Clone, Copy)]
pub enum PhaseField {
    AllenCahn { eps: f64 },
    CahnHilliard { mobility: f64, eps: f64, stab: f64 },
}

/// Semi-implicit first-order stepping: linear stiff part implicit, the
/// double-well derivative explicit.
pub struct CosineScheme {
    model: PhaseField,
    tr: CosineTransform,
    pub u: Vec<f64>,
    hat: Vec<Complex<f64>>,
    work: Vec<Complex<f64>>,
    tmp: Vec<f64>,
}

fn dwell(u: f64) -> f64 {
    u * u * u - u
}

impl CosineScheme {
    pub fn new(model: PhaseField, cells: usize, length: f64, u0: Vec<f64>) -> Self {
        let mut tr = CosineTransform::new(cells, length);
        let mut hat = vec![Complex::default(); tr.modes()];
        tr.forward(&u0, &mut hat);
        let m = tr.modes();
        Self { model, tr, u: u0, hat, work: vec![Complex::default(); m], tmp: vec![0.0; cells + 1] }
    }

    pub fn step(&mut self, dt: f64) {
        match self.model {
            PhaseField::AllenCahn { eps } => {
                for (t, &u) in self.tmp.iter_mut().zip(&self.u) {
                    *t = u - dt * dwell(u);
                }
                self.tr.forward(&self.tmp, &mut self.hat);
                for (h, q2) in self.hat.iter_mut().zip(&self.tr.q2) {
                    *h /= 1.0 + dt * eps * eps * q2;
                }
            }
            PhaseField::CahnHilliard { mobility, eps, stab } => {
                for (t, &u) in self.tmp.iter_mut().zip(&self.u) {
                    *t = dwell(u);
                }
                self.tr.forward(&self.tmp, &mut self.work);
                for ((h, f), &q2) in self.hat.iter_mut().zip(&self.work).zip(&self.tr.q2) {
                    let a = dt * mobility * q2;
                    *h = ((1.0 + a * stab) * *h - a * f) / (1.0 + a * stab + a * eps * eps * q2);
                }
            }
        }
        self.tr.inverse(&self.hat, &mut self.u);
    }

    /// Discrete free energy `∫ ε²/2 u_x² + (u²−1)²/4 dx`, with the gradient
    /// term taken spectrally and the potential by the trapezoid rule.
    pub fn energy(&mut self, length: f64) -> f64 {
        let eps = match self.model {
            PhaseField::AllenCahn { eps } | PhaseField::CahnHilliard { eps, .. } => eps,
        };
        let cells = self.u.len() - 1;
        let dx = length / cells as f64;
        let u = self.u.clone();
        self.tr.forward(&u, &mut self.work);
        let m = self.tr.modes() as f64;
        let grad: f64 = self.work.iter().zip(&self.tr.q2).map(|(c, q2)| q2 * c.norm_sqr()).sum::<f64>() / (2.0 * m);
        let pot: f64 = u
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let w = if j == 0 || j == cells { 0.5 } else { 1.0 };
                w * 0.25 * (v * v - 1.0).powi(2)
            })
            .sum();
        dx * (0.5 * eps * eps * grad + pot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_round_trips_and_differentiates() {
        let n = 32;
        let mut tr = CosineTransform::new(n, 1.0);
        let u: Vec<f64> = (0..=n).map(|j| (3.0 * PI * j as f64 / n as f64).cos()).collect();
        let mut hat = vec![Complex::default(); 2 * n];
        tr.forward(&u, &mut hat);
        let mut back = vec![0.0; n + 1];
        tr.inverse(&hat, &mut back);
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
        for (h, q2) in hat.iter_mut().zip(&tr.q2) {
            *h *= -q2;
        }
        tr.inverse(&hat, &mut back);
        for (a, b) in u.iter().zip(&back) {
            assert!((-9.0 * PI * PI * a - b).abs() < 1e-9);
        }
    }
}
