//! Cell-centred finite volumes with zero-flux walls: Fokker–Planck and
//! aggregation–diffusion.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// `z / (eᶻ − 1)`
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 { 1.0 - 0.5 * z } else { z / z.exp_m1() }
}

/// Solves a tridiagonal system in place (`lower[0]`, `upper[n−1]` unused).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / beta;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

pub fn centers(domain: [f64; 2], cells: usize) -> Vec<f64> {
    let dx = (domain[1] - domain[0]) / cells as f64;
    (0..cells).map(|i| domain[0] + (i as f64 + 0.5) * dx).collect()
}

/// Linear drift–diffusion `u_t = (d u_x + u V_x)_x` with Scharfetter–Gummel
/// fluxes and SSP-RK2 steps. Discrete equilibria are exactly `e^{−V/d}`.
pub struct DriftDiffusion {
    pub dx: f64,
    pub u: Vec<f64>,
    d: f64,
    /// Péclet number `−(V_{f+1} − V_f)/d` of each interior face.
    peclet: Vec<f64>,
    flux: Vec<f64>,
}

impl DriftDiffusion {
    pub fn new(domain: [f64; 2], u0: Vec<f64>, d: f64, potential: impl Fn(f64) -> f64) -> Self {
        let n = u0.len();
        let dx = (domain[1] - domain[0]) / n as f64;
        let v: Vec<f64> = centers(domain, n).into_iter().map(potential).collect();
        let peclet = v.windows(2).map(|w| -(w[1] - w[0]) / d).collect();
        Self { dx, u: u0, d, peclet, flux: vec![0.0; n + 1] }
    }

    pub fn stable_dt(&self, cfl: f64) -> f64 {
        let p = self.peclet.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        cfl * self.dx * self.dx / (self.d * (2.0 + 2.0 * p))
    }

    fn rhs(&mut self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let c = self.d / self.dx;
        for f in 0..n - 1 {
            let p = self.peclet[f];
            self.flux[f + 1] = c * (bernoulli(-p) * u[f] - bernoulli(p) * u[f + 1]);
        }
        for i in 0..n {
            out[i] = -(self.flux[i + 1] - self.flux[i]) / self.dx;
        }
    }

    pub fn step(&mut self, dt: f64) {
        let n = self.u.len();
        let u0 = self.u.clone();
        let mut k = vec![0.0; n];
        self.rhs(&u0, &mut k);
        let u1: Vec<f64> = u0.iter().zip(&k).map(|(u, k)| u + dt * k).collect();
        self.rhs(&u1, &mut k);
        for i in 0..n {
            self.u[i] = 0.5 * u0[i] + 0.5 * (u1[i] + dt * k[i]);
        }
    }
}

/// `Σ_j K(i − j) u_j` by zero-padded FFT.
struct ToeplitzConv {
    n: usize,
    kernel: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
}

impl ToeplitzConv {
    /// `k(d)` is the weight for index offset `d = i − j`.
    fn new(n: usize, k: impl Fn(isize) -> f64) -> Self {
        let p = 2 * n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(p);
        let inv = planner.plan_fft_inverse(p);
        let mut kernel: Vec<Complex<f64>> = (0..p)
            .map(|j| {
                let d = if j < n { j as isize } else { j as isize - p as isize };
                Complex::new(if j == n { 0.0 } else { k(d) }, 0.0)
            })
            .collect();
        fwd.process(&mut kernel);
        Self { n, kernel, fwd, inv, buf: vec![Complex::default(); p] }
    }

    fn apply(&mut self, u: &[f64], out: &mut [f64]) {
        for (j, b) in self.buf.iter_mut().enumerate() {
            *b = Complex::new(if j < self.n { u[j] } else { 0.0 }, 0.0);
        }
        self.fwd.process(&mut self.buf);
        for (b, k) in self.buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.inv.process(&mut self.buf);
        let scale = 1.0 / (2 * self.n) as f64;
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * scale;
        }
    }
}

/// `u_t = (u ξ_x)_x` with `ξ = D u^{m−1} + W ∗ u` and the Gaussian
/// attraction `W = −e^{−x²/2σ²}/(√(2π)σ)`.
///
/// Each step freezes the face mobility (upwinded by the interaction drift)
/// and the interaction potential, and solves the diffusion implicitly.
/// A face with positive mobility carries zero flux exactly when ξ is
/// constant across it.
pub struct Aggregation {
    pub dx: f64,
    pub u: Vec<f64>,
    d: f64,
    m: f64,
    conv: ToeplitzConv,
    w_prime_max: f64,
    potential: Vec<f64>,
}

impl Aggregation {
    pub fn new(domain: [f64; 2], u0: Vec<f64>, d: f64, m: f64, sigma: f64) -> Self {
        let n = u0.len();
        let dx = (domain[1] - domain[0]) / n as f64;
        let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
        let conv = ToeplitzConv::new(n, |k| {
            let x = k as f64 * dx;
            -norm * (-x * x / (2.0 * sigma * sigma)).exp() * dx
        });
        let w_prime_max = norm * (-0.5_f64).exp() / sigma;
        Self { dx, u: u0, d, m, conv, w_prime_max, potential: vec![0.0; n] }
    }

    /// Step bound from the drift speed, which never exceeds `mass · max|W′|`.
    pub fn stable_dt(&self, cfl: f64) -> f64 {
        let mass = self.u.iter().sum::<f64>() * self.dx;
        cfl * self.dx / (mass * self.w_prime_max).max(1e-300)
    }

    pub fn step(&mut self, dt: f64) {
        let n = self.u.len();
        let dx = self.dx;
        let u = self.u.clone();
        self.conv.apply(&u, &mut self.potential);
        let mut rhs = u.clone();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let r = dt / (dx * dx);
        for f in 0..n - 1 {
            let a = -(self.potential[f + 1] - self.potential[f]) / dx;
            let mob = if a > 0.0 { u[f] } else { u[f + 1] };
            let drift = dt / dx * mob * a;
            rhs[f] -= drift;
            rhs[f + 1] += drift;
            // D (u^{m−1})_x linearised about the current state.
            let slope = if self.m == 2.0 {
                self.d
            } else {
                let mid = 0.5 * (u[f] + u[f + 1]);
                self.d * (self.m - 1.0) * mid.max(0.0).powf(self.m - 2.0)
            };
            let c = r * mob * slope;
            diag[f] += c;
            diag[f + 1] += c;
            upper[f] = -c;
            lower[f + 1] = -c;
        }
        thomas(&lower, &diag, &upper, &mut rhs);
        self.u = rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_a_small_system() {
        let lower = [0.0, 1.0, 2.0];
        let diag = [4.0, 5.0, 6.0];
        let upper = [1.0, 1.0, 0.0];
        let x = [1.0, -2.0, 0.5];
        let mut rhs = [4.0 * 1.0 - 2.0, 1.0 - 10.0 + 0.5, -4.0 + 3.0];
        thomas(&lower, &diag, &upper, &mut rhs);
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fft_convolution_matches_the_direct_sum() {
        let n = 37;
        let k = |d: isize| (-(d as f64 / 5.0).powi(2)).exp() + 0.01 * d as f64;
        let mut conv = ToeplitzConv::new(n, k);
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() + 1.2).collect();
        let mut out = vec![0.0; n];
        conv.apply(&u, &mut out);
        for i in 0..n {
            let direct: f64 = (0..n).map(|j| k(i as isize - j as isize) * u[j]).sum();
            assert!((out[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_profile_is_a_discrete_equilibrium() {
        let v = |x: f64| (2.0 * PI * x).cos();
        let u0: Vec<f64> = centers([0.0, 1.0], 64).iter().map(|&x| (-v(x)).exp()).collect();
        let mut s = DriftDiffusion::new([0.0, 1.0], u0.clone(), 1.0, v);
        let dt = s.stable_dt(0.4);
        for _ in 0..100 {
            s.step(dt);
        }
        for (a, b) in s.u.iter().zip(&u0) {
            assert!((a - b).abs() < 1e-12 * b);
        }
    }
}
