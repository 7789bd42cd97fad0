//! Periodic pseudo-spectral stepping for `u_t = L u + N(u)`: KdV, viscous
//! Burgers, and Keller–Segel on the even extension of its no-flux interval.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub struct FourierScheme {
    n: usize,
    model: Dispersion,
    /// `1 / (1 + k²)`
    screen: Vec<f64>,
    aux: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `i·k` with the Nyquist mode and the top third removed.
    ik: Vec<Complex<f64>>,
    symbol: Vec<Complex<f64>>,
    hat: Vec<Complex<f64>>,
    cached_dt: f64,
    half: Vec<Complex<f64>>,
    full: Vec<Complex<f64>>,
    buf: Vec<Complex<f64>>,
}

#[derive(Clone, Copy)]
pub enum Dispersion {
    /// `L = ε ∂³ₓ`
    Kdv { eps: f64 },
    /// `L = ν ∂²ₓ`
    Burgers { nu: f64 },
    /// `L = D ∂²ₓ`, `N(u) = −χ (u v_x)_x` with `−v_xx + v = u`.
    Chemotaxis { d: f64, chi: f64 },
}

impl FourierScheme {
    pub fn new(model: Dispersion, n: usize, length: f64, u0: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let wave = |j: usize| {
            let s = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            (s, 2.0 * PI * s / length)
        };
        let ik = (0..n)
            .map(|j| {
                let (s, k) = wave(j);
                if 3.0 * s.abs() < n as f64 { Complex::new(0.0, k) } else { Complex::default() }
            })
            .collect();
        let symbol = (0..n)
            .map(|j| {
                let (_, k) = wave(j);
                match model {
                    Dispersion::Kdv { eps } => Complex::new(0.0, -eps * k * k * k),
                    Dispersion::Burgers { nu } => Complex::new(-nu * k * k, 0.0),
                    Dispersion::Chemotaxis { d, .. } => Complex::new(-d * k * k, 0.0),
                }
            })
            .collect();
        let screen = (0..n)
            .map(|j| {
                let (_, k) = wave(j);
                1.0 / (1.0 + k * k)
            })
            .collect();
        let mut hat: Vec<Complex<f64>> = u0.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fwd.process(&mut hat);
        Self {
            n,
            model,
            screen,
            aux: vec![Complex::default(); n],
            fwd,
            inv,
            ik,
            symbol,
            hat,
            cached_dt: f64::NAN,
            half: vec![],
            full: vec![],
            buf: vec![Complex::default(); n],
        }
    }

    /// Nonlinear term in spectral space, dealiased.
    fn nonlinear(&mut self, v: &[Complex<f64>], out: &mut [Complex<f64>]) {
        self.buf.copy_from_slice(v);
        self.inv.process(&mut self.buf);
        let scale = 1.0 / self.n as f64;
        let coef = match self.model {
            Dispersion::Chemotaxis { chi, .. } => {
                // Chemical gradient v_x on the grid.
                for ((a, c), (ik, s)) in self.aux.iter_mut().zip(v).zip(self.ik.iter().zip(&self.screen)) {
                    *a = ik * c * *s;
                }
                self.inv.process(&mut self.aux);
                for (b, a) in self.buf.iter_mut().zip(&self.aux) {
                    *b = Complex::new(b.re * scale * a.re * scale, 0.0);
                }
                chi
            }
            _ => {
                for b in self.buf.iter_mut() {
                    let u = b.re * scale;
                    *b = Complex::new(0.5 * u * u, 0.0);
                }
                1.0
            }
        };
        self.fwd.process(&mut self.buf);
        for ((o, b), ik) in out.iter_mut().zip(&self.buf).zip(&self.ik) {
            *o = -coef * ik * b;
        }
    }

    /// One integrating-factor RK4 step.
    pub fn step(&mut self, dt: f64) {
        if dt != self.cached_dt {
            self.half = self.symbol.iter().map(|s| (s * (0.5 * dt)).exp()).collect();
            self.full = self.symbol.iter().map(|s| (s * dt).exp()).collect();
            self.cached_dt = dt;
        }
        let n = self.n;
        let u = self.hat.clone();
        let mut a = vec![Complex::default(); n];
        let mut b = vec![Complex::default(); n];
        let mut c = vec![Complex::default(); n];
        let mut d = vec![Complex::default(); n];
        let mut stage = vec![Complex::default(); n];
        self.nonlinear(&u, &mut a);
        for j in 0..n {
            stage[j] = self.half[j] * (u[j] + 0.5 * dt * a[j]);
        }
        self.nonlinear(&stage, &mut b);
        for j in 0..n {
            stage[j] = self.half[j] * u[j] + 0.5 * dt * b[j];
        }
        self.nonlinear(&stage, &mut c);
        for j in 0..n {
            stage[j] = self.full[j] * u[j] + dt * self.half[j] * c[j];
        }
        self.nonlinear(&stage, &mut d);
        for j in 0..n {
            self.hat[j] = self.full[j] * u[j]
                + dt / 6.0 * (self.full[j] * a[j] + 2.0 * self.half[j] * (b[j] + c[j]) + d[j]);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hat.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn values(&self) -> Vec<f64> {
        let mut buf = self.hat.clone();
        self.inv.process(&mut buf);
        buf.iter().map(|c| c.re / self.n as f64).collect()
    }
}
