//! Time integration to the final time and the terminal solution.

use std::f64::consts::PI;

use fern_core::evalkit::relative_l2;
use fern_core::{FernError, Result};

use crate::cosine::{CosineScheme, PhaseField};
use crate::fourier::{Dispersion, FourierScheme};
use crate::fv::{self, Aggregation, DriftDiffusion};
use crate::ic::InitialCondition;
use crate::spec::{PdeKind, PdeSpec, SolverSettings};
use crate::spline::CubicSpline;

/// Where the discrete unknowns live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `cells + 1` nodes including both walls.
    Nodes,
    /// Cell centres.
    Cells,
    /// `cells` nodes, the right end identified with the left.
    Periodic,
}

const GHOSTS: usize = 3;
const CFL: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
    pub layout: Layout,
    pub domain: [f64; 2],
}

impl Solution {
    /// `∫ u dx` with the quadrature matching the layout.
    pub fn mass(&self) -> f64 {
        let n = self.u.len();
        match self.layout {
            Layout::Nodes => {
                let dx = (self.domain[1] - self.domain[0]) / (n - 1) as f64;
                dx * (self.u.iter().sum::<f64>() - 0.5 * (self.u[0] + self.u[n - 1]))
            }
            Layout::Cells | Layout::Periodic => {
                (self.domain[1] - self.domain[0]) / n as f64 * self.u.iter().sum::<f64>()
            }
        }
    }

    /// Cubic-spline values at `xs`, extended past the walls by reflection
    /// or periodic wrap.
    pub fn interpolate(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let n = self.u.len();
        let [lo, hi] = self.domain;
        let len = hi - lo;
        let (mut gx, mut gu) = (Vec::with_capacity(n + 2 * GHOSTS + 1), Vec::with_capacity(n + 2 * GHOSTS + 1));
        match self.layout {
            Layout::Nodes => {
                for k in (1..=GHOSTS).rev() {
                    gx.push(2.0 * lo - self.x[k]);
                    gu.push(self.u[k]);
                }
                gx.extend_from_slice(&self.x);
                gu.extend_from_slice(&self.u);
                for k in 1..=GHOSTS {
                    gx.push(2.0 * hi - self.x[n - 1 - k]);
                    gu.push(self.u[n - 1 - k]);
                }
            }
            Layout::Cells => {
                for k in (0..GHOSTS).rev() {
                    gx.push(2.0 * lo - self.x[k]);
                    gu.push(self.u[k]);
                }
                gx.extend_from_slice(&self.x);
                gu.extend_from_slice(&self.u);
                for k in 0..GHOSTS {
                    gx.push(2.0 * hi - self.x[n - 1 - k]);
                    gu.push(self.u[n - 1 - k]);
                }
            }
            Layout::Periodic => {
                for k in (1..=GHOSTS).rev() {
                    gx.push(self.x[n - k] - len);
                    gu.push(self.u[n - k]);
                }
                gx.extend_from_slice(&self.x);
                gu.extend_from_slice(&self.u);
                for k in 0..=GHOSTS {
                    gx.push(self.x[k] + len);
                    gu.push(self.u[k]);
                }
            }
        }
        let spline = CubicSpline::new(gx, gu)?;
        let tol = 1e-12 * len;
        xs.iter()
            .map(|&x| {
                if x < lo - tol || x > hi + tol || !x.is_finite() {
                    Err(FernError::domain(format!("output point {x} outside [{lo}, {hi}]")))
                } else {
                    Ok(spline.eval(x))
                }
            })
            .collect()
    }
}

fn density_check(u: &[f64]) -> Option<&'static str> {
    if u.iter().any(|v| !v.is_finite()) {
        Some("non-finite value")
    } else if u.iter().any(|v| *v < 0.0) {
        Some("positivity lost")
    } else {
        None
    }
}

enum Scheme {
    Cosine(CosineScheme),
    Fourier(FourierScheme),
    Fp(DriftDiffusion),
    Ad(Aggregation),
}

/// A solve in progress, advanced one fixed step at a time.
pub struct Solver {
    spec: PdeSpec,
    scheme: Scheme,
    x: Vec<f64>,
    layout: Layout,
    pub dt: f64,
    pub steps: usize,
    pub taken: usize,
}

impl Solver {
    pub fn new(spec: &PdeSpec, ic: &InitialCondition, settings: SolverSettings) -> Result<Self> {
        if ic.kind != spec.kind {
            return Err(FernError::domain("initial condition belongs to another equation"));
        }
        Self::with_profile(spec, |x| ic.eval(x), settings)
    }

    /// Starts from an arbitrary initial profile.
    pub fn with_profile(spec: &PdeSpec, u0: impl Fn(f64) -> f64, settings: SolverSettings) -> Result<Self> {
        spec.validate()?;
        if settings.cells < 8 || !(settings.dt > 0.0) {
            return Err(FernError::domain("solver needs at least 8 cells and a positive dt"));
        }
        let sample = |xs: &[f64]| -> Result<Vec<f64>> {
            let v: Vec<f64> = xs.iter().map(|&x| u0(x)).collect();
            if v.iter().all(|u| u.is_finite()) {
                Ok(v)
            } else {
                Err(FernError::domain("initial profile is not finite"))
            }
        };
        let n = settings.cells;
        let [lo, hi] = spec.domain;
        let len = hi - lo;
        let c = |name: &str| spec.constant(name);
        let (scheme, x, layout, max_dt) = match spec.kind {
            PdeKind::AllenCahn | PdeKind::CahnHilliard => {
                let x: Vec<f64> = (0..=n).map(|j| lo + len * j as f64 / n as f64).collect();
                let model = if spec.kind == PdeKind::AllenCahn {
                    PhaseField::AllenCahn { eps: c("epsilon") }
                } else {
                    PhaseField::CahnHilliard { mobility: c("mobility"), eps: c("epsilon"), stab: c("stabilization") }
                };
                let s = CosineScheme::new(model, n, len, sample(&x)?);
                (Scheme::Cosine(s), x, Layout::Nodes, f64::INFINITY)
            }
            PdeKind::Kdv | PdeKind::Burgers => {
                let x: Vec<f64> = (0..n).map(|j| lo + len * j as f64 / n as f64).collect();
                let model = if spec.kind == PdeKind::Kdv {
                    Dispersion::Kdv { eps: c("epsilon") }
                } else {
                    Dispersion::Burgers { nu: c("nu") }
                };
                let s = FourierScheme::new(model, n, len, &sample(&x)?);
                (Scheme::Fourier(s), x, Layout::Periodic, f64::INFINITY)
            }
            PdeKind::KellerSegel => {
                // Even extension to twice the interval, solved periodically.
                let x: Vec<f64> = (0..=n).map(|j| lo + len * j as f64 / n as f64).collect();
                let u0 = sample(&x)?;
                if u0.iter().any(|v| !(*v > 0.0)) {
                    return Err(FernError::domain("initial density must be positive"));
                }
                let ext: Vec<f64> = (0..2 * n).map(|j| u0[if j <= n { j } else { 2 * n - j }]).collect();
                let model = Dispersion::Chemotaxis { d: c("D"), chi: c("chi") };
                let s = FourierScheme::new(model, 2 * n, 2.0 * len, &ext);
                (Scheme::Fourier(s), x, Layout::Nodes, f64::INFINITY)
            }
            PdeKind::FokkerPlanck | PdeKind::AggregationDiffusion => {
                let x = fv::centers(spec.domain, n);
                let u0 = sample(&x)?;
                if u0.iter().any(|v| !(*v > 0.0)) {
                    return Err(FernError::domain("initial density must be positive"));
                }
                if spec.kind == PdeKind::FokkerPlanck {
                    let s = DriftDiffusion::new(spec.domain, u0, c("diffusion"), |x| (2.0 * PI * x).cos());
                    let limit = s.stable_dt(CFL);
                    (Scheme::Fp(s), x, Layout::Cells, limit)
                } else {
                    let s = Aggregation::new(spec.domain, u0, c("D"), c("m"), c("sigma"));
                    let limit = s.stable_dt(CFL);
                    (Scheme::Ad(s), x, Layout::Cells, limit)
                }
            }
        };
        let target = settings.dt.min(max_dt);
        let steps = if spec.t_final == 0.0 { 0 } else { (spec.t_final / target).ceil() as usize };
        let dt = if steps == 0 { 0.0 } else { spec.t_final / steps as f64 };
        Ok(Self { spec: spec.clone(), scheme, x, layout, dt, steps, taken: 0 })
    }

    pub fn time(&self) -> f64 {
        self.taken as f64 * self.dt
    }

    pub fn values(&self) -> Vec<f64> {
        match &self.scheme {
            Scheme::Cosine(s) => s.u.clone(),
            Scheme::Fourier(s) => {
                let mut u = s.values();
                u.truncate(self.x.len());
                u
            }
            Scheme::Fp(s) => s.u.clone(),
            Scheme::Ad(s) => s.u.clone(),
        }
    }

    /// Discrete free energy (phase-field equations only).
    pub fn energy(&mut self) -> Option<f64> {
        let len = self.spec.length();
        match &mut self.scheme {
            Scheme::Cosine(s) => Some(s.energy(len)),
            _ => None,
        }
    }

    /// Advances one step; fails on non-finite values or lost positivity.
    pub fn advance(&mut self) -> Result<()> {
        let dt = self.dt;
        let bad = match &mut self.scheme {
            Scheme::Cosine(s) => {
                s.step(dt);
                s.u.iter().any(|v| !v.is_finite()).then_some("non-finite value")
            }
            Scheme::Fourier(s) => {
                s.step(dt);
                if !s.is_finite() {
                    Some("non-finite value")
                } else if self.spec.kind == PdeKind::KellerSegel && s.values().iter().any(|v| *v < 0.0) {
                    Some("positivity lost")
                } else {
                    None
                }
            }
            Scheme::Fp(s) => {
                s.step(dt);
                density_check(&s.u)
            }
            Scheme::Ad(s) => {
                s.step(dt);
                density_check(&s.u)
            }
        };
        self.taken += 1;
        match bad {
            Some(what) => Err(FernError::Solver(format!("{}: {what} at t = {:.6e}", self.spec.kind, self.time()))),
            None => Ok(()),
        }
    }

    pub fn run(mut self) -> Result<Solution> {
        while self.taken < self.steps {
            self.advance()?;
        }
        Ok(self.solution())
    }

    pub fn solution(&self) -> Solution {
        Solution { x: self.x.clone(), u: self.values(), t: self.time(), layout: self.layout, domain: self.spec.domain }
    }
}

/// Solves from `ic` to `spec.t_final`.
pub fn solve(spec: &PdeSpec, ic: &InitialCondition, settings: SolverSettings) -> Result<Solution> {
    Solver::new(spec, ic, settings)?.run()
}

/// Relative L2 change of the terminal state when the grid is doubled and
/// the step halved, measured on the coarse points.
pub fn self_convergence(spec: &PdeSpec, ic: &InitialCondition, settings: SolverSettings) -> Result<f64> {
    let coarse = solve(spec, ic, settings)?;
    let fine = solve(spec, ic, settings.refined())?;
    relative_l2(&fine.interpolate(&coarse.x)?, &coarse.u)
}

/// `|∫u(T) − ∫u(0)| / ∫|u(0)|`
pub fn mass_drift(initial: &Solution, terminal: &Solution) -> f64 {
    let scale = Solution { u: initial.u.iter().map(|v| v.abs()).collect(), ..initial.clone() }.mass();
    (terminal.mass() - initial.mass()).abs() / scale
}
