//! One-dimensional PDE solvers and the operator-learning datasets built
//! from them.
//!
//! Seven equations are covered: Allen–Cahn, Cahn–Hilliard, Fokker–Planck,
//! aggregation–diffusion, Keller–Segel, KdV and viscous Burgers.

pub mod cosine;
pub mod dataset;
pub mod fourier;
pub mod fv;
pub mod ic;
pub mod solver;
pub mod spec;
pub mod spline;

pub use dataset::{generate_dataset, linspace, GenRequest, MeshPolicy};
pub use ic::{sample_ic, InitialCondition};
pub use solver::{mass_drift, self_convergence, solve, Layout, Solution, Solver};
pub use spec::{PdeKind, PdeSpec, SolverSettings};
