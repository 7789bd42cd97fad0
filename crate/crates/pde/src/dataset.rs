//! Operator-learning datasets built from PDE solves.

use std::fmt;
use std::str::FromStr;

use fern_core::data::{OperatorDataset, OperatorSample, SolverMeta};
use fern_core::json::SCHEMA_VERSION;
use fern_core::seeding::stream_rng;
use fern_core::{FernError, Result};
use rayon::prelude::*;

use crate::ic::sample_ic;
use crate::solver::solve;
use crate::spec::{PdeKind, PdeSpec, SolverSettings};

/// How each sample's output grid is laid out.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshPolicy {
    /// `M` equispaced points over the whole domain, shared by every sample.
    Uniform(usize),
    /// Samples split into three consecutive blocks, each with `M`
    /// equispaced points over its own sub-interval.
    Thirds(usize),
    /// One explicit grid for every sample.
    Custom(Vec<f64>),
}

pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| if i + 1 == m { hi } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 }).collect()
}

impl MeshPolicy {
    /// Sub-intervals of the three blocks. Fokker–Planck uses the two halves
    /// and then the whole domain; other equations use the three thirds.
    pub fn blocks(kind: PdeKind, [lo, hi]: [f64; 2]) -> [[f64; 2]; 3] {
        let len = hi - lo;
        if kind == PdeKind::FokkerPlanck {
            let mid = lo + 0.5 * len;
            [[lo, mid], [mid, hi], [lo, hi]]
        } else {
            let (a, b) = (lo + len / 3.0, lo + 2.0 * len / 3.0);
            [[lo, a], [a, b], [b, hi]]
        }
    }

    /// Block of sample `i` out of `n`.
    pub fn block_of(i: usize, n: usize) -> usize {
        3 * i / n
    }

    pub fn grid(&self, kind: PdeKind, domain: [f64; 2], i: usize, n: usize) -> Vec<f64> {
        match self {
            MeshPolicy::Uniform(m) => linspace(domain[0], domain[1], *m),
            MeshPolicy::Thirds(m) => {
                let [a, b] = Self::blocks(kind, domain)[Self::block_of(i, n)];
                linspace(a, b, *m)
            }
            MeshPolicy::Custom(xs) => xs.clone(),
        }
    }

    pub fn validate(&self, domain: [f64; 2]) -> Result<()> {
        match self {
            MeshPolicy::Uniform(m) | MeshPolicy::Thirds(m) if *m < 2 => {
                Err(FernError::domain("output mesh needs at least 2 points"))
            }
            MeshPolicy::Custom(xs) => {
                if xs.is_empty() || xs.windows(2).any(|w| !(w[1] > w[0])) {
                    Err(FernError::domain("custom mesh must be non-empty and strictly increasing"))
                } else if xs[0] < domain[0] || xs[xs.len() - 1] > domain[1] {
                    Err(FernError::domain("custom mesh leaves the domain"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MeshPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshPolicy::Uniform(m) => write!(f, "uniform:{m}"),
            MeshPolicy::Thirds(m) => write!(f, "thirds:{m}"),
            MeshPolicy::Custom(xs) => write!(f, "custom:{}", xs.len()),
        }
    }
}

impl FromStr for MeshPolicy {
    type Err = FernError;

    /// `uniform:M`, `thirds:M` or `custom:x1,x2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || FernError::domain(format!("bad mesh policy `{s}` (uniform:M, thirds:M or custom:x1,x2,..)"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "uniform" => Ok(MeshPolicy::Uniform(arg.parse().map_err(|_| bad())?)),
            "thirds" => Ok(MeshPolicy::Thirds(arg.parse().map_err(|_| bad())?)),
            "custom" => {
                let xs: std::result::Result<Vec<f64>, _> = arg.split(',').map(|t| t.trim().parse()).collect();
                Ok(MeshPolicy::Custom(xs.map_err(|_| bad())?))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenRequest {
    pub n_samples: usize,
    pub dofs: usize,
    pub sensors: usize,
    pub mesh: MeshPolicy,
    pub seed: u64,
    pub settings: SolverSettings,
}

impl GenRequest {
    pub fn new(kind: PdeKind, n_samples: usize, mesh: MeshPolicy, seed: u64) -> Self {
        Self { n_samples, dofs: kind.default_dofs(), sensors: 22, mesh, seed, settings: kind.default_settings() }
    }
}

fn notes(spec: &PdeSpec) -> Vec<String> {
    let mut out = vec![];
    match spec.kind {
        PdeKind::CahnHilliard => {
            out.push("interface width epsilon is not given with the equation; default 0.01".into());
            out.push("chemical potential uses F'(u) = u^3 - u".into());
        }
        PdeKind::Kdv => {
            out.push("dispersion epsilon defaults to 0.01".into());
            out.push("free parameter is c1; c2, k1, k2, x1, x2 fixed (see constants)".into());
            out.push("initial profile summed over neighbouring periods".into());
        }
        PdeKind::AggregationDiffusion => out.push("bump offset x0 defaults to 2".into()),
        _ => {}
    }
    out
}

/// Samples `n_samples` initial conditions, solves each and records sensor
/// and output values. Sample `i` uses random stream `i` of `seed`, so the
/// result does not depend on the thread count.
pub fn generate_dataset(spec: &PdeSpec, req: &GenRequest) -> Result<OperatorDataset> {
    spec.validate()?;
    if req.n_samples == 0 {
        return Err(FernError::domain("n_samples must be at least 1"));
    }
    if req.sensors < 2 {
        return Err(FernError::domain("need at least 2 sensors"));
    }
    req.mesh.validate(spec.domain)?;
    let sensor_grid = linspace(spec.domain[0], spec.domain[1], req.sensors);
    let samples = (0..req.n_samples)
        .into_par_iter()
        .map(|i| {
            let tag = |e: FernError| match e {
                FernError::Solver(m) => FernError::Solver(format!("sample {i}: {m}")),
                FernError::Domain(m) => FernError::Domain(format!("sample {i}: {m}")),
                other => other,
            };
            let mut rng = stream_rng(req.seed, i as u64);
            let ic = sample_ic(spec, req.dofs, &mut rng).map_err(tag)?;
            let sol = solve(spec, &ic, req.settings).map_err(tag)?;
            let x_out = req.mesh.grid(spec.kind, spec.domain, i, req.n_samples);
            let v_out = sol.interpolate(&x_out).map_err(tag)?;
            log::debug!("{} sample {i} solved", spec.kind);
            Ok(OperatorSample { ic_params: ic.params.clone(), u_sensors: ic.sample_on(&sensor_grid), x_out, v_out })
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = OperatorDataset {
        schema_version: SCHEMA_VERSION,
        pde: spec.kind.name().into(),
        domain: spec.domain,
        t_final: spec.t_final,
        constants: spec.constants.clone(),
        dofs: req.dofs,
        seed: req.seed,
        mesh: req.mesh.to_string(),
        sensor_grid,
        solver_meta: SolverMeta { cells: req.settings.cells, dt: req.settings.dt, scheme: spec.kind.scheme().into() },
        notes: notes(spec),
        samples,
        provenance: None,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_policies_parse_and_print() {
        for s in ["uniform:64", "thirds:49"] {
            assert_eq!(s.parse::<MeshPolicy>().unwrap().to_string(), s);
        }
        assert_eq!("custom:0,0.5,1".parse::<MeshPolicy>().unwrap(), MeshPolicy::Custom(vec![0.0, 0.5, 1.0]));
        assert!("thirds".parse::<MeshPolicy>().is_err());
        assert!("grid:3".parse::<MeshPolicy>().is_err());
    }

    #[test]
    fn blocks_split_samples_evenly() {
        let blocks: Vec<usize> = (0..42).map(|i| MeshPolicy::block_of(i, 42)).collect();
        assert!(blocks[..14].iter().all(|&b| b == 0));
        assert!(blocks[14..28].iter().all(|&b| b == 1));
        assert!(blocks[28..].iter().all(|&b| b == 2));
    }

    #[test]
    fn linspace_hits_both_ends() {
        let xs = linspace(-6.0, 6.0, 64);
        assert_eq!((xs[0], xs[63]), (-6.0, 6.0));
    }
}
