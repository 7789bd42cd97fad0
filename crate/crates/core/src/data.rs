//! Operator-learning datasets: sensor values of each input function plus
//! the output function sampled on a per-sample grid.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{FernError, Result};
use crate::json::{self, Provenance, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSample {
    /// Free parameters drawn for this sample's initial condition.
    pub ic_params: BTreeMap<String, f64>,
    pub u_sensors: Vec<f64>,
    pub x_out: Vec<f64>,
    pub v_out: Vec<f64>,
}

/// Numerical solver settings recorded with a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub cells: usize,
    /// Requested time step (an upper bound for CFL-limited schemes).
    pub dt: f64,
    pub scheme: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDataset {
    pub schema_version: u32,
    pub pde: String,
    pub domain: [f64; 2],
    pub t_final: f64,
    pub constants: BTreeMap<String, f64>,
    pub dofs: usize,
    pub seed: u64,
    pub mesh: String,
    pub sensor_grid: Vec<f64>,
    pub solver_meta: SolverMeta,
    /// Free-form provenance notes (defaults chosen, known discrepancies).
    #[serde(default)]
    pub notes: Vec<String>,
    pub samples: Vec<OperatorSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Samples sharing one bit-identical output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGroup {
    pub grid: Vec<f64>,
    pub samples: Vec<usize>,
}

impl OperatorDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_grid.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(FernError::Schema(format!(
                "field `schema_version` is {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        let m = self.sensor_count();
        for (i, s) in self.samples.iter().enumerate() {
            if s.u_sensors.len() != m {
                return Err(FernError::Schema(format!(
                    "field `samples[{i}].u_sensors` has {} values, expected {m}",
                    s.u_sensors.len()
                )));
            }
            if s.x_out.len() != s.v_out.len() || s.x_out.is_empty() {
                return Err(FernError::Schema(format!(
                    "field `samples[{i}].v_out` must match a non-empty `x_out`"
                )));
            }
            if s.x_out.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(FernError::Schema(format!(
                    "field `samples[{i}].x_out` is not strictly increasing"
                )));
            }
        }
        Ok(())
    }

    /// Groups samples by output grid, in order of first appearance.
    pub fn grid_groups(&self) -> Vec<GridGroup> {
        group_by_grid(self.samples.iter().enumerate().map(|(i, s)| (i, s.x_out.as_slice())))
    }

    /// The single grid shared by every sample, if there is one.
    pub fn shared_grid(&self) -> Option<&[f64]> {
        let first = self.samples.first()?.x_out.as_slice();
        self.samples
            .iter()
            .all(|s| same_grid(&s.x_out, first))
            .then_some(first)
    }

    /// Sensor values as a `samples × sensors` matrix (rows in `indices` order).
    pub fn input_matrix(&self, indices: &[usize]) -> Array2<f64> {
        let m = self.sensor_count();
        let mut u = Array2::zeros((indices.len(), m));
        for (r, &i) in indices.iter().enumerate() {
            u.row_mut(r)
                .assign(&ndarray::ArrayView1::from(&self.samples[i].u_sensors));
        }
        u
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        json::write_file(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ds: Self = json::read_file(path)?;
        ds.validate()?;
        Ok(ds)
    }
}

/// Bit-level grid equality (no tolerance).
pub fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub fn group_by_grid<'a>(items: impl IntoIterator<Item = (usize, &'a [f64])>) -> Vec<GridGroup> {
    let mut groups: Vec<GridGroup> = Vec::new();
    for (i, grid) in items {
        match groups.iter_mut().find(|g| same_grid(&g.grid, grid)) {
            Some(g) => g.samples.push(i),
            None => groups.push(GridGroup { grid: grid.to_vec(), samples: vec![i] }),
        }
    }
    groups
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Small synthetic dataset: `u(x) = c·sin(πx)`, input sampled on
    /// `sensors` points, output on the given grids (cycled over samples).
    pub fn synthetic(n: usize, sensors: usize, grids: &[Vec<f64>]) -> OperatorDataset {
        let sensor_grid: Vec<f64> = (0..sensors).map(|i| i as f64 / (sensors - 1) as f64).collect();
        let samples = (0..n)
            .map(|i| {
                let c = 0.5 + i as f64 / n as f64;
                let x_out = grids[i % grids.len()].clone();
                OperatorSample {
                    ic_params: BTreeMap::from([("c".to_string(), c)]),
                    u_sensors: sensor_grid.iter().map(|x| c * (std::f64::consts::PI * x).sin()).collect(),
                    v_out: x_out.iter().map(|x| c * c * (std::f64::consts::PI * x).sin()).collect(),
                    x_out,
                }
            })
            .collect();
        OperatorDataset {
            schema_version: SCHEMA_VERSION,
            pde: "synthetic".into(),
            domain: [0.0, 1.0],
            t_final: 1.0,
            constants: BTreeMap::new(),
            dofs: 1,
            seed: 0,
            mesh: "custom".into(),
            sensor_grid,
            solver_meta: SolverMeta { cells: 0, dt: 0.0, scheme: "analytic".into() },
            notes: vec![],
            samples,
            provenance: None,
        }
    }

    pub fn uniform(m: usize) -> Vec<f64> {
        (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn groups_follow_first_appearance() {
        let a = uniform(5);
        let b: Vec<f64> = a.iter().map(|x| x * 0.5).collect();
        let ds = synthetic(5, 4, &[a.clone(), b.clone()]);
        let groups = ds.grid_groups();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].samples, vec![0, 2, 4]);
        assert_eq!(groups[1].samples, vec![1, 3]);
        assert!(ds.shared_grid().is_none());
        assert_eq!(synthetic(3, 4, &[a.clone()]).shared_grid(), Some(a.as_slice()));
    }

    #[test]
    fn validation_catches_bad_samples() {
        let mut ds = synthetic(2, 4, &[uniform(5)]);
        assert!(ds.validate().is_ok());
        ds.samples[1].u_sensors.pop();
        assert!(matches!(ds.validate(), Err(FernError::Schema(_))));
        let mut ds = synthetic(2, 4, &[vec![0.0, 0.5, 0.4]]);
        ds.samples[0].v_out = vec![0.0; 3];
        assert!(ds.validate().is_err());
    }

    #[test]
    fn file_round_trip() {
        let ds = synthetic(3, 4, &[uniform(7)]);
        let dir = std::env::temp_dir().join(format!("fern-data-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ds.json");
        ds.save(&path).unwrap();
        assert_eq!(OperatorDataset::load(&path).unwrap(), ds);
        std::fs::remove_dir_all(dir).ok();
    }
}
