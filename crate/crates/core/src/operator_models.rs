//! Operator models of the form `G(u)(x) = Σ_k c_k(û) φ_k(x)`.
//!
//! All three models share `N` independent branch networks `c_k` mapping
//! sensor values `û` to one coefficient each. They differ in the basis:
//! learnable hat functions (FERN), a trunk network of `x` (DeepONet), or
//! fixed POD modes tied to one output grid.

use std::path::Path;

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{same_grid, GridGroup};
use crate::dense_nets::{Activation, DenseNet, InitScheme, NetShape, Tape};
use crate::error::{FernError, Result};
use crate::hat_basis::{basis_matrix, basis_param_grads, HatParams};
pub use crate::json::Provenance;
use crate::json::{self, SCHEMA_VERSION};
use crate::seeding::derive_seed;

/// Stream reserved for the trunk network seed; branch `k` uses stream `k`.
const TRUNK_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "fern")]
    Fern,
    #[serde(rename = "deeponet")]
    DeepONet,
    #[serde(rename = "pod")]
    Pod,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fern => "fern",
            ModelKind::DeepONet => "deeponet",
            ModelKind::Pod => "pod",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = FernError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fern" => Ok(Self::Fern),
            "deeponet" => Ok(Self::DeepONet),
            "pod" => Ok(Self::Pod),
            other => Err(FernError::domain(format!("unknown model kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub coefficient: usize,
    pub basis: usize,
    pub total: usize,
}

impl ParamCount {
    fn new(coefficient: usize, basis: usize) -> Self {
        Self { coefficient, basis, total: coefficient + basis }
    }
}

/// Parameter count straight from an architecture description.
pub fn arch_param_count(kind: ModelKind, n_basis: usize, branch: &NetShape, trunk: Option<&NetShape>) -> ParamCount {
    let coefficient = n_basis * branch.param_count();
    let basis = match kind {
        ModelKind::Fern => 2 * n_basis,
        ModelKind::DeepONet => trunk.map_or(0, NetShape::param_count),
        ModelKind::Pod => 0,
    };
    ParamCount::new(coefficient, basis)
}

fn init_branches(shape: &NetShape, n_basis: usize, seed: u64) -> Result<Vec<DenseNet>> {
    (0..n_basis)
        .map(|k| DenseNet::init(shape.clone(), derive_seed(seed, k as u64), InitScheme::UniformFanIn))
        .collect()
}

fn check_branches(branches: &[DenseNet]) -> Result<()> {
    let first = branches
        .first()
        .ok_or_else(|| FernError::domain("a model needs at least one basis function"))?;
    if first.output_dim() != 1 {
        return Err(FernError::domain("branch networks must have a single output"));
    }
    if branches.iter().any(|b| b.shape() != first.shape()) {
        return Err(FernError::domain("all branch networks must share one architecture"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FernModel {
    pub branches: Vec<DenseNet>,
    pub hat: HatParams,
}

impl FernModel {
    pub fn new(branches: Vec<DenseNet>, hat: HatParams) -> Result<Self> {
        check_branches(&branches)?;
        hat.validate()?;
        if hat.len() != branches.len() {
            return Err(FernError::domain(format!(
                "{} branches but {} hat functions",
                branches.len(),
                hat.len()
            )));
        }
        Ok(Self { branches, hat })
    }

    /// Hats centered on `n_basis` equal cells of `domain`, all with support
    /// `h0`, and freshly initialized branches.
    pub fn init(branch: &NetShape, n_basis: usize, domain: [f64; 2], h0: f64, seed: u64) -> Result<Self> {
        let hat = HatParams::uniform(n_basis, domain[0], domain[1], h0)?;
        Self::new(init_branches(branch, n_basis, seed)?, hat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepONetModel {
    pub branches: Vec<DenseNet>,
    pub trunk: DenseNet,
}

impl DeepONetModel {
    pub fn new(branches: Vec<DenseNet>, trunk: DenseNet) -> Result<Self> {
        check_branches(&branches)?;
        if trunk.input_dim() != 1 {
            return Err(FernError::domain("the trunk network takes the scalar x"));
        }
        if trunk.output_dim() != branches.len() {
            return Err(FernError::domain(format!(
                "trunk produces {} basis values for {} branches",
                trunk.output_dim(),
                branches.len()
            )));
        }
        Ok(Self { branches, trunk })
    }

    /// `trunk_hidden` lists hidden widths between the scalar input and the
    /// `n_basis` outputs.
    pub fn init(
        branch: &NetShape,
        n_basis: usize,
        trunk_hidden: &[usize],
        trunk_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let mut widths = vec![1];
        widths.extend_from_slice(trunk_hidden);
        widths.push(n_basis);
        let trunk_shape = NetShape::mlp(&widths, trunk_activation)?;
        let trunk = DenseNet::init(trunk_shape, derive_seed(seed, TRUNK_STREAM), InitScheme::UniformFanIn)?;
        Self::new(init_branches(branch, n_basis, seed)?, trunk)
    }
}

/// Fixed POD basis bound to the grid the modes were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct PodModel {
    pub branches: Vec<DenseNet>,
    grid: Vec<f64>,
    modes: Array2<f64>,
}

impl PodModel {
    pub fn new(branches: Vec<DenseNet>, grid: Vec<f64>, modes: Array2<f64>) -> Result<Self> {
        check_branches(&branches)?;
        if modes.nrows() != grid.len() || modes.ncols() != branches.len() {
            return Err(FernError::domain(format!(
                "modes are {}×{}, expected {}×{}",
                modes.nrows(),
                modes.ncols(),
                grid.len(),
                branches.len()
            )));
        }
        let gram = modes.t().dot(&modes);
        let off = gram
            .indexed_iter()
            .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if off > 1e-10 {
            return Err(FernError::domain(format!("POD modes are not orthonormal (deviation {off:e})")));
        }
        Ok(Self { branches, grid, modes })
    }

    pub fn init(branch: &NetShape, grid: Vec<f64>, modes: Array2<f64>, seed: u64) -> Result<Self> {
        let n = modes.ncols();
        Self::new(init_branches(branch, n, seed)?, grid, modes)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn modes(&self) -> &Array2<f64> {
        &self.modes
    }

    fn check_grid(&self, xs: &[f64]) -> Result<()> {
        if same_grid(xs, &self.grid) {
            Ok(())
        } else {
            Err(FernError::grid(format!(
                "POD modes are bound to their {}-point training mesh; predictions on any other mesh are \
                 undefined (same-mesh requirement)",
                self.grid.len()
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorModel {
    Fern(FernModel),
    DeepONet(DeepONetModel),
    Pod(PodModel),
}

impl From<FernModel> for OperatorModel {
    fn from(m: FernModel) -> Self {
        Self::Fern(m)
    }
}

impl From<DeepONetModel> for OperatorModel {
    fn from(m: DeepONetModel) -> Self {
        Self::DeepONet(m)
    }
}

impl From<PodModel> for OperatorModel {
    fn from(m: PodModel) -> Self {
        Self::Pod(m)
    }
}

/// Gradient of a scalar loss with respect to every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub branches: Vec<Vec<f64>>,
    pub basis: BasisGrads,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisGrads {
    Hat { centers: Vec<f64>, supports: Vec<f64> },
    Trunk(Vec<f64>),
    Fixed,
}

impl ModelGrads {
    /// Flat blocks in the same order as [`OperatorModel::param_blocks_mut`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.branches.iter().map(Vec::as_slice).collect();
        match &self.basis {
            BasisGrads::Hat { centers, supports } => {
                out.push(centers);
                out.push(supports);
            }
            BasisGrads::Trunk(g) => out.push(g),
            BasisGrads::Fixed => {}
        }
        out
    }
}

/// Basis values of one output grid plus what the backward pass needs.
#[derive(Debug, Clone)]
struct GroupBasis {
    rows: Vec<usize>,
    grid: Vec<f64>,
    phi: Array2<f64>,
    trunk_tape: Option<Tape>,
}

/// Cached forward pass over a batch of inputs and their output grids.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `batch × N` branch outputs.
    pub coefficients: Array2<f64>,
    branch_tapes: Vec<Tape>,
    groups: Vec<GroupBasis>,
}

impl Forward {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Batch rows belonging to group `g`.
    pub fn rows(&self, g: usize) -> &[usize] {
        &self.groups[g].rows
    }

    pub fn grid(&self, g: usize) -> &[f64] {
        &self.groups[g].grid
    }

    /// `rows × M` predictions for group `g`.
    pub fn predictions(&self, g: usize) -> Array2<f64> {
        let group = &self.groups[g];
        let coeffs = self.coefficients.select(Axis(0), &group.rows);
        coeffs.dot(&group.phi.t())
    }
}

impl OperatorModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Fern(_) => ModelKind::Fern,
            Self::DeepONet(_) => ModelKind::DeepONet,
            Self::Pod(_) => ModelKind::Pod,
        }
    }

    pub fn branches(&self) -> &[DenseNet] {
        match self {
            Self::Fern(m) => &m.branches,
            Self::DeepONet(m) => &m.branches,
            Self::Pod(m) => &m.branches,
        }
    }

    pub fn n_basis(&self) -> usize {
        self.branches().len()
    }

    pub fn branch_input_dim(&self) -> usize {
        self.branches()[0].input_dim()
    }

    pub fn hat(&self) -> Option<&HatParams> {
        match self {
            Self::Fern(m) => Some(&m.hat),
            _ => None,
        }
    }

    pub fn param_count(&self) -> ParamCount {
        let coefficient = self.branches().iter().map(DenseNet::count_params).sum();
        let basis = match self {
            Self::Fern(m) => m.hat.centers.len() + m.hat.supports.len(),
            Self::DeepONet(m) => m.trunk.count_params(),
            Self::Pod(_) => 0,
        };
        ParamCount::new(coefficient, basis)
    }

    /// `M×N` basis values on `xs`, and the trunk tape for DeepONet.
    fn basis_values(&self, xs: &[f64]) -> Result<(Array2<f64>, Option<Tape>)> {
        match self {
            Self::Fern(m) => Ok((basis_matrix(&m.hat, xs), None)),
            Self::DeepONet(m) => {
                let input = ArrayView2::from_shape((xs.len(), 1), xs).expect("column of x");
                let tape = m.trunk.forward_batch(input)?;
                Ok((tape.output().clone(), Some(tape)))
            }
            Self::Pod(m) => {
                m.check_grid(xs)?;
                Ok((m.modes.clone(), None))
            }
        }
    }

    /// Branch outputs for a `batch × sensors` input matrix.
    pub fn coefficients(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.branch_pass(inputs)?.0)
    }

    fn branch_pass(&self, inputs: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Vec<Tape>)> {
        if inputs.ncols() != self.branch_input_dim() {
            return Err(FernError::domain(format!(
                "branch networks expect {} sensor values, got {}",
                self.branch_input_dim(),
                inputs.ncols()
            )));
        }
        let tapes: Vec<Tape> = self
            .branches()
            .par_iter()
            .map(|net| net.forward_batch(inputs))
            .collect::<Result<_>>()?;
        let mut coeffs = Array2::zeros((inputs.nrows(), tapes.len()));
        for (k, tape) in tapes.iter().enumerate() {
            coeffs.column_mut(k).assign(&tape.output().column(0));
        }
        Ok((coeffs, tapes))
    }

    /// Forward pass over a batch. `groups[g].samples` index rows of `inputs`.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>, groups: &[GridGroup]) -> Result<Forward> {
        let (coefficients, branch_tapes) = self.branch_pass(inputs)?;
        let groups = groups
            .iter()
            .map(|g| {
                if let Some(&bad) = g.samples.iter().find(|&&r| r >= inputs.nrows()) {
                    return Err(FernError::domain(format!("group row {bad} outside the batch")));
                }
                let (phi, trunk_tape) = self.basis_values(&g.grid)?;
                Ok(GroupBasis { rows: g.samples.clone(), grid: g.grid.clone(), phi, trunk_tape })
            })
            .collect::<Result<_>>()?;
        Ok(Forward { coefficients, branch_tapes, groups })
    }

    /// Backward pass given `∂loss/∂prediction` for every group
    /// (`residuals[g]` is `rows × M_g`).
    pub fn backward(&self, fwd: &Forward, residuals: &[Array2<f64>]) -> Result<ModelGrads> {
        if residuals.len() != fwd.groups.len() {
            return Err(FernError::domain("one residual block per grid group is required"));
        }
        let n = self.n_basis();
        let mut d_coeffs = Array2::<f64>::zeros(fwd.coefficients.raw_dim());
        let mut basis = match self {
            Self::Fern(_) => BasisGrads::Hat { centers: vec![0.0; n], supports: vec![0.0; n] },
            Self::DeepONet(m) => BasisGrads::Trunk(vec![0.0; m.trunk.count_params()]),
            Self::Pod(_) => BasisGrads::Fixed,
        };
        for (group, residual) in fwd.groups.iter().zip(residuals) {
            if residual.dim() != (group.rows.len(), group.grid.len()) {
                return Err(FernError::domain(format!(
                    "residual is {}×{}, expected {}×{}",
                    residual.nrows(),
                    residual.ncols(),
                    group.rows.len(),
                    group.grid.len()
                )));
            }
            let d_group = residual.dot(&group.phi);
            for (r, &row) in group.rows.iter().enumerate() {
                let mut target = d_coeffs.row_mut(row);
                target += &d_group.row(r);
            }
            if matches!(basis, BasisGrads::Fixed) {
                continue;
            }
            // ∂loss/∂φ_k(x_m) summed over the group's samples.
            let coeffs = fwd.coefficients.select(Axis(0), &group.rows);
            let d_phi = residual.t().dot(&coeffs);
            match (&mut basis, self) {
                (BasisGrads::Hat { centers, supports }, Self::Fern(m)) => {
                    let (d_a, d_h) = basis_param_grads(&m.hat, &group.grid);
                    for k in 0..n {
                        centers[k] += d_phi.column(k).dot(&d_a.column(k));
                        supports[k] += d_phi.column(k).dot(&d_h.column(k));
                    }
                }
                (BasisGrads::Trunk(acc), Self::DeepONet(m)) => {
                    let tape = group.trunk_tape.as_ref().expect("trunk tape recorded");
                    let (g, _) = m.trunk.backward_batch(tape, d_phi.view(), false)?;
                    acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                _ => unreachable!("basis gradient kind follows the model kind"),
            }
        }
        let branches = self
            .branches()
            .par_iter()
            .zip(fwd.branch_tapes.par_iter())
            .enumerate()
            .map(|(k, (net, tape))| {
                let col = d_coeffs.slice(s![.., k..k + 1]);
                net.backward_batch(tape, col, false).map(|(g, _)| g)
            })
            .collect::<Result<_>>()?;
        Ok(ModelGrads { branches, basis })
    }

    /// `G(û)(x_m)` for one input function.
    pub fn predict(&self, u_hat: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
        let input = ArrayView2::from_shape((1, u_hat.len()), u_hat).expect("one row");
        let coeffs = self.coefficients(input)?;
        let (phi, _) = self.basis_values(xs)?;
        Ok(phi.dot(&coeffs.row(0)).to_vec())
    }

    /// Gradients for one input function given `∂loss/∂G(û)(x_m)`.
    pub fn model_grads(&self, u_hat: &[f64], xs: &[f64], residual: &[f64]) -> Result<ModelGrads> {
        if residual.len() != xs.len() {
            return Err(FernError::domain(format!(
                "{} residual values for {} evaluation points",
                residual.len(),
                xs.len()
            )));
        }
        let input = ArrayView2::from_shape((1, u_hat.len()), u_hat).expect("one row");
        let groups = [GridGroup { grid: xs.to_vec(), samples: vec![0] }];
        let fwd = self.forward(input, &groups)?;
        let r = ArrayView1::from(residual).insert_axis(Axis(0)).to_owned();
        self.backward(&fwd, &[r])
    }

    /// Mutable parameter blocks: branches in order, then the basis.
    pub fn param_blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let (branches, basis): (&mut Vec<DenseNet>, Vec<(String, &mut [f64])>) = match self {
            Self::Fern(m) => (
                &mut m.branches,
                vec![
                    ("hat.centers".to_string(), m.hat.centers.as_mut_slice()),
                    ("hat.supports".to_string(), m.hat.supports.as_mut_slice()),
                ],
            ),
            Self::DeepONet(m) => (&mut m.branches, vec![("trunk".to_string(), m.trunk.params_mut())]),
            Self::Pod(m) => (&mut m.branches, vec![]),
        };
        let mut out: Vec<(String, &mut [f64])> = branches
            .iter_mut()
            .enumerate()
            .map(|(k, net)| (format!("branch[{k}]"), net.params_mut()))
            .collect();
        out.extend(basis);
        out
    }

    /// Keeps hat supports at or above `h_min` (no-op for other models).
    pub fn project(&mut self, h_min: f64) {
        if let Self::Fern(m) = self {
            m.hat.project_supports(h_min);
        }
    }

    pub fn to_bundle(&self) -> ModelBundle {
        let branch_arch = self.branches()[0].shape().clone();
        let branch_params = self.branches().iter().map(|b| b.params().to_vec()).collect();
        let basis = match self {
            Self::Fern(m) => BasisRecord::Hat { centers: m.hat.centers.clone(), supports: m.hat.supports.clone() },
            Self::DeepONet(m) => BasisRecord::Trunk {
                trunk_arch: m.trunk.shape().clone(),
                trunk_params: m.trunk.params().to_vec(),
            },
            Self::Pod(m) => BasisRecord::Pod {
                grid: m.grid.clone(),
                modes: m.modes.outer_iter().map(|r| r.to_vec()).collect(),
            },
        };
        ModelBundle {
            schema_version: SCHEMA_VERSION,
            kind: self.kind(),
            n_basis: self.n_basis(),
            branch_arch,
            branch_params,
            basis,
            provenance: None,
        }
    }

    pub fn from_bundle(bundle: ModelBundle) -> Result<Self> {
        let schema = |field: &str, e: FernError| FernError::Schema(format!("field `{field}`: {e}"));
        if bundle.schema_version != SCHEMA_VERSION {
            return Err(FernError::Schema(format!(
                "field `schema_version` is {}, expected {SCHEMA_VERSION}",
                bundle.schema_version
            )));
        }
        if bundle.branch_params.len() != bundle.n_basis {
            return Err(FernError::Schema(format!(
                "field `branch_params` has {} entries, expected N = {}",
                bundle.branch_params.len(),
                bundle.n_basis
            )));
        }
        let branches = bundle
            .branch_params
            .into_iter()
            .map(|p| DenseNet::from_params(bundle.branch_arch.clone(), p))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| schema("branch_params", e))?;
        let model = match (bundle.kind, bundle.basis) {
            (ModelKind::Fern, BasisRecord::Hat { centers, supports }) => {
                let hat = HatParams::new(centers, supports).map_err(|e| schema("basis", e))?;
                Self::Fern(FernModel::new(branches, hat).map_err(|e| schema("basis", e))?)
            }
            (ModelKind::DeepONet, BasisRecord::Trunk { trunk_arch, trunk_params }) => {
                let trunk = DenseNet::from_params(trunk_arch, trunk_params).map_err(|e| schema("basis", e))?;
                Self::DeepONet(DeepONetModel::new(branches, trunk).map_err(|e| schema("basis", e))?)
            }
            (ModelKind::Pod, BasisRecord::Pod { grid, modes }) => {
                let m = grid.len();
                let n = modes.first().map_or(0, Vec::len);
                if modes.len() != m || modes.iter().any(|r| r.len() != n) {
                    return Err(FernError::Schema("field `basis.modes` must be grid-length rows of N".into()));
                }
                let flat: Vec<f64> = modes.into_iter().flatten().collect();
                let modes = Array2::from_shape_vec((m, n), flat).expect("checked shape");
                Self::Pod(PodModel::new(branches, grid, modes).map_err(|e| schema("basis", e))?)
            }
            (kind, _) => {
                return Err(FernError::Schema(format!("field `basis` does not match kind `{kind}`")));
            }
        };
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>, provenance: Option<Provenance>) -> Result<()> {
        let mut bundle = self.to_bundle();
        bundle.provenance = provenance;
        json::write_file(path, &bundle)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bundle(json::read_file(path)?)
    }
}

/// Serialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema_version: u32,
    pub kind: ModelKind,
    #[serde(rename = "N")]
    pub n_basis: usize,
    pub branch_arch: NetShape,
    pub branch_params: Vec<Vec<f64>>,
    pub basis: BasisRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisRecord {
    Hat { centers: Vec<f64>, supports: Vec<f64> },
    Trunk { trunk_arch: NetShape, trunk_params: Vec<f64> },
    Pod { grid: Vec<f64>, modes: Vec<Vec<f64>> },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hat_basis::hat_eval_piecewise;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn branch() -> NetShape {
        NetShape::mlp(&[5, 4, 1], Activation::Tanh).unwrap()
    }

    fn zero_branches(n: usize) -> Vec<DenseNet> {
        (0..n).map(|_| DenseNet::init(branch(), 0, InitScheme::Zeros).unwrap()).collect()
    }

    /// Branch whose output is the constant `c` (bias-free last layer fed
    /// by one saturated tanh unit would not be exact, so use a linear net).
    fn constant_branch(c: f64) -> DenseNet {
        let shape = NetShape::new(
            vec![
                crate::dense_nets::LayerSpec { in_dim: 5, out_dim: 1, has_bias: true },
                crate::dense_nets::LayerSpec { in_dim: 1, out_dim: 1, has_bias: false },
            ],
            Activation::Relu,
        )
        .unwrap();
        DenseNet::from_params(shape, vec![0.0, 0.0, 0.0, 0.0, 0.0, c.abs(), c.signum()]).unwrap()
    }

    #[test]
    fn zero_branches_predict_zero() {
        let hat = HatParams::uniform(3, 0.0, 1.0, 0.2).unwrap();
        let model = OperatorModel::from(FernModel::new(zero_branches(3), hat).unwrap());
        let out = model.predict(&[1.0; 5], &[0.1, 0.5, 0.9]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_hat_scales_by_coefficient() {
        let hat = HatParams::new(vec![0.4], vec![0.1]).unwrap();
        let model = OperatorModel::from(FernModel::new(vec![constant_branch(-2.5)], hat).unwrap());
        let xs: Vec<f64> = (0..41).map(|i| i as f64 / 40.0).collect();
        let out = model.predict(&[0.3; 5], &xs).unwrap();
        for (x, y) in xs.iter().zip(out) {
            assert!((y - -2.5 * hat_eval_piecewise(0.4, 0.1, *x).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn prediction_matches_explicit_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let model = FernModel::init(&branch(), 3, [0.0, 1.0], 0.3, 5).unwrap();
        let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xs: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let coeffs: Vec<f64> = model.branches.iter().map(|b| b.forward(&u).unwrap().0[0]).collect();
        let hat = model.hat.clone();
        let got = OperatorModel::from(model).predict(&u, &xs).unwrap();
        for (m, x) in xs.iter().enumerate() {
            let want: f64 = (0..3)
                .map(|k| coeffs[k] * hat_eval_piecewise(hat.centers[k], hat.supports[k], *x).unwrap())
                .sum();
            assert!((got[m] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_residual_gives_zero_grads() {
        let model = OperatorModel::from(FernModel::init(&branch(), 4, [0.0, 1.0], 0.2, 1).unwrap());
        let xs = [0.1, 0.35, 0.6];
        let g = model.model_grads(&[0.2; 5], &xs, &[0.0; 3]).unwrap();
        assert!(g.blocks().iter().all(|b| b.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_term_chain_rule() {
        // One hat, constant coefficient c, one-hot residual at x on the rising edge:
        // ∂/∂a = r·c·(-1), ∂/∂h = r·c·(+1).
        let c = 1.5;
        let r = 0.7;
        let hat = HatParams::new(vec![0.5], vec![0.05]).unwrap();
        let model = OperatorModel::from(FernModel::new(vec![constant_branch(c)], hat).unwrap());
        let xs = [0.2, 0.48, 0.9];
        let g = model.model_grads(&[0.0; 5], &xs, &[0.0, r, 0.0]).unwrap();
        match g.basis {
            BasisGrads::Hat { centers, supports } => {
                assert!((centers[0] + r * c).abs() < 1e-15);
                assert!((supports[0] - r * c).abs() < 1e-15);
            }
            other => panic!("unexpected basis grads {other:?}"),
        }
        // Coefficient gradient is r·φ(x) = 0.7·0.03; the last weight sees it times its input |c|.
        let last = g.branches[0][6];
        assert!((last - r * 0.03 * c.abs()).abs() < 1e-12);
    }

    #[test]
    fn pod_refuses_other_grids() {
        let grid = vec![0.0, 0.5, 1.0];
        let modes = Array2::from_shape_vec((3, 2), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let model = OperatorModel::from(PodModel::new(zero_branches(2), grid.clone(), modes).unwrap());
        assert!(model.predict(&[0.0; 5], &grid).is_ok());
        let err = model.predict(&[0.0; 5], &[0.0, 0.4, 1.0]).unwrap_err();
        assert!(matches!(err, FernError::Grid(ref m) if m.contains("same-mesh")));
    }

    #[test]
    fn pod_rejects_non_orthonormal_modes() {
        let modes = Array2::from_shape_vec((2, 1), vec![1.0, 1.0]).unwrap();
        assert!(PodModel::new(zero_branches(1), vec![0.0, 1.0], modes).is_err());
    }

    #[test]
    fn input_dimension_is_checked() {
        let model = OperatorModel::from(FernModel::init(&branch(), 2, [0.0, 1.0], 0.2, 1).unwrap());
        assert!(matches!(model.predict(&[0.0; 4], &[0.5]), Err(FernError::Domain(_))));
        assert!(model.model_grads(&[0.0; 5], &[0.5], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn param_counts_for_each_kind() {
        let b = NetShape::mlp(&[22, 20, 1], Activation::Tanh).unwrap();
        let fern = OperatorModel::from(FernModel::init(&b, 40, [0.0, 1.0], 0.05, 0).unwrap());
        assert_eq!(fern.param_count(), ParamCount { coefficient: 19_200, basis: 80, total: 19_280 });
        let deep = OperatorModel::from(
            DeepONetModel::init(&b, 30, &[100, 100, 100, 100, 100, 100], Activation::Tanh, 0).unwrap(),
        );
        assert_eq!(deep.param_count(), ParamCount { coefficient: 14_400, basis: 53_700, total: 68_100 });
        let grid: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let mut modes = Array2::zeros((64, 60));
        for k in 0..60 {
            modes[[k, k]] = 1.0;
        }
        let pod = OperatorModel::from(PodModel::init(&b, grid, modes, 0).unwrap());
        assert_eq!(pod.param_count(), ParamCount { coefficient: 28_800, basis: 0, total: 28_800 });
    }

    #[test]
    fn bundles_round_trip_for_all_kinds() {
        let b = branch();
        let grid = vec![0.0, 0.5, 1.0];
        let modes = Array2::from_shape_vec((3, 2), vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let models = [
            OperatorModel::from(FernModel::init(&b, 3, [0.0, 1.0], 0.05, 3).unwrap()),
            OperatorModel::from(DeepONetModel::init(&b, 3, &[6], Activation::Relu, 3).unwrap()),
            OperatorModel::from(PodModel::init(&b, grid, modes, 3).unwrap()),
        ];
        for model in models {
            let text = json::to_string(&model.to_bundle()).unwrap();
            let bundle: ModelBundle = json::from_str(&text).unwrap();
            assert_eq!(OperatorModel::from_bundle(bundle).unwrap(), model);
        }
    }

    #[test]
    fn bundle_kind_mismatch_is_a_schema_error() {
        let model = OperatorModel::from(FernModel::init(&branch(), 2, [0.0, 1.0], 0.05, 3).unwrap());
        let mut bundle = model.to_bundle();
        bundle.kind = ModelKind::DeepONet;
        assert!(matches!(OperatorModel::from_bundle(bundle), Err(FernError::Schema(_))));
    }
}
