//! Fully-connected networks with hand-written reverse mode.
//!
//! Parameters live in one flat vector, layer by layer: the `out×in` weight
//! matrix in row-major order followed by the bias (when present). Every
//! layer except the last is followed by the network's activation.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FernError, Result};
use crate::json::{self, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative expressed through the pre-activation `z` and the
    /// activation value `a = f(z)`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = FernError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Self::Tanh),
            "relu" => Ok(Self::Relu),
            other => Err(FernError::domain(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub has_bias: bool,
}

impl LayerSpec {
    pub fn param_len(&self) -> usize {
        self.in_dim * self.out_dim + if self.has_bias { self.out_dim } else { 0 }
    }
}

/// Layer list plus activation: everything about a network except its values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetShape {
    pub layers: Vec<LayerSpec>,
    pub activation: Activation,
}

impl NetShape {
    pub fn new(layers: Vec<LayerSpec>, activation: Activation) -> Result<Self> {
        let shape = Self { layers, activation };
        shape.validate()?;
        Ok(shape)
    }

    /// Multilayer perceptron through `widths` (input first), with a bias on
    /// every layer except the output layer.
    pub fn mlp(widths: &[usize], activation: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(FernError::domain("an MLP needs at least input and output widths"));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| LayerSpec { in_dim: w[0], out_dim: w[1], has_bias: l != last })
            .collect();
        Self::new(layers, activation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(FernError::domain("a network needs at least one layer"));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(FernError::domain(format!("layer {l} has a zero dimension")));
            }
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(FernError::domain(format!(
                    "layer {l} outputs {} values but layer {} expects {}",
                    pair[0].out_dim,
                    l + 1,
                    pair[1].in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_len).sum()
    }

    /// Widths `[in, hidden..., out]` when every layer chains.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.out_dim));
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Weights and biases uniform in `±sqrt(1/fan_in)`.
    #[default]
    UniformFanIn,
    Zeros,
}

/// Intermediate values of a (batched) forward pass.
///
/// `activations[0]` is the input and `activations[l + 1]` the output of
/// layer `l`; `pre[l]` is layer `l` before its activation. One row per
/// batch element.
#[derive(Debug, Clone)]
pub struct Tape {
    pub activations: Vec<Array2<f64>>,
    pub pre: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("tape always holds the input")
    }

    pub fn batch_len(&self) -> usize {
        self.activations[0].nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    shape: NetShape,
    params: Vec<f64>,
}

impl DenseNet {
    pub fn from_params(shape: NetShape, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.param_count() {
            return Err(FernError::domain(format!(
                "network needs {} parameters, got {}",
                shape.param_count(),
                params.len()
            )));
        }
        Ok(Self { shape, params })
    }

    pub fn init(shape: NetShape, seed: u64, scheme: InitScheme) -> Result<Self> {
        shape.validate()?;
        let mut params = Vec::with_capacity(shape.param_count());
        match scheme {
            InitScheme::Zeros => params.resize(shape.param_count(), 0.0),
            InitScheme::UniformFanIn => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for layer in &shape.layers {
                    let bound = (1.0 / layer.in_dim as f64).sqrt();
                    for _ in 0..layer.param_len() {
                        params.push(rng.gen_range(-bound..=bound));
                    }
                }
            }
        }
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn count_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.shape.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.shape.output_dim()
    }

    fn layer_views(&self, l: usize, offset: usize) -> (ArrayView2<'_, f64>, Option<ArrayView1<'_, f64>>) {
        let spec = self.shape.layers[l];
        let w_len = spec.in_dim * spec.out_dim;
        let w = ArrayView2::from_shape((spec.out_dim, spec.in_dim), &self.params[offset..offset + w_len])
            .expect("parameter slice matches layer shape");
        let b = spec
            .has_bias
            .then(|| ArrayView1::from(&self.params[offset + w_len..offset + w_len + spec.out_dim]));
        (w, b)
    }

    /// Forward pass over a batch (`rows × input_dim`).
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<Tape> {
        if input.ncols() != self.input_dim() {
            return Err(FernError::domain(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.ncols()
            )));
        }
        let n_layers = self.shape.layers.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre = Vec::with_capacity(n_layers);
        activations.push(input.to_owned());
        let mut offset = 0;
        for l in 0..n_layers {
            let (w, b) = self.layer_views(l, offset);
            let mut z = activations[l].dot(&w.t());
            if let Some(b) = b {
                z += &b;
            }
            let a = if l + 1 == n_layers {
                z.clone()
            } else {
                let act = self.shape.activation;
                z.mapv(|v| act.apply(v))
            };
            pre.push(z);
            activations.push(a);
            offset += self.shape.layers[l].param_len();
        }
        Ok(Tape { activations, pre })
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        let row = ArrayView2::from_shape((1, input.len()), input).expect("one row");
        let tape = self.forward_batch(row)?;
        let out = tape.output().row(0).to_vec();
        Ok((out, tape))
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        let layers = &self.shape.layers;
        let stale = tape.pre.len() != layers.len()
            || tape.activations.len() != layers.len() + 1
            || layers.iter().enumerate().any(|(l, spec)| {
                tape.activations[l].ncols() != spec.in_dim || tape.pre[l].ncols() != spec.out_dim
            });
        if stale {
            Err(FernError::domain("tape does not match the network shape"))
        } else {
            Ok(())
        }
    }

    /// Reverse pass for a batch. `output_grad` is `rows × output_dim`; the
    /// parameter gradient is summed over rows. Skipping the input gradient
    /// saves one matrix product per network.
    pub fn backward_batch(
        &self,
        tape: &Tape,
        output_grad: ArrayView2<'_, f64>,
        want_input_grad: bool,
    ) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
        self.check_tape(tape)?;
        if output_grad.ncols() != self.output_dim() || output_grad.nrows() != tape.batch_len() {
            return Err(FernError::domain(format!(
                "output gradient is {}×{}, expected {}×{}",
                output_grad.nrows(),
                output_grad.ncols(),
                tape.batch_len(),
                self.output_dim()
            )));
        }
        let layers = &self.shape.layers;
        let mut offsets = Vec::with_capacity(layers.len());
        let mut acc = 0;
        for spec in layers {
            offsets.push(acc);
            acc += spec.param_len();
        }

        let mut grad = vec![0.0; self.params.len()];
        let mut delta: Array2<f64> = output_grad.as_standard_layout().into_owned();
        let mut input_grad = None;
        for l in (0..layers.len()).rev() {
            let spec = layers[l];
            if l + 1 != layers.len() {
                let act = self.shape.activation;
                let z = &tape.pre[l];
                let a = &tape.activations[l + 1];
                ndarray::Zip::from(&mut delta)
                    .and(z)
                    .and(a)
                    .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            }
            let off = offsets[l];
            let w_len = spec.in_dim * spec.out_dim;
            let d_w = delta.t().dot(&tape.activations[l]);
            grad[off..off + w_len].iter_mut().zip(d_w.iter()).for_each(|(g, v)| *g = *v);
            if spec.has_bias {
                let d_b: Array1<f64> = delta.sum_axis(Axis(0));
                grad[off + w_len..off + w_len + spec.out_dim].copy_from_slice(&d_b.to_vec());
            }
            if l > 0 || want_input_grad {
                let (w, _) = self.layer_views(l, off);
                let next = delta.dot(&w);
                if l == 0 {
                    input_grad = Some(next);
                    break;
                }
                delta = next;
            }
        }
        Ok((grad, input_grad))
    }

    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let row = ArrayView2::from_shape((1, output_grad.len()), output_grad).expect("one row");
        let (grad, input_grad) = self.backward_batch(tape, row, true)?;
        Ok((grad, input_grad.expect("requested").row(0).to_vec()))
    }

    pub fn to_checkpoint(&self) -> NetCheckpoint {
        NetCheckpoint {
            schema_version: SCHEMA_VERSION,
            architecture: self.shape.layers.clone(),
            activation: self.shape.activation,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: NetCheckpoint) -> Result<Self> {
        if ckpt.schema_version != SCHEMA_VERSION {
            return Err(FernError::Schema(format!(
                "field `schema_version` is {}, expected {SCHEMA_VERSION}",
                ckpt.schema_version
            )));
        }
        let shape = NetShape::new(ckpt.architecture, ckpt.activation)?;
        Self::from_params(shape, ckpt.params).map_err(|e| FernError::Schema(format!("field `params`: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        json::write_file(path, &self.to_checkpoint())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(json::read_file(path)?)
    }
}

pub fn net_forward(net: &DenseNet, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
    net.forward(input)
}

pub fn net_backward(net: &DenseNet, tape: &Tape, output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    net.backward(tape, output_grad)
}

pub fn net_init(shape: NetShape, seed: u64, scheme: InitScheme) -> Result<DenseNet> {
    DenseNet::init(shape, seed, scheme)
}

pub fn count_params(net: &DenseNet) -> usize {
    net.count_params()
}

/// Single-network checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub schema_version: u32,
    pub architecture: Vec<LayerSpec>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Straight loop evaluation of the same parameter layout.
    fn loop_forward(net: &DenseNet, input: &[f64]) -> Vec<f64> {
        let shape = net.shape();
        let p = net.params();
        let mut x = input.to_vec();
        let mut off = 0;
        for (l, spec) in shape.layers.iter().enumerate() {
            let mut y = vec![0.0; spec.out_dim];
            for (o, yo) in y.iter_mut().enumerate() {
                let mut s = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    s += p[off + o * spec.in_dim + i] * xi;
                }
                if spec.has_bias {
                    s += p[off + spec.in_dim * spec.out_dim + o];
                }
                *yo = if l + 1 < shape.layers.len() {
                    match shape.activation {
                        Activation::Tanh => s.tanh(),
                        Activation::Relu => s.max(0.0),
                    }
                } else {
                    s
                };
            }
            off += spec.param_len();
            x = y;
        }
        x
    }

    fn random_net(rng: &mut ChaCha8Rng, widths: &[usize], act: Activation) -> DenseNet {
        let shape = NetShape::mlp(widths, act).unwrap();
        DenseNet::init(shape, rng.gen(), InitScheme::UniformFanIn).unwrap()
    }

    #[test]
    fn zero_net_gives_zero() {
        let shape = NetShape::mlp(&[4, 3, 2], Activation::Tanh).unwrap();
        let net = DenseNet::init(shape, 0, InitScheme::Zeros).unwrap();
        let (out, _) = net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let shape = NetShape::new(
            vec![LayerSpec { in_dim: 1, out_dim: 1, has_bias: false }],
            Activation::Relu,
        )
        .unwrap();
        let net = DenseNet::from_params(shape, vec![1.0]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap().0, vec![3.0]);
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for act in [Activation::Tanh, Activation::Relu] {
            for _ in 0..20 {
                let net = random_net(&mut rng, &[3, 4, 2], act);
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let got = net.forward(&x).unwrap().0;
                let want = loop_forward(&net, &x);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = random_net(&mut rng, &[3, 4, 2], Activation::Tanh);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(FernError::Domain(_))));
        let (_, tape) = net.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert!(net.backward(&tape, &[1.0]).is_err());
        let other = random_net(&mut rng, &[3, 5, 2], Activation::Tanh);
        assert!(matches!(other.backward(&tape, &[1.0, 1.0]), Err(FernError::Domain(_))));
        assert!(NetShape::new(
            vec![
                LayerSpec { in_dim: 2, out_dim: 3, has_bias: true },
                LayerSpec { in_dim: 4, out_dim: 1, has_bias: false }
            ],
            Activation::Tanh
        )
        .is_err());
    }

    #[test]
    fn linear_backward_example() {
        let shape = NetShape::new(
            vec![LayerSpec { in_dim: 1, out_dim: 1, has_bias: false }],
            Activation::Tanh,
        )
        .unwrap();
        let net = DenseNet::from_params(shape, vec![1.7]).unwrap();
        let (_, tape) = net.forward(&[0.3]).unwrap();
        let (pg, ig) = net.backward(&tape, &[1.0]).unwrap();
        assert_eq!(pg, vec![0.3]);
        assert_eq!(ig, vec![1.7]);
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = random_net(&mut rng, &[5, 6, 3], Activation::Tanh);
        let (_, tape) = net.forward(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let (pg, ig) = net.backward(&tape, &[0.0; 3]).unwrap();
        assert!(pg.iter().chain(&ig).all(|v| *v == 0.0));
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let shape = NetShape::mlp(&[22, 20, 1], Activation::Tanh).unwrap();
        let a = DenseNet::init(shape.clone(), 42, InitScheme::UniformFanIn).unwrap();
        let b = DenseNet::init(shape.clone(), 42, InitScheme::UniformFanIn).unwrap();
        let c = DenseNet::init(shape, 43, InitScheme::UniformFanIn).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        let bound = (1.0f64 / 22.0).sqrt();
        assert!(a.params()[..22 * 20].iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn reference_architecture_counts() {
        let branch = NetShape::mlp(&[22, 20, 1], Activation::Tanh).unwrap();
        assert_eq!(branch.param_count(), 480);
        let deep_trunk = NetShape::mlp(&[1, 100, 100, 100, 100, 100, 100, 40], Activation::Tanh).unwrap();
        assert_eq!(deep_trunk.param_count(), 54_700);
        let shallow_trunk = NetShape::mlp(&[1, 100, 30], Activation::Relu).unwrap();
        assert_eq!(shallow_trunk.param_count(), 3_200);
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = random_net(&mut rng, &[3, 7, 2], Activation::Relu);
        let text = json::to_string(&net.to_checkpoint()).unwrap();
        let back = DenseNet::from_checkpoint(json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, net);
    }
}
