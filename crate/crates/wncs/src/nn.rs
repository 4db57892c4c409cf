//! Minimal dense neural-network stack with manual reverse-mode
//! differentiation: affine layers, optional per-layer layer normalization,
//! elementwise activations, bias-corrected Adam, and global gradient
//! clipping. All numerics are 64-bit; forward and backward are
//! deterministic pure functions of (network, input).
//!
//! Columns are batch samples: a forward pass maps an `in × B` matrix to an
//! `out × B` matrix, and `backward` contracts the cached pass against a
//! gradient of the same shape, returning parameter gradients summed over
//! the batch plus the gradient with respect to the input.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at a unit, given its pre-activation and output values.
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Tanh => 1.0 - out * out,
        }
    }
}

/// Learnable per-unit scale and shift of a layer-norm stage.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub scale: DVector<f64>,
    pub shift: DVector<f64>,
}

impl LayerNormParams {
    pub fn identity(units: usize) -> Self {
        LayerNormParams {
            scale: DVector::from_element(units, 1.0),
            shift: DVector::zeros(units),
        }
    }
}

/// One dense layer: affine map, optional layer norm, then activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// out × in.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub norm: Option<LayerNormParams>,
    pub activation: Activation,
}

impl Layer {
    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// A feedforward stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    /// Stability constant inside the layer-norm square root.
    pub eps_z: f64,
}

/// Everything `backward` needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs, one per layer (the network input first).
    inputs: Vec<DMatrix<f64>>,
    /// Normalized pre-activations x̃ for layers with norm, else None.
    normalized: Vec<Option<DMatrix<f64>>>,
    /// Per-column 1/sqrt(var + eps) for layers with norm.
    inv_std: Vec<Option<DVector<f64>>>,
    /// Pre-activation values (after norm when present).
    pre_activation: Vec<DMatrix<f64>>,
    /// Activation outputs.
    outputs: Vec<DMatrix<f64>>,
}

/// Gradients of one layer's parameters, summed over the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    /// (scale, shift) gradients when the layer carries a norm stage.
    pub norm: Option<(DVector<f64>, DVector<f64>)>,
}

/// Gradients of a whole network, mirroring its parameter structure.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<LayerGrads>,
}

impl DenseNet {
    /// Builds a stack from `dims = [in, h1, ..., out]`. Hidden layers use
    /// `hidden_activation` and, when `layer_norm` is set, carry a norm stage;
    /// the output layer uses `output_activation` and is never normalized.
    /// Weights are uniform in ±sqrt(6 / (fan_in + fan_out)), biases zero,
    /// norm parameters start at identity.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        layer_norm: bool,
        eps_z: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::parameter("network needs at least input and output dims, all nonzero"));
        }
        if eps_z < 0.0 {
            return Err(Error::parameter("layer-norm epsilon must be non-negative"));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..bound));
            let last = i == dims.len() - 2;
            layers.push(Layer {
                weight,
                bias: DVector::zeros(fan_out),
                norm: if layer_norm && !last {
                    Some(LayerNormParams::identity(fan_out))
                } else {
                    None
                },
                activation: if last { output_activation } else { hidden_activation },
            });
        }
        Ok(DenseNet { layers, eps_z })
    }

    /// Like [`DenseNet::new`] but every layer is hidden-style: activation on
    /// all layers and a norm stage on all layers when `layer_norm` is set.
    /// Used for shared trunks whose top layer feeds further branches.
    pub fn hidden_stack<R: Rng + ?Sized>(
        dims: &[usize],
        activation: Activation,
        layer_norm: bool,
        eps_z: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = DenseNet::new(dims, activation, activation, layer_norm, eps_z, rng)?;
        if layer_norm {
            let last = net.layers.last_mut().expect("at least one layer");
            last.norm = Some(LayerNormParams::identity(last.output_dim()));
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Layer::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::output_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weight.len() + l.bias.len() + l.norm.as_ref().map_or(0, |n| n.scale.len() + n.shift.len())
            })
            .sum()
    }

    /// Applies every layer: affine, then norm when present, then activation.
    pub fn forward(&self, input: &DMatrix<f64>) -> Result<(DMatrix<f64>, ForwardCache)> {
        if input.nrows() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} rows, network expects {}",
                input.nrows(),
                self.input_dim()
            )));
        }
        let batch = input.ncols();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            normalized: Vec::with_capacity(self.layers.len()),
            inv_std: Vec::with_capacity(self.layers.len()),
            pre_activation: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };

        let mut h = input.clone();
        for layer in &self.layers {
            cache.inputs.push(h.clone());
            let mut z = &layer.weight * &h;
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }

            let (pre, normalized, inv_std) = match &layer.norm {
                Some(norm) => {
                    let d = z.nrows() as f64;
                    let mut x_tilde = DMatrix::zeros(z.nrows(), batch);
                    let mut inv = DVector::zeros(batch);
                    for j in 0..batch {
                        let col = z.column(j);
                        let mean = col.sum() / d;
                        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d;
                        let inv_std = 1.0 / (var + self.eps_z).sqrt();
                        inv[j] = inv_std;
                        for i in 0..z.nrows() {
                            x_tilde[(i, j)] = (z[(i, j)] - mean) * inv_std;
                        }
                    }
                    let mut s = x_tilde.clone();
                    for j in 0..batch {
                        for i in 0..s.nrows() {
                            s[(i, j)] = norm.scale[i] * s[(i, j)] + norm.shift[i];
                        }
                    }
                    (s, Some(x_tilde), Some(inv))
                }
                None => (z, None, None),
            };

            let mut out = pre.clone();
            for x in out.iter_mut() {
                *x = layer.activation.apply(*x);
            }

            cache.normalized.push(normalized);
            cache.inv_std.push(inv_std);
            cache.pre_activation.push(pre);
            cache.outputs.push(out.clone());
            h = out;
        }
        Ok((h, cache))
    }

    /// Exact reverse-mode gradients of `⟨output, grad_output⟩` with respect
    /// to every parameter (weights, biases, norm scale/shift) and the input.
    /// Parameter gradients are summed over batch columns.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &DMatrix<f64>,
    ) -> Result<(NetGrads, DMatrix<f64>)> {
        if cache.outputs.len() != self.layers.len() {
            return Err(Error::contract("cache does not match network depth"));
        }
        let last = cache.outputs.last().expect("non-empty network");
        if grad_output.shape() != last.shape() {
            return Err(Error::contract(format!(
                "grad_output shape {:?} does not match cached output {:?}",
                grad_output.shape(),
                last.shape()
            )));
        }

        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.clone();

        for (idx, layer) in self.layers.iter().enumerate().rev() {
            if cache.inputs[idx].nrows() != layer.input_dim() {
                return Err(Error::contract("cache layer shape does not match network"));
            }
            let pre = &cache.pre_activation[idx];
            let out = &cache.outputs[idx];

            // Through the activation.
            let mut d_pre = g.clone();
            for j in 0..d_pre.ncols() {
                for i in 0..d_pre.nrows() {
                    d_pre[(i, j)] *= layer.activation.derivative(pre[(i, j)], out[(i, j)]);
                }
            }

            // Through the norm stage when present.
            let (d_affine, norm_grads) = match &layer.norm {
                Some(norm) => {
                    let x_tilde = cache.normalized[idx].as_ref().expect("norm cached");
                    let inv_std = cache.inv_std[idx].as_ref().expect("norm cached");
                    let d = x_tilde.nrows() as f64;

                    let mut d_scale = DVector::zeros(norm.scale.len());
                    let mut d_shift = DVector::zeros(norm.shift.len());
                    for j in 0..d_pre.ncols() {
                        for i in 0..d_pre.nrows() {
                            d_scale[i] += d_pre[(i, j)] * x_tilde[(i, j)];
                            d_shift[i] += d_pre[(i, j)];
                        }
                    }

                    let mut d_affine = DMatrix::zeros(d_pre.nrows(), d_pre.ncols());
                    for j in 0..d_pre.ncols() {
                        // dx̃ = dS ⊙ α, then the standard layer-norm pullback
                        // for population statistics.
                        let mut mean_dx = 0.0;
                        let mut mean_dx_x = 0.0;
                        for i in 0..d_pre.nrows() {
                            let dx = d_pre[(i, j)] * norm.scale[i];
                            mean_dx += dx;
                            mean_dx_x += dx * x_tilde[(i, j)];
                        }
                        mean_dx /= d;
                        mean_dx_x /= d;
                        for i in 0..d_pre.nrows() {
                            let dx = d_pre[(i, j)] * norm.scale[i];
                            d_affine[(i, j)] =
                                inv_std[j] * (dx - mean_dx - x_tilde[(i, j)] * mean_dx_x);
                        }
                    }
                    (d_affine, Some((d_scale, d_shift)))
                }
                None => (d_pre, None),
            };

            // Through the affine map.
            let input = &cache.inputs[idx];
            let d_weight = &d_affine * input.transpose();
            let d_bias = DVector::from_fn(d_affine.nrows(), |i, _| d_affine.row(i).sum());
            g = layer.weight.transpose() * &d_affine;

            grads.push(LayerGrads {
                weight: d_weight,
                bias: d_bias,
                norm: norm_grads,
            });
        }

        grads.reverse();
        Ok((NetGrads { layers: grads }, g))
    }

    /// All parameters as one flat vector (layer by layer: weight, bias,
    /// norm scale, norm shift). The companion of [`assign_from_flat`] and
    /// the layout shared by [`NetGrads::flatten`].
    pub fn flatten(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
            if let Some(norm) = &layer.norm {
                out.extend(norm.scale.iter());
                out.extend(norm.shift.iter());
            }
        }
        DVector::from_vec(out)
    }

    pub fn assign_from_flat(&mut self, flat: &DVector<f64>) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "flat vector has {} entries, network has {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut k = 0;
        for layer in &mut self.layers {
            for w in layer.weight.iter_mut() {
                *w = flat[k];
                k += 1;
            }
            for b in layer.bias.iter_mut() {
                *b = flat[k];
                k += 1;
            }
            if let Some(norm) = &mut layer.norm {
                for s in norm.scale.iter_mut() {
                    *s = flat[k];
                    k += 1;
                }
                for s in norm.shift.iter_mut() {
                    *s = flat[k];
                    k += 1;
                }
            }
        }
        Ok(())
    }
}

impl NetGrads {
    pub fn flatten(&self) -> DVector<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
            if let Some((scale, shift)) = &layer.norm {
                out.extend(scale.iter());
                out.extend(shift.iter());
            }
        }
        DVector::from_vec(out)
    }
}

/// The layer-norm map on one vector: `ẑ_i = α_i (z_i - μ)/sqrt(σ² + ε) + δ_i`
/// with population mean and variance over the vector's entries.
pub fn layer_norm(z: &DVector<f64>, alpha: &DVector<f64>, delta: &DVector<f64>, eps_z: f64) -> DVector<f64> {
    let d = z.len() as f64;
    let mean = z.sum() / d;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d;
    let inv_std = 1.0 / (var + eps_z).sqrt();
    DVector::from_fn(z.len(), |i, _| alpha[i] * (z[i] - mean) * inv_std + delta[i])
}

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }
}

/// One Adam update in place.
pub fn adam_step(params: &mut DVector<f64>, grads: &DVector<f64>, state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Dimension("parameter, gradient and moment shapes must agree".into()));
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.first_moment[i] / bc1;
        let v_hat = state.second_moment[i] / bc2;
        params[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Global-norm gradient clipping: when the L2 norm of the whole vector
/// exceeds the threshold, every entry is rescaled by `threshold / norm`.
/// Returns the pre-clip norm.
pub fn clip_global(grads: &mut DVector<f64>, threshold: f64) -> Result<f64> {
    if threshold <= 0.0 {
        return Err(Error::parameter("clip threshold must be positive"));
    }
    let norm = grads.norm();
    if norm > threshold {
        *grads *= threshold / norm;
    }
    Ok(norm)
}
