//! Fully connected feed-forward networks with hand-written reverse mode,
//! Adam and global-norm gradient clipping.
//!
//! A layer computes `act(x Wᵀ + b)` on a batch `x` (one sample per row), with
//! `W` stored `out × in`. The ReLU derivative at exactly 0 is taken as 0.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, numerical, Result};
use crate::linalg::Matrix;
use crate::math::{powi, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone)]
pub struct MlpParams {
    layers: Vec<Layer>,
    seed: u64,
    // Bumped by every in-place update so that caches from older forward
    // passes are rejected by `backward`.
    generation: u64,
}

impl MlpParams {
    /// Assembles a network from explicit layers, checking that they chain.
    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid!("a network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim() == 0 || l.out_dim() == 0 {
                return Err(invalid!("layer {i} has a zero dimension"));
            }
            if l.bias.len() != l.out_dim() {
                return Err(invalid!(
                    "layer {i}: bias has {} entries, expected {}",
                    l.bias.len(),
                    l.out_dim()
                ));
            }
            if !l.weight.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(invalid!("layer {i} has non-finite parameters"));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(invalid!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                ));
            }
        }
        Ok(Self {
            layers,
            seed,
            generation: 0,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access invalidates outstanding forward caches.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer widths `[in, h1, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(Layer::out_dim));
        d
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.layers == other.layers
    }
}

/// Uniform fan-in initialisation `U(-1/√in, 1/√in)` for weights and biases,
/// drawn from a ChaCha8 stream seeded with `seed`.
pub fn init_params(dims: &[usize], activations: &[Activation], seed: u64) -> Result<MlpParams> {
    if dims.len() < 2 {
        return Err(invalid!("need at least two layer sizes, got {}", dims.len()));
    }
    if activations.len() != dims.len() - 1 {
        return Err(invalid!(
            "{} activations for {} layers",
            activations.len(),
            dims.len() - 1
        ));
    }
    if let Some(i) = dims.iter().position(|&d| d == 0) {
        return Err(invalid!("layer size {i} is zero"));
    }
    let mut rng = crate::rng::stream(seed, 0);
    let layers = dims
        .windows(2)
        .zip(activations)
        .map(|(w, &activation)| {
            let (fan_in, out) = (w[0], w[1]);
            let bound = 1.0 / sqrt(fan_in as f64);
            let mut draw = || loop {
                let v: f64 = rng.random_range(-bound..bound);
                if v != -bound {
                    break v;
                }
            };
            let weight: Vec<f64> = (0..out * fan_in).map(|_| draw()).collect();
            let bias: Vec<f64> = (0..out).map(|_| draw()).collect();
            Layer {
                weight: Matrix::from_vec(out, fan_in, weight).expect("sizes agree"),
                bias,
                activation,
            }
        })
        .collect();
    MlpParams::from_layers(layers, seed)
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    // inputs[l] is the input of layer l; pre[l] its pre-activation.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

pub fn forward(params: &MlpParams, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    if x.cols() != params.in_dim() {
        return Err(invalid!(
            "input has {} columns, network expects {}",
            x.cols(),
            params.in_dim()
        ));
    }
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut h = x.clone();
    for layer in &params.layers {
        let mut z = h.matmul_t(&layer.weight);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        let mut a = z.clone();
        if layer.activation == Activation::Relu {
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        inputs.push(h);
        pre.push(z);
        h = a;
    }
    if !h.is_finite() {
        return Err(numerical!("network output is not finite"));
    }
    Ok((
        h,
        ForwardCache {
            generation: params.generation,
            inputs,
            pre,
        },
    ))
}

/// Gradients shaped like the layers of an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: params.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.values().map(|g| g * g).sum()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .flat_map(|w| w.as_slice())
            .chain(self.biases.iter().flatten())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flat_map(|w| w.as_mut_slice().iter_mut())
            .chain(self.biases.iter_mut().flatten())
    }

    fn matches(&self, params: &MlpParams) -> bool {
        self.weights.len() == params.layers.len()
            && self.biases.len() == params.layers.len()
            && params.layers.iter().enumerate().all(|(i, l)| {
                self.weights[i].shape() == l.weight.shape() && self.biases[i].len() == l.out_dim()
            })
    }
}

/// Reverse pass: parameter gradients and the gradient w.r.t. the input.
pub fn backward(
    params: &MlpParams,
    cache: &ForwardCache,
    upstream: &Matrix,
) -> Result<(Gradients, Matrix)> {
    let n_layers = params.layers.len();
    if cache.generation != params.generation || cache.pre.len() != n_layers {
        return Err(invalid!("forward cache does not belong to these parameters"));
    }
    for (i, l) in params.layers.iter().enumerate() {
        if cache.inputs[i].cols() != l.in_dim() || cache.pre[i].cols() != l.out_dim() {
            return Err(invalid!("forward cache shapes disagree with layer {i}"));
        }
    }
    let batch = cache.inputs[0].rows();
    if upstream.shape() != (batch, params.out_dim()) {
        return Err(invalid!(
            "upstream gradient is {}x{}, expected {}x{}",
            upstream.rows(),
            upstream.cols(),
            batch,
            params.out_dim()
        ));
    }
    let mut weights = Vec::with_capacity(n_layers);
    let mut biases = Vec::with_capacity(n_layers);
    let mut delta = upstream.clone();
    for (l, layer) in params.layers.iter().enumerate().rev() {
        if layer.activation == Activation::Relu {
            for (d, z) in delta.as_mut_slice().iter_mut().zip(cache.pre[l].as_slice()) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        weights.push(delta.t_matmul(&cache.inputs[l]));
        let mut db = vec![0.0; layer.out_dim()];
        for row in delta.row_iter() {
            for (acc, v) in db.iter_mut().zip(row) {
                *acc += v;
            }
        }
        biases.push(db);
        delta = delta.matmul(&layer.weight);
    }
    weights.reverse();
    biases.reverse();
    Ok((Gradients { weights, biases }, delta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Gradients,
    pub second_moment: Gradients,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zero moments with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &MlpParams) -> Self {
        Self {
            first_moment: Gradients::zeros_like(params),
            second_moment: Gradients::zeros_like(params),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(invalid!("learning rate must be positive, got {lr}"));
    }
    if !grads.matches(params)
        || !state.first_moment.matches(params)
        || !state.second_moment.matches(params)
    {
        return Err(invalid!("gradient or optimizer state shapes do not match the network"));
    }
    state.step_count += 1;
    let t = state.step_count.min(i32::MAX as u64) as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - powi(b1, t);
    let c2 = 1.0 - powi(b2, t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (sqrt(v_hat) + eps);
    };
    for (l, layer) in params.layers.iter_mut().enumerate() {
        let g = grads.weights[l].as_slice();
        let m = state.first_moment.weights[l].as_mut_slice();
        let v = state.second_moment.weights[l].as_mut_slice();
        for (i, p) in layer.weight.as_mut_slice().iter_mut().enumerate() {
            update(p, g[i], &mut m[i], &mut v[i]);
        }
        let g = &grads.biases[l];
        let m = &mut state.first_moment.biases[l];
        let v = &mut state.second_moment.biases[l];
        for (i, p) in layer.bias.iter_mut().enumerate() {
            update(p, g[i], &mut m[i], &mut v[i]);
        }
    }
    params.generation += 1;
    if !params.is_finite() {
        return Err(numerical!("parameters became non-finite after Adam step {t}"));
    }
    Ok(())
}

/// Rescales every gradient in `grads` by a common factor so that their joint
/// L2 norm is at most `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [&mut Gradients], max_norm: f64) -> f64 {
    let norm = sqrt(grads.iter().map(|g| g.squared_norm()).sum::<f64>());
    if norm > max_norm && max_norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.values_mut().for_each(|v| *v *= s);
        }
    }
    norm
}
