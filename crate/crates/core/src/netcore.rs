//! Dense multilayer perceptrons in double precision.
//!
//! Inputs are row-major batches (`batch x input_dim`). Weight matrices are
//! stored row-major as `outputs x inputs`, so the flat parameter order of a
//! layer is its weights followed by its biases, layer by layer. That order is
//! shared by [`Gradients`], [`AdamState`] and the checkpoint payload.

use std::sync::atomic::{AtomicU64, Ordering};

use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

pub const ACTOR_SHAPE: [usize; 4] = [8, 400, 300, 4];
pub const CRITIC_SHAPE: [usize; 4] = [12, 400, 300, 1];

/// Half-width of the uniform init used for the actor's output layer.
pub const ACTOR_OUTPUT_INIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    pub fn from_parts(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != inputs * outputs || biases.len() != outputs {
            return Err(Error::Shape(format!(
                "layer {inputs}->{outputs} expects {} weights and {outputs} biases, got {} and {}",
                inputs * outputs,
                weights.len(),
                biases.len()
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            biases,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Row-major `outputs x inputs`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// A feed-forward network. Every instance (including clones) has its own
/// identity and a version bumped on each parameter mutation, so a
/// [`ForwardCache`] can only be consumed by the exact parameters that made it.
#[derive(Debug)]
pub struct Mlp {
    layers: Vec<Layer>,
    id: u64,
    version: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: next_id(),
            version: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed next layer input {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        Ok(Self {
            layers,
            id: next_id(),
            version: 0,
        })
    }

    /// All-zero network with the given layer widths and activations.
    pub fn zeros(widths: &[usize], activations: &[Activation]) -> Result<Self> {
        if widths.len() != activations.len() + 1 {
            return Err(Error::Shape(format!(
                "{} widths need {} activations, got {}",
                widths.len(),
                widths.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Layer::zeros(w[0], w[1], act))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Layer widths, input first.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs && a.activation == b.activation)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        self.version += 1;
        Ok(())
    }

    fn locate(&self, mut index: usize) -> Option<(usize, bool, usize)> {
        for (li, l) in self.layers.iter().enumerate() {
            if index < l.weights.len() {
                return Some((li, true, index));
            }
            index -= l.weights.len();
            if index < l.biases.len() {
                return Some((li, false, index));
            }
            index -= l.biases.len();
        }
        None
    }

    /// Parameter at a flat index.
    pub fn param(&self, index: usize) -> f64 {
        let (li, is_w, i) = self.locate(index).expect("parameter index out of range");
        let l = &self.layers[li];
        if is_w {
            l.weights[i]
        } else {
            l.biases[i]
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (li, is_w, i) = self.locate(index).expect("parameter index out of range");
        let l = &mut self.layers[li];
        if is_w {
            l.weights[i] = value;
        } else {
            l.biases[i] = value;
        }
        self.version += 1;
    }

    /// Visit every parameter of `self` together with the matching parameter
    /// of `other` (same flat order).
    pub fn zip_params_mut(&mut self, other: &Mlp, mut f: impl FnMut(&mut f64, f64)) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "network shapes differ: {:?} vs {:?}",
                self.widths(),
                other.widths()
            )));
        }
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            for (d, &s) in dst.weights.iter_mut().zip(&src.weights) {
                f(d, s);
            }
            for (d, &s) in dst.biases.iter_mut().zip(&src.biases) {
                f(d, s);
            }
        }
        self.version += 1;
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Forward pass over `batch` rows of `input`.
    pub fn forward(&self, input: &[f64], batch: usize) -> Result<ForwardCache> {
        let in_dim = self.input_dim();
        if batch == 0 || input.len() != batch * in_dim {
            return Err(Error::Shape(format!(
                "input of length {} is not a batch of {batch} x {in_dim}",
                input.len()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.layers {
            let x = activations.last().expect("input pushed");
            let mut z = Vec::with_capacity(batch * layer.outputs);
            for _ in 0..batch {
                z.extend_from_slice(&layer.biases);
            }
            // z (B x out) += x (B x in) * W^T (in x out)
            gemm(
                batch,
                layer.inputs,
                layer.outputs,
                x,
                (layer.inputs, 1),
                &layer.weights,
                (1, layer.inputs),
                1.0,
                &mut z,
                (layer.outputs, 1),
            );
            if layer.activation != Activation::Linear {
                for v in &mut z {
                    *v = layer.activation.apply(*v);
                }
            }
            activations.push(z);
        }
        Ok(ForwardCache {
            net_id: self.id,
            version: self.version,
            batch,
            activations,
        })
    }

    /// Convenience forward returning only the output rows.
    pub fn predict(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.forward(input, batch)?.into_output())
    }

    fn check_cache(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<()> {
        if cache.net_id != self.id || cache.version != self.version {
            return Err(Error::Contract(
                "forward cache does not belong to the current parameters".into(),
            ));
        }
        if grad_output.len() != cache.batch * self.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient of length {} for batch {} x {}",
                grad_output.len(),
                cache.batch,
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Reverse pass for the scalar `sum(output * grad_output)`: gradients with
    /// respect to every parameter and to the input batch.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        self.check_cache(cache, grad_output)?;
        let (grads, dx) = self.reverse(cache, grad_output, true);
        Ok((grads.expect("parameter gradients requested"), dx))
    }

    /// Reverse pass returning only the input gradient.
    pub fn input_gradient(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<Vec<f64>> {
        self.check_cache(cache, grad_output)?;
        Ok(self.reverse(cache, grad_output, false).1)
    }

    fn reverse(&self, cache: &ForwardCache, grad_output: &[f64], params: bool) -> (Option<Gradients>, Vec<f64>) {
        let batch = cache.batch;
        let mut layer_grads = Vec::with_capacity(if params { self.layers.len() } else { 0 });
        let mut delta = grad_output.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[li + 1];
            let x = &cache.activations[li];
            if layer.activation != Activation::Linear {
                for (d, &yv) in delta.iter_mut().zip(y) {
                    *d *= layer.activation.derivative_from_output(yv);
                }
            }
            if params {
                // dW (out x in) = delta^T (out x B) * x (B x in)
                let mut dw = vec![0.0; layer.outputs * layer.inputs];
                gemm(
                    layer.outputs,
                    batch,
                    layer.inputs,
                    &delta,
                    (1, layer.outputs),
                    x,
                    (layer.inputs, 1),
                    0.0,
                    &mut dw,
                    (layer.inputs, 1),
                );
                let mut db = vec![0.0; layer.outputs];
                for row in delta.chunks_exact(layer.outputs) {
                    for (b, d) in db.iter_mut().zip(row) {
                        *b += d;
                    }
                }
                layer_grads.push(LayerGrad {
                    weights: dw,
                    biases: db,
                });
            }
            // dx (B x in) = delta (B x out) * W (out x in)
            let mut dx = vec![0.0; batch * layer.inputs];
            gemm(
                batch,
                layer.outputs,
                layer.inputs,
                &delta,
                (layer.outputs, 1),
                &layer.weights,
                (layer.inputs, 1),
                0.0,
                &mut dx,
                (layer.inputs, 1),
            );
            delta = dx;
        }
        let grads = params.then(|| {
            layer_grads.reverse();
            Gradients { layers: layer_grads }
        });
        (grads, delta)
    }
}

/// `c = beta * c + a * b` with explicit (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    debug_assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    debug_assert!(m == 0 || n == 0 || c.len() > (m - 1) * rsc + (n - 1) * csc);
    // SAFETY: the strides and extents above address only elements inside the
    // three slices, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Per-layer activations recorded by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    net_id: u64,
    version: u64,
    batch: usize,
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("non-empty")
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.activations.pop().expect("non-empty")
    }

    /// Post-activation values of layer `i` (0 is the input).
    pub fn activation(&self, i: usize) -> &[f64] {
        &self.activations[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Parameter gradients laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|g| *g *= k);
        }
    }

    fn matches(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }
}

fn glorot_layer<R: rand::Rng + ?Sized>(
    inputs: usize,
    outputs: usize,
    act: Activation,
    with_biases: bool,
    rng: &mut R,
) -> Layer {
    let std = (2.0 / (inputs + outputs) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let mut layer = Layer::zeros(inputs, outputs, act);
    for w in &mut layer.weights {
        *w = normal.sample(rng);
    }
    if with_biases {
        for b in &mut layer.biases {
            *b = normal.sample(rng);
        }
    }
    layer
}

/// Policy network 8 -> 400 -> 300 -> 4 (relu, relu, tanh). Hidden weights are
/// Glorot-normal with zero biases; the output layer is drawn from a small
/// uniform so initial actions are close to zero.
pub fn init_actor<R: rand::Rng + ?Sized>(rng: &mut R) -> Mlp {
    init_actor_with(rng, false)
}

/// [`init_actor`] with Glorot-normal hidden biases when `glorot_biases`.
pub fn init_actor_with<R: rand::Rng + ?Sized>(rng: &mut R, glorot_biases: bool) -> Mlp {
    let [i, h1, h2, o] = ACTOR_SHAPE;
    let l1 = glorot_layer(i, h1, Activation::Relu, glorot_biases, rng);
    let l2 = glorot_layer(h1, h2, Activation::Relu, glorot_biases, rng);
    let mut out = Layer::zeros(h2, o, Activation::Tanh);
    let uni = Uniform::new_inclusive(-ACTOR_OUTPUT_INIT, ACTOR_OUTPUT_INIT);
    for p in out.weights.iter_mut().chain(out.biases.iter_mut()) {
        *p = uni.sample(rng);
    }
    Mlp::new(vec![l1, l2, out]).expect("static shape")
}

/// Q network 12 -> 400 -> 300 -> 1 (relu, relu, linear), Glorot-normal
/// weights everywhere, zero biases. Input is state followed by action.
pub fn init_critic<R: rand::Rng + ?Sized>(rng: &mut R) -> Mlp {
    init_critic_with(rng, false)
}

pub fn init_critic_with<R: rand::Rng + ?Sized>(rng: &mut R, glorot_biases: bool) -> Mlp {
    let [i, h1, h2, o] = CRITIC_SHAPE;
    Mlp::new(vec![
        glorot_layer(i, h1, Activation::Relu, glorot_biases, rng),
        glorot_layer(h1, h2, Activation::Relu, glorot_biases, rng),
        glorot_layer(h2, o, Activation::Linear, glorot_biases, rng),
    ])
    .expect("static shape")
}

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        let n = net.param_count();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// One bias-corrected Adam descent step.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if !grads.matches(net) || state.m.len() != net.param_count() || state.v.len() != net.param_count() {
        return Err(Error::Shape(
            "gradient or optimizer state does not match network".into(),
        ));
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let mut k = 0;
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
        let gs = g.weights.iter().chain(&g.biases);
        for (p, &gi) in params.zip(gs) {
            let m = b1 * state.m[k] + (1.0 - b1) * gi;
            let v = b2 * state.v[k] + (1.0 - b2) * gi * gi;
            state.m[k] = m;
            state.v[k] = v;
            let m_hat = m / c1;
            let v_hat = v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
            k += 1;
        }
    }
    net.version += 1;
    Ok(())
}

/// Plain gradient descent step.
pub fn sgd_step(net: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
    if !grads.matches(net) {
        return Err(Error::Shape("gradient does not match network".into()));
    }
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        for (p, gi) in layer.weights.iter_mut().zip(&g.weights) {
            *p -= lr * gi;
        }
        for (p, gi) in layer.biases.iter_mut().zip(&g.biases) {
            *p -= lr * gi;
        }
    }
    net.version += 1;
    Ok(())
}

/// Descent step with the configured optimizer.
pub fn optimizer_step(
    kind: OptimizerKind,
    net: &mut Mlp,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    match kind {
        OptimizerKind::Adam => adam_step(net, grads, state, lr),
        OptimizerKind::Sgd => {
            state.t += 1;
            sgd_step(net, grads, lr)
        }
    }
}
