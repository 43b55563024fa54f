//! Dense feed-forward networks with hand-written backpropagation and Adam.
//!
//! Layers store weights row-major as `[out][in]`. Batched passes go through
//! `matrixmultiply::dgemm`; a single sample is a batch of one, so there is
//! exactly one code path for every shape.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract, ensure_dim, Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => libm::tanh(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl NetworkSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        let spec = NetworkSpec {
            layer_sizes,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `input -> hidden... -> output` with relu hidden layers.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, output_activation: Activation) -> Self {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(input);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(output);
        NetworkSpec {
            layer_sizes,
            hidden_activation: Activation::Relu,
            output_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(contract!(
                "network needs at least an input and an output layer, got {} sizes",
                self.layer_sizes.len()
            ));
        }
        if let Some(i) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(contract!("layer size {i} is zero"));
        }
        if self.hidden_activation == Activation::Identity && self.layer_sizes.len() > 2 {
            return Err(contract!("hidden activation must be relu or tanh"));
        }
        if self.output_activation == Activation::Relu {
            return Err(contract!("output activation must be identity or tanh"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Weights and biases of one affine layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `[outputs][inputs]`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }
}

/// Row-major batch of equally sized vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Batch {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Batch {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<'a, I>(cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            ensure_dim("batch row", cols, row.len())?;
            data.extend_from_slice(row);
            n += 1;
        }
        Ok(Batch {
            rows: n,
            cols,
            data,
        })
    }

    pub fn single(row: &[f64]) -> Self {
        Batch {
            rows: 1,
            cols: row.len(),
            data: row.to_vec(),
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// Parameters of a dense network together with its architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
}

/// Per-layer `d loss / d parameter`, shape-congruent with a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// Output of a backward pass: parameter gradients plus the gradient with
/// respect to every input row.
#[derive(Debug, Clone, PartialEq)]
pub struct Backprop {
    pub params: Gradients,
    pub input: Batch,
}

/// Activations retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[l + 1]` is layer `l`'s output.
    activations: Vec<Batch>,
    pre_activations: Vec<Batch>,
}

impl ForwardCache {
    pub fn output(&self) -> &Batch {
        self.activations.last().expect("cache has at least the input")
    }
}

/// `c = a · b` for row/column-strided operands; `c` is overwritten.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(c.len() >= m * n);
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above bound every element the kernel touches.
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
            n as isize,
            1,
        );
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite(alloc::format!("{what}[{i}] = {}", values[i]))),
    }
}

impl Network {
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Network { spec, layers })
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init(spec: NetworkSpec, rng: &mut Stream) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for layer in &mut net.layers {
            let bound = 1.0 / libm::sqrt(layer.inputs as f64);
            for w in &mut layer.weights {
                *w = rng.uniform(-bound, bound);
            }
            for b in &mut layer.biases {
                *b = rng.uniform(-bound, bound);
            }
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_batch(&Batch::single(input))?;
        Ok(cache.activations.last().expect("nonempty").data.clone())
    }

    pub fn forward_batch(&self, input: &Batch) -> Result<ForwardCache> {
        ensure_dim("network input", self.input_dim(), input.cols)?;
        check_finite(&input.data, "network input")?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let x = activations.last().expect("nonempty");
            let mut z = Batch::zeros(x.rows, layer.outputs);
            gemm(
                x.rows,
                layer.inputs,
                layer.outputs,
                &x.data,
                x.cols,
                1,
                &layer.weights,
                1,
                layer.inputs,
                &mut z.data,
                false,
            );
            for row in z.data.chunks_exact_mut(layer.outputs) {
                for (v, b) in row.iter_mut().zip(&layer.biases) {
                    *v += b;
                }
            }
            let act = self.spec.activation(l);
            let a = Batch {
                rows: z.rows,
                cols: z.cols,
                data: z.data.iter().map(|&v| act.apply(v)).collect(),
            };
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
        })
    }

    /// Gradients of `output · output_grad` for a single sample.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<Backprop> {
        let cache = self.forward_batch(&Batch::single(input))?;
        self.backward_batch(&cache, &Batch::single(output_grad))
    }

    /// Gradients of `sum_b output[b] · output_grad[b]` over the cached batch.
    pub fn backward_batch(&self, cache: &ForwardCache, output_grad: &Batch) -> Result<Backprop> {
        let rows = cache.activations[0].rows;
        ensure_dim("output gradient width", self.output_dim(), output_grad.cols)?;
        ensure_dim("output gradient rows", rows, output_grad.rows)?;
        let mut grads = Gradients::zeros_like(self);
        let mut delta = output_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let act = self.spec.activation(l);
            let z = &cache.pre_activations[l];
            let a = &cache.activations[l + 1];
            for ((d, &zv), &av) in delta.data.iter_mut().zip(&z.data).zip(&a.data) {
                *d *= act.derivative(zv, av);
            }
            let x = &cache.activations[l];
            let g = &mut grads.layers[l];
            // dW = delta^T · x
            gemm(
                layer.outputs,
                rows,
                layer.inputs,
                &delta.data,
                1,
                layer.outputs,
                &x.data,
                x.cols,
                1,
                &mut g.weights,
                false,
            );
            for row in delta.data.chunks_exact(layer.outputs) {
                for (gb, d) in g.biases.iter_mut().zip(row) {
                    *gb += d;
                }
            }
            // dx = delta · W
            let mut dx = Batch::zeros(rows, layer.inputs);
            gemm(
                rows,
                layer.outputs,
                layer.inputs,
                &delta.data,
                layer.outputs,
                1,
                &layer.weights,
                layer.inputs,
                1,
                &mut dx.data,
                false,
            );
            delta = dx;
        }
        Ok(Backprop {
            params: grads,
            input: delta,
        })
    }

    /// `self ← (1 - tau)·self + tau·live`, component-wise.
    pub fn soft_update_from(&mut self, live: &Network, tau: f64) -> Result<()> {
        if self.spec != live.spec {
            return Err(contract!("soft update between different architectures"));
        }
        for (t, l) in self.layers.iter_mut().zip(&live.layers) {
            for (tv, lv) in t.weights.iter_mut().zip(&l.weights) {
                *tv = (1.0 - tau) * *tv + tau * lv;
            }
            for (tv, lv) in t.biases.iter_mut().zip(&l.biases) {
                *tv = (1.0 - tau) * *tv + tau * lv;
            }
        }
        Ok(())
    }

    /// Layer-by-layer weights then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.spec.parameter_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn from_flat(spec: NetworkSpec, flat: &[f64]) -> Result<Self> {
        ensure_dim("flat parameter vector", spec.parameter_count(), flat.len())?;
        let mut net = Self::zeros(spec)?;
        let mut offset = 0;
        for layer in &mut net.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(net)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Largest absolute component-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &Network) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b)))
    }
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|v| *v *= factor);
            layer.biases.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|&v| v == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment estimates for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    /// Flattened in [`Network::to_flat`] order.
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Result<Self> {
        let c = &config;
        let valid = c.learning_rate > 0.0
            && c.beta1 > 0.0
            && c.beta1 < 1.0
            && c.beta2 > 0.0
            && c.beta2 < 1.0
            && c.epsilon > 0.0;
        if !valid {
            return Err(contract!("invalid Adam configuration {c:?}"));
        }
        let n = net.spec.parameter_count();
        Ok(AdamState {
            config,
            step_count: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        })
    }

    /// One bias-corrected Adam step. Gradients are validated before any
    /// state is touched, so a rejected step leaves everything unchanged.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        ensure_dim("gradient layer count", net.layers.len(), grads.layers.len())?;
        ensure_dim(
            "Adam moment length",
            net.spec.parameter_count(),
            self.first_moment.len(),
        )?;
        for (i, (p, g)) in net.layers.iter().zip(&grads.layers).enumerate() {
            if p.weights.len() != g.weights.len() || p.biases.len() != g.biases.len() {
                return Err(contract!("gradient shape mismatch in layer {i}"));
            }
            check_finite(&g.weights, &alloc::format!("layer {i} weight gradient"))?;
            check_finite(&g.biases, &alloc::format!("layer {i} bias gradient"))?;
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as f64;
        let correction1 = 1.0 - libm::pow(beta1, t);
        let correction2 = 1.0 - libm::pow(beta2, t);

        let params = net
            .layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()));
        let gradients = grads
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()));
        for (((p, &g), m), v) in params
            .zip(gradients)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(w: f64, b: f64) -> Network {
        let spec = NetworkSpec::new(vec![1, 1], Activation::Relu, Activation::Identity).unwrap();
        let mut net = Network::zeros(spec).unwrap();
        net.layers[0].weights[0] = w;
        net.layers[0].biases[0] = b;
        net
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = NetworkSpec::mlp(3, &[5, 4], 2, Activation::Identity);
        let net = Network::zeros(spec).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn affine_forward() {
        assert_eq!(affine(2.0, 1.0).forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn relu_clamps_hidden_unit() {
        let spec = NetworkSpec::mlp(1, &[1], 1, Activation::Identity);
        let mut net = Network::zeros(spec).unwrap();
        net.layers[0].weights[0] = 1.0;
        net.layers[0].biases[0] = -5.0;
        net.layers[1].weights[0] = 1.0;
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = affine(1.0, 0.0);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Contract(_))));
        assert!(matches!(net.forward(&[f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(NetworkSpec::new(vec![3], Activation::Relu, Activation::Identity).is_err());
        assert!(NetworkSpec::new(vec![3, 0, 1], Activation::Relu, Activation::Identity).is_err());
    }

    #[test]
    fn backward_affine() {
        let bp = affine(2.0, 1.0).backward(&[3.0], &[1.0]).unwrap();
        assert_eq!(bp.params.layers[0].weights, vec![3.0]);
        assert_eq!(bp.params.layers[0].biases, vec![1.0]);
        assert_eq!(bp.input.data, vec![2.0]);
    }

    #[test]
    fn backward_zero_seed_gives_zero_gradients() {
        let spec = NetworkSpec::mlp(3, &[6, 6], 2, Activation::Tanh);
        let net = Network::init(spec, &mut Stream::new(3, "init")).unwrap();
        let bp = net.backward(&[0.3, -0.1, 2.0], &[0.0, 0.0]).unwrap();
        assert!(bp.params.is_zero());
        assert!(bp.input.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_shape_mismatch() {
        let net = affine(1.0, 0.0);
        assert!(matches!(net.backward(&[1.0], &[1.0, 1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters() {
        let mut net = affine(0.7, -0.2);
        let before = net.clone();
        let mut adam = AdamState::new(&net, AdamConfig::default()).unwrap();
        adam.step(&mut net, &Gradients::zeros_like(&before)).unwrap();
        assert_eq!(net, before);
        assert_eq!(adam.step_count, 1);
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        // m̂ = g, v̂ = g², so Δ = -lr·g/(|g| + ε) ≈ -lr·sign(g).
        let mut net = affine(0.0, 0.0);
        let mut adam = AdamState::new(
            &net,
            AdamConfig {
                learning_rate: 0.1,
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
        )
        .unwrap();
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].weights[0] = 0.5;
        adam.step(&mut net, &g).unwrap();
        let p = net.layers[0].weights[0];
        assert!((p + 0.1).abs() < 1e-8, "{p}");
        // Second identical step keeps moving in -sign(g).
        adam.step(&mut net, &g).unwrap();
        let p2 = net.layers[0].weights[0];
        assert!(p2 < p);
        assert!((p2 + 0.2).abs() < 1e-7, "{p2}");
    }

    #[test]
    fn adam_rejects_non_finite_naming_layer() {
        let spec = NetworkSpec::mlp(2, &[3], 1, Activation::Identity);
        let mut net = Network::zeros(spec).unwrap();
        let before = net.clone();
        let mut adam = AdamState::new(&net, AdamConfig::default()).unwrap();
        let mut g = Gradients::zeros_like(&net);
        g.layers[1].biases[0] = f64::INFINITY;
        let err = adam.step(&mut net, &g).unwrap_err();
        assert!(alloc::format!("{err}").contains("layer 1"));
        assert_eq!(net, before);
        assert_eq!(adam.step_count, 0);
    }

    #[test]
    fn flat_round_trip_and_soft_update() {
        let spec = NetworkSpec::mlp(2, &[4], 3, Activation::Tanh);
        let live = Network::init(spec.clone(), &mut Stream::new(1, "a")).unwrap();
        let mut target = Network::init(spec.clone(), &mut Stream::new(2, "b")).unwrap();
        assert_eq!(Network::from_flat(spec, &live.to_flat()).unwrap(), live);
        let gap = target.max_abs_diff(&live);
        target.soft_update_from(&live, 0.25).unwrap();
        assert!(target.max_abs_diff(&live) <= 0.75 * gap + 1e-15);
    }
}
