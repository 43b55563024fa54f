//! Finite-difference check of backpropagation against an independent,
//! loop-based forward pass.

use dai_core::numerics::{Activation, Batch, Network, NetworkSpec};
use dai_core::rng::Stream;

pub const H: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor so components that are zero up to rounding compare
/// on an absolute scale.
const FLOOR: f64 = 1e-6;

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Identity => x,
        Activation::Relu => x.max(0.0),
        Activation::Tanh => x.tanh(),
    }
}

/// Returns the outputs and the smallest |pre-activation| of any relu unit.
fn naive_forward(net: &Network, input: &[f64]) -> (Vec<f64>, f64) {
    let mut x = input.to_vec();
    let mut kink = f64::INFINITY;
    let last = net.layers.len() - 1;
    for (l, layer) in net.layers.iter().enumerate() {
        let a = if l == last {
            net.spec.output_activation
        } else {
            net.spec.hidden_activation
        };
        let mut y = vec![0.0; layer.outputs];
        for (o, out) in y.iter_mut().enumerate() {
            let mut z = layer.biases[o];
            for (i, xi) in x.iter().enumerate() {
                z += layer.weights[o * layer.inputs + i] * xi;
            }
            if a == Activation::Relu {
                kink = kink.min(z.abs());
            }
            *out = act(a, z);
        }
        x = y;
    }
    (x, kink)
}

fn objective(net: &Network, inputs: &[Vec<f64>], seeds: &[Vec<f64>]) -> f64 {
    inputs
        .iter()
        .zip(seeds)
        .map(|(x, g)| {
            let (y, _) = naive_forward(net, x);
            y.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn random_spec(rng: &mut Stream) -> NetworkSpec {
    let depth = 1 + rng.below(3);
    let mut sizes = vec![1 + rng.below(5)];
    for _ in 0..depth {
        sizes.push(1 + rng.below(6));
    }
    let hidden = [Activation::Relu, Activation::Tanh];
    let output = [Activation::Identity, Activation::Tanh];
    NetworkSpec::new(sizes, hidden[rng.below(2)], output[rng.below(2)]).unwrap()
}

pub struct OracleReport {
    pub networks: usize,
    pub components: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

/// Checks every parameter and input gradient of `networks` random networks.
pub fn run(networks: usize, seed: u64) -> OracleReport {
    let mut rng = Stream::new(seed, "gradient-oracle");
    let mut checked = 0;
    let mut components = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    while checked < networks {
        let net = Network::init(random_spec(&mut rng), &mut rng).unwrap();
        let rows = 1 + rng.below(3);
        let inputs: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..net.input_dim()).map(|_| rng.uniform(-2.0, 2.0)).collect())
            .collect();
        let seeds: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..net.output_dim()).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        // Finite differences are meaningless across a relu kink.
        if inputs.iter().any(|x| naive_forward(&net, x).1 < 1e-3) {
            continue;
        }

        let batch = Batch::from_rows(net.input_dim(), inputs.iter().map(Vec::as_slice)).unwrap();
        let cache = net.forward_batch(&batch).unwrap();
        for (r, x) in inputs.iter().enumerate() {
            let (y, _) = naive_forward(&net, x);
            for (a, b) in cache.output().row(r).iter().zip(&y) {
                if (a - b).abs() > 1e-12 * (1.0 + b.abs()) {
                    failures.push(format!("net {checked} forward {a} vs {b}"));
                }
            }
        }
        let grad_out = Batch::from_rows(net.output_dim(), seeds.iter().map(Vec::as_slice)).unwrap();
        let bp = net.backward_batch(&cache, &grad_out).unwrap();

        for l in 0..net.layers.len() {
            let n_w = net.layers[l].weights.len();
            for k in 0..n_w + net.layers[l].biases.len() {
                let perturbed = |delta: f64| {
                    let mut p = net.clone();
                    if k < n_w {
                        p.layers[l].weights[k] += delta;
                    } else {
                        p.layers[l].biases[k - n_w] += delta;
                    }
                    objective(&p, &inputs, &seeds)
                };
                let numeric = (perturbed(H) - perturbed(-H)) / (2.0 * H);
                let analytic = if k < n_w {
                    bp.params.layers[l].weights[k]
                } else {
                    bp.params.layers[l].biases[k - n_w]
                };
                let e = rel_err(analytic, numeric);
                worst = worst.max(e);
                components += 1;
                if e > TOLERANCE {
                    failures.push(format!("net {checked} layer {l} param {k}: {analytic} vs {numeric}"));
                }
            }
        }
        for r in 0..rows {
            for i in 0..net.input_dim() {
                let shifted = |delta: f64| {
                    let mut xs = inputs.clone();
                    xs[r][i] += delta;
                    objective(&net, &xs, &seeds)
                };
                let numeric = (shifted(H) - shifted(-H)) / (2.0 * H);
                let e = rel_err(bp.input.row(r)[i], numeric);
                worst = worst.max(e);
                components += 1;
                if e > TOLERANCE {
                    failures.push(format!("net {checked} input {r},{i}: {} vs {numeric}", bp.input.row(r)[i]));
                }
            }
        }
        checked += 1;
    }
    OracleReport {
        networks: checked,
        components,
        worst,
        failures,
    }
}
