//! Central finite-difference checks of backpropagated gradients.
//!
//! The loss is `0.5 * ||forward(x)||^2`. The numeric side only ever calls
//! [`Mlp::forward`], so it stays independent of the backward pass it checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Activation, Gradients, Mlp};
use crate::error::Result;

/// Gradient of `0.5 * ||y||^2` w.r.t. the parameters, for an injected routine.
pub type GradientFn = dyn Fn(&Mlp, &[f64]) -> Result<Gradients>;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

pub fn half_squared_norm_loss(net: &Mlp, input: &[f64]) -> Result<f64> {
    Ok(0.5 * net.forward(input)?.iter().map(|y| y * y).sum::<f64>())
}

/// The backpropagation route.
pub fn analytic_gradient(net: &Mlp, input: &[f64]) -> Result<Gradients> {
    let tape = net.forward_batch(input, 1)?;
    let upstream = tape.output().to_vec();
    Ok(net.backward(&tape, &upstream)?.0)
}

pub fn numeric_gradient(net: &Mlp, input: &[f64], h: f64) -> Result<Gradients> {
    let mut probe = net.clone();
    let mut grads = Gradients::zeros_like(net);
    for l in 0..net.layers().len() {
        for k in 0..net.layers()[l].weights.len() {
            grads.weights[l][k] = central_difference(&mut probe, input, h, |n| {
                &mut n.layers_mut()[l].weights[k]
            })?;
        }
        for k in 0..net.layers()[l].biases.len() {
            grads.biases[l][k] = central_difference(&mut probe, input, h, |n| {
                &mut n.layers_mut()[l].biases[k]
            })?;
        }
    }
    Ok(grads)
}

fn central_difference(
    net: &mut Mlp,
    input: &[f64],
    h: f64,
    param: impl Fn(&mut Mlp) -> &mut f64,
) -> Result<f64> {
    let original = *param(net);
    *param(net) = original + h;
    let plus = half_squared_norm_loss(net, input)?;
    *param(net) = original - h;
    let minus = half_squared_norm_loss(net, input)?;
    *param(net) = original;
    Ok((plus - minus) / (2.0 * h))
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn max_relative_error(a: &Gradients, b: &Gradients) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| relative_error(x, y))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub seed: u64,
    pub layer_sizes: Vec<usize>,
    pub output_activation: Activation,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub cases: Vec<GradCheckCase>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.cases
            .iter()
            .map(|c| c.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckCase> {
        self.cases
            .iter()
            .filter(move |c| !(c.max_relative_error < self.tolerance))
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// A random small network (all dims <= 8) and input for `seed`.
pub fn random_case(seed: u64) -> Result<(Mlp, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=8)];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=8));
    }
    let output = match rng.random_range(0..3) {
        0 => Activation::Identity,
        1 => Activation::Tanh,
        _ => Activation::Sigmoid,
    };
    let net = Mlp::new(&sizes, Activation::Relu, output, &mut rng)?;
    let input = (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
    Ok((net, input))
}

/// Checks `grad_fn` against central differences on `n_cases` random networks.
pub fn run_suite(
    n_cases: u64,
    h: f64,
    tolerance: f64,
    grad_fn: &GradientFn,
) -> Result<GradCheckReport> {
    let mut cases = Vec::with_capacity(n_cases as usize);
    for seed in 0..n_cases {
        let (net, input) = random_case(seed)?;
        let analytic = grad_fn(&net, &input)?;
        let numeric = numeric_gradient(&net, &input, h)?;
        cases.push(GradCheckCase {
            seed,
            layer_sizes: net.layer_sizes(),
            output_activation: net.output_activation(),
            max_relative_error: max_relative_error(&analytic, &numeric),
        });
    }
    Ok(GradCheckReport { tolerance, cases })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_three_one_net_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let x = [0.4, -0.7];
        let a = analytic_gradient(&net, &x).unwrap();
        let n = numeric_gradient(&net, &x, DEFAULT_STEP).unwrap();
        assert!(max_relative_error(&a, &n) < DEFAULT_TOLERANCE);
    }

    #[test]
    fn suite_passes_for_backprop() {
        let report = run_suite(25, DEFAULT_STEP, DEFAULT_TOLERANCE, &analytic_gradient).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_relative_error());
    }

    #[test]
    fn suite_detects_a_broken_gradient() {
        let broken = |net: &Mlp, x: &[f64]| {
            let mut g = analytic_gradient(net, x)?;
            g.scale(1.01);
            Ok(g)
        };
        let report = run_suite(5, DEFAULT_STEP, DEFAULT_TOLERANCE, &broken).unwrap();
        assert!(!report.passed());
    }
}
