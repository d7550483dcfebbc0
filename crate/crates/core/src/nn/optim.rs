use super::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerMode {
    /// Plain gradient descent: `w -= lr * g`.
    Sgd,
    /// Adaptive moment estimation with bias correction.
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub mode: OptimizerMode,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    pub first_moment: Gradients,
    pub second_moment: Gradients,
}

impl OptimizerState {
    pub fn adam(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            mode: OptimizerMode::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
        }
    }

    pub fn sgd(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            mode: OptimizerMode::Sgd,
            ..Self::adam(net, learning_rate)
        }
    }
}

fn check_shapes(net: &Mlp, grads: &Gradients) -> Result<()> {
    if grads.weights.len() != net.layers().len() || grads.biases.len() != net.layers().len() {
        return Err(Error::Shape {
            context: "gradient layer count",
            expected: net.layers().len(),
            actual: grads.weights.len(),
        });
    }
    for (l, layer) in net.layers().iter().enumerate() {
        if grads.weights[l].len() != layer.weights.len() {
            return Err(Error::Shape {
                context: "weight gradient",
                expected: layer.weights.len(),
                actual: grads.weights[l].len(),
            });
        }
        if grads.biases[l].len() != layer.biases.len() {
            return Err(Error::Shape {
                context: "bias gradient",
                expected: layer.biases.len(),
                actual: grads.biases[l].len(),
            });
        }
    }
    Ok(())
}

/// Applies one descent step. Nothing is modified if the gradients are
/// malformed or contain non-finite values.
pub fn optimizer_step(net: &mut Mlp, grads: &Gradients, state: &mut OptimizerState) -> Result<()> {
    check_shapes(net, grads)?;
    check_shapes(net, &state.first_moment)?;
    check_shapes(net, &state.second_moment)?;
    for l in 0..grads.weights.len() {
        if !grads.weights[l]
            .iter()
            .chain(&grads.biases[l])
            .all(|g| g.is_finite())
        {
            return Err(Error::NonFiniteGradient { layer: l });
        }
    }

    state.step_count += 1;
    let lr = state.learning_rate;
    match state.mode {
        OptimizerMode::Sgd => {
            for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                for (w, g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
                    *w -= lr * g;
                }
                for (b, g) in layer.biases.iter_mut().zip(&grads.biases[l]) {
                    *b -= lr * g;
                }
            }
        }
        OptimizerMode::Adam => {
            let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
            let t = state.step_count as i32;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
                let g = grads.weights[l].iter().chain(&grads.biases[l]);
                let m = state.first_moment.weights[l]
                    .iter_mut()
                    .chain(state.first_moment.biases[l].iter_mut());
                let v = state.second_moment.weights[l]
                    .iter_mut()
                    .chain(state.second_moment.biases[l].iter_mut());
                for (((p, &g), m), v) in params.zip(g).zip(m).zip(v) {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}
