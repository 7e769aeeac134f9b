use crate::network::ConvParams;
use crate::tensor::Tensor;
use crate::{ConvnetError, Result};

/// Velocity buffers congruent with the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<ConvParams>,
}

impl OptimizerState {
    pub fn new(params: &[ConvParams]) -> Self {
        let velocity = params
            .iter()
            .map(|p| ConvParams { weights: Tensor::zeros(p.weights.shape()), bias: vec![0.0; p.bias.len()] })
            .collect();
        OptimizerState { velocity }
    }
}

fn congruent(a: &[ConvParams], b: &[ConvParams]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x.weights.shape() == y.weights.shape() && x.bias.len() == y.bias.len())
}

fn step(w: &mut [f64], g: &[f64], v: &mut [f64], lr: f64, mu: f64) {
    for ((w, &g), v) in w.iter_mut().zip(g).zip(v) {
        *v = mu * *v - lr * g;
        *w += *v;
    }
}

/// Heavy-ball update: `v <- mu v - lr g`, `w <- w + v`.
pub fn sgd_momentum_step(
    params: &mut [ConvParams],
    grads: &[ConvParams],
    state: &mut OptimizerState,
    lr: f64,
    mu: f64,
) -> Result<()> {
    if !congruent(params, grads) || !congruent(params, &state.velocity) {
        return Err(ConvnetError::ShapeMismatch("parameters, gradients and velocity differ".into()));
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.velocity) {
        step(p.weights.data_mut(), g.weights.data(), v.weights.data_mut(), lr, mu);
        step(&mut p.bias, &g.bias, &mut v.bias, lr, mu);
    }
    Ok(())
}
