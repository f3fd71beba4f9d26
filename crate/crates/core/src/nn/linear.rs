use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HasParameters, Parameter};
use crate::error::{Error, Result};

/// Fully-connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(name: &str, input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        Linear {
            weight: Parameter::fan_in_uniform(
                format!("{name}.weight"),
                output_dim,
                input_dim,
                input_dim,
                rng,
            ),
            bias: Parameter::fan_in_uniform(format!("{name}.bias"), output_dim, 1, input_dim, rng),
        }
    }

    pub fn zeros(name: &str, input_dim: usize, output_dim: usize) -> Self {
        Linear {
            weight: Parameter::zeros(format!("{name}.weight"), output_dim, input_dim),
            bias: Parameter::zeros(format!("{name}.bias"), output_dim, 1),
        }
    }

    pub fn from_parts(weight: Parameter, bias: Parameter) -> Result<Self> {
        if bias.value.shape() != (weight.value.rows(), 1) {
            return Err(Error::shape(format!(
                "bias {:?} does not match weight {:?}",
                bias.value.shape(),
                weight.value.shape()
            )));
        }
        Ok(Linear { weight, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.weight.value.matvec(input)?;
        for (o, b) in out.iter_mut().zip(self.bias.value.as_slice()) {
            *o += b;
        }
        Ok(out)
    }

    /// Accumulates `dL/dW` and `dL/db` for the given forward input and
    /// returns `dL/dx`.
    pub fn backward(&mut self, input: &[f64], d_out: &[f64]) -> Vec<f64> {
        self.weight.grad.add_outer(d_out, input);
        self.bias.grad.add_assign(d_out);
        let mut d_in = vec![0.0; input.len()];
        self.weight.value.add_transpose_matvec(d_out, &mut d_in);
        d_in
    }
}

impl HasParameters for Linear {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Free-function form of [`Linear::forward`].
pub fn linear_forward(input: &[f64], weights: &Parameter, bias: &Parameter) -> Result<Vec<f64>> {
    if bias.value.shape() != (weights.value.rows(), 1) {
        return Err(Error::shape(format!(
            "bias {:?} does not match weights {:?}",
            bias.value.shape(),
            weights.value.shape()
        )));
    }
    let mut out = weights.value.matvec(input)?;
    for (o, b) in out.iter_mut().zip(bias.value.as_slice()) {
        *o += b;
    }
    Ok(out)
}

pub(crate) fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// Gradient through ReLU given the pre-activation.
pub(crate) fn relu_backward(pre: &[f64], d_out: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(d_out)
        .map(|(&x, &d)| if x > 0.0 { d } else { 0.0 })
        .collect()
}
