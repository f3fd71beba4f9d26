use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

/// A trainable matrix with its gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StoredParameter", into = "StoredParameter")]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Parameter::new(name, Matrix::zeros(rows, cols))
    }

    /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init.
    pub fn fan_in_uniform<R: Rng + ?Sized>(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Parameter::new(name, Matrix::uniform(rows, cols, bound, rng))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Serialize, Deserialize)]
struct StoredParameter {
    name: String,
    value: Matrix,
}

impl From<StoredParameter> for Parameter {
    fn from(p: StoredParameter) -> Self {
        Parameter::new(p.name, p.value)
    }
}

impl From<Parameter> for StoredParameter {
    fn from(p: Parameter) -> Self {
        StoredParameter {
            name: p.name,
            value: p.value,
        }
    }
}

/// Anything that owns named parameters.
pub trait HasParameters {
    fn parameters(&self) -> Vec<&Parameter>;
    fn parameters_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }
}
