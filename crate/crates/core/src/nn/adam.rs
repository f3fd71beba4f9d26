use serde::{Deserialize, Serialize};

use super::{Matrix, Parameter};
use crate::error::{Error, Result};

/// Adam optimizer state: one pair of moment accumulators per parameter,
/// in the order the parameters are passed to [`AdamState::update`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam step. Gradients are left in place.
    pub fn update(&mut self, params: &mut [&mut Parameter]) -> Result<()> {
        if self.first_moment.is_empty() && self.step == 0 {
            for p in params.iter() {
                let (r, c) = p.value.shape();
                self.first_moment.push(Matrix::zeros(r, c));
                self.second_moment.push(Matrix::zeros(r, c));
            }
        }
        if params.len() != self.first_moment.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        for (p, m) in params.iter().zip(&self.first_moment) {
            if p.value.shape() != m.shape() || p.grad.shape() != m.shape() {
                return Err(Error::shape(format!(
                    "parameter {} is {:?}, optimizer state is {:?}",
                    p.name,
                    p.value.shape(),
                    m.shape()
                )));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);

        for ((p, m), v) in params
            .iter_mut()
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            let grad = p.grad.as_slice().to_vec();
            let values = p.value.as_mut_slice();
            for (((theta, g), m), v) in values
                .iter_mut()
                .zip(&grad)
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn adam_update(params: &mut [&mut Parameter], state: &mut AdamState) -> Result<()> {
    state.update(params)
}
