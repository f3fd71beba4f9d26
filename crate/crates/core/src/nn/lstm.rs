use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::dot;
use super::{HasParameters, Matrix, Parameter};
use crate::error::{Error, Result};

/// One unidirectional LSTM layer. Each gate has its own weight matrix over
/// the concatenation `[x_t; h_{t-1}]` and its own bias column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_input: Parameter,
    pub w_forget: Parameter,
    pub w_cell: Parameter,
    pub w_output: Parameter,
    pub b_input: Parameter,
    pub b_forget: Parameter,
    pub b_cell: Parameter,
    pub b_output: Parameter,
}

#[derive(Debug, Clone)]
struct Step {
    z: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Forward-pass record of one layer, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    reversed: bool,
    /// Steps in processing order.
    steps: Vec<Step>,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn step_at(&self, position: usize) -> &Step {
        let n = self.steps.len();
        if self.reversed {
            &self.steps[n - 1 - position]
        } else {
            &self.steps[position]
        }
    }

    /// Hidden states in original sequence order.
    pub fn hidden_states(&self) -> Vec<Vec<f64>> {
        (0..self.steps.len()).map(|t| self.step_at(t).h.clone()).collect()
    }

    /// Cell states in original sequence order.
    pub fn cell_states(&self) -> Vec<Vec<f64>> {
        (0..self.steps.len()).map(|t| self.step_at(t).c.clone()).collect()
    }

    /// Hidden state after the last processed element.
    pub fn final_hidden(&self) -> &[f64] {
        &self.steps.last().expect("non-empty trace").h
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LstmLayerParams {
    /// Gate weights drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in));
    /// forget-gate bias starts at 1.
    pub fn new<R: Rng + ?Sized>(name: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let fan_in = input_dim + hidden_dim;
        let w = |gate: &str, rng: &mut R| {
            Parameter::fan_in_uniform(format!("{name}.w_{gate}"), hidden_dim, fan_in, fan_in, rng)
        };
        let w_input = w("input", rng);
        let w_forget = w("forget", rng);
        let w_cell = w("cell", rng);
        let w_output = w("output", rng);
        let mut b_forget = Parameter::zeros(format!("{name}.b_forget"), hidden_dim, 1);
        b_forget.value.fill(1.0);
        LstmLayerParams {
            input_dim,
            hidden_dim,
            w_input,
            w_forget,
            w_cell,
            w_output,
            b_input: Parameter::zeros(format!("{name}.b_input"), hidden_dim, 1),
            b_forget,
            b_cell: Parameter::zeros(format!("{name}.b_cell"), hidden_dim, 1),
            b_output: Parameter::zeros(format!("{name}.b_output"), hidden_dim, 1),
        }
    }

    pub fn zeros(name: &str, input_dim: usize, hidden_dim: usize) -> Self {
        let fan_in = input_dim + hidden_dim;
        let w = |gate: &str| Parameter::zeros(format!("{name}.w_{gate}"), hidden_dim, fan_in);
        let b = |gate: &str| Parameter::zeros(format!("{name}.b_{gate}"), hidden_dim, 1);
        LstmLayerParams {
            input_dim,
            hidden_dim,
            w_input: w("input"),
            w_forget: w("forget"),
            w_cell: w("cell"),
            w_output: w("output"),
            b_input: b("input"),
            b_forget: b("forget"),
            b_cell: b("cell"),
            b_output: b("output"),
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        let fan_in = self.input_dim + self.hidden_dim;
        for w in [&self.w_input, &self.w_forget, &self.w_cell, &self.w_output] {
            if w.value.shape() != (self.hidden_dim, fan_in) {
                return Err(Error::shape(format!(
                    "{} is {:?}, expected ({}, {fan_in})",
                    w.name,
                    w.value.shape(),
                    self.hidden_dim
                )));
            }
        }
        for b in [&self.b_input, &self.b_forget, &self.b_cell, &self.b_output] {
            if b.value.shape() != (self.hidden_dim, 1) {
                return Err(Error::shape(format!("{} is {:?}", b.name, b.value.shape())));
            }
        }
        Ok(())
    }

    fn gate(w: &Matrix, b: &Matrix, z: &[f64], act: fn(f64) -> f64) -> Vec<f64> {
        w.as_slice()
            .chunks_exact(z.len())
            .zip(b.as_slice())
            .map(|(row, bias)| act(dot(row, z) + bias))
            .collect()
    }

    /// Runs the recurrence from zero state. With `reversed` the sequence is
    /// consumed back to front; outputs are always reported in input order.
    pub fn forward(&self, sequence: &[Vec<f64>], reversed: bool) -> Result<LstmTrace> {
        if sequence.is_empty() {
            return Err(Error::EmptyInput("LSTM input sequence"));
        }
        let (n_in, n_h) = (self.input_dim, self.hidden_dim);
        let mut h = vec![0.0; n_h];
        let mut c = vec![0.0; n_h];
        let mut steps = Vec::with_capacity(sequence.len());
        let order: Box<dyn Iterator<Item = &Vec<f64>>> = if reversed {
            Box::new(sequence.iter().rev())
        } else {
            Box::new(sequence.iter())
        };
        for x in order {
            if x.len() != n_in {
                return Err(Error::shape(format!(
                    "LSTM input has length {}, layer expects {n_in}",
                    x.len()
                )));
            }
            let mut z = Vec::with_capacity(n_in + n_h);
            z.extend_from_slice(x);
            z.extend_from_slice(&h);
            let i = Self::gate(&self.w_input.value, &self.b_input.value, &z, sigmoid);
            let f = Self::gate(&self.w_forget.value, &self.b_forget.value, &z, sigmoid);
            let g = Self::gate(&self.w_cell.value, &self.b_cell.value, &z, f64::tanh);
            let o = Self::gate(&self.w_output.value, &self.b_output.value, &z, sigmoid);
            let c_prev = c;
            c = (0..n_h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|x| x.tanh()).collect();
            h = (0..n_h).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(Step {
                z,
                i,
                f,
                g,
                o,
                c_prev,
                c: c.clone(),
                tanh_c,
                h: h.clone(),
            });
        }
        Ok(LstmTrace { reversed, steps })
    }

    /// Backpropagation through time. `d_hidden[t]` is the loss gradient
    /// with respect to the hidden state at input position `t`; returns the
    /// gradient with respect to each input, in input order.
    pub fn backward(&mut self, trace: &LstmTrace, d_hidden: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = trace.steps.len();
        debug_assert_eq!(d_hidden.len(), n);
        let (n_in, n_h) = (self.input_dim, self.hidden_dim);
        let mut dh_next = vec![0.0; n_h];
        let mut dc_next = vec![0.0; n_h];
        let mut d_inputs = vec![Vec::new(); n];
        let mut da_i = vec![0.0; n_h];
        let mut da_f = vec![0.0; n_h];
        let mut da_g = vec![0.0; n_h];
        let mut da_o = vec![0.0; n_h];

        for k in (0..n).rev() {
            let s = &trace.steps[k];
            let position = if trace.reversed { n - 1 - k } else { k };
            for j in 0..n_h {
                let dh = d_hidden[position][j] + dh_next[j];
                let d_o = dh * s.tanh_c[j];
                let dc = dh * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
                let d_i = dc * s.g[j];
                let d_g = dc * s.i[j];
                let d_f = dc * s.c_prev[j];
                dc_next[j] = dc * s.f[j];
                da_i[j] = d_i * s.i[j] * (1.0 - s.i[j]);
                da_f[j] = d_f * s.f[j] * (1.0 - s.f[j]);
                da_g[j] = d_g * (1.0 - s.g[j] * s.g[j]);
                da_o[j] = d_o * s.o[j] * (1.0 - s.o[j]);
            }
            let mut dz = vec![0.0; n_in + n_h];
            for (w, b, da) in [
                (&mut self.w_input, &mut self.b_input, &da_i),
                (&mut self.w_forget, &mut self.b_forget, &da_f),
                (&mut self.w_cell, &mut self.b_cell, &da_g),
                (&mut self.w_output, &mut self.b_output, &da_o),
            ] {
                w.grad.add_outer(da, &s.z);
                b.grad.add_assign(da);
                w.value.add_transpose_matvec(da, &mut dz);
            }
            dh_next.copy_from_slice(&dz[n_in..]);
            dz.truncate(n_in);
            d_inputs[position] = dz;
        }
        d_inputs
    }
}

impl HasParameters for LstmLayerParams {
    fn parameters(&self) -> Vec<&Parameter> {
        vec![
            &self.w_input,
            &self.w_forget,
            &self.w_cell,
            &self.w_output,
            &self.b_input,
            &self.b_forget,
            &self.b_cell,
            &self.b_output,
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w_input,
            &mut self.w_forget,
            &mut self.w_cell,
            &mut self.w_output,
            &mut self.b_input,
            &mut self.b_forget,
            &mut self.b_cell,
            &mut self.b_output,
        ]
    }
}

/// Hidden states of one layer in input order.
pub fn lstm_layer_forward(
    sequence: &[Vec<f64>],
    params: &LstmLayerParams,
    reversed: bool,
) -> Result<Vec<Vec<f64>>> {
    Ok(params.forward(sequence, reversed)?.hidden_states())
}
