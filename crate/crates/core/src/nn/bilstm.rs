use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dropout::{apply_mask, dropout_with_mask};
use super::lstm::{LstmLayerParams, LstmTrace};
use super::{HasParameters, Mode, Parameter};
use crate::error::{Error, Result};

/// A stack of bidirectional LSTM layers. Layer `k > 0` reads the
/// concatenated forward/backward states of layer `k - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub layers: Vec<(LstmLayerParams, LstmLayerParams)>,
}

/// Forward-pass record of a [`BiLstm`].
#[derive(Debug, Clone)]
pub struct BiLstmTrace {
    /// Dropout scale applied to each position's input of layer `k`
    /// (always `None` for layer 0).
    masks: Vec<Vec<Option<Vec<f64>>>>,
    layers: Vec<(LstmTrace, LstmTrace)>,
    /// Concatenated `[forward; backward]` states of the top layer, per
    /// position.
    top: Vec<Vec<f64>>,
    hidden_dim: usize,
}

impl BiLstmTrace {
    pub fn top_states(&self) -> &[Vec<f64>] {
        &self.top
    }

    pub fn sequence_len(&self) -> usize {
        self.top.len()
    }

    /// Final forward state (last position) followed by final backward state
    /// (first position) of the top layer.
    pub fn encoding(&self) -> Vec<f64> {
        let h = self.hidden_dim;
        let mut out = Vec::with_capacity(2 * h);
        out.extend_from_slice(&self.top[self.top.len() - 1][..h]);
        out.extend_from_slice(&self.top[0][h..]);
        out
    }

    /// Maps a gradient on [`BiLstmTrace::encoding`] onto per-position top
    /// state gradients.
    pub fn encoding_grad_to_top(&self, d_encoding: &[f64]) -> Vec<Vec<f64>> {
        let h = self.hidden_dim;
        let n = self.top.len();
        let mut d_top = vec![vec![0.0; 2 * h]; n];
        d_top[n - 1][..h].copy_from_slice(&d_encoding[..h]);
        d_top[0][h..].copy_from_slice(&d_encoding[h..]);
        d_top
    }
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        num_layers: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|k| {
                let in_dim = if k == 0 { input_dim } else { 2 * hidden_dim };
                (
                    LstmLayerParams::new(&format!("{name}.l{k}.fwd"), in_dim, hidden_dim, rng),
                    LstmLayerParams::new(&format!("{name}.l{k}.bwd"), in_dim, hidden_dim, rng),
                )
            })
            .collect();
        BiLstm { layers }
    }

    pub fn from_layers(layers: Vec<(LstmLayerParams, LstmLayerParams)>) -> Result<Self> {
        let stack = BiLstm { layers };
        stack.check_shapes()?;
        Ok(stack)
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape("bidirectional LSTM needs at least one layer"));
        }
        let mut expected_in = self.layers[0].0.input_dim;
        for (k, (fwd, bwd)) in self.layers.iter().enumerate() {
            fwd.check_shapes()?;
            bwd.check_shapes()?;
            if fwd.hidden_dim != bwd.hidden_dim {
                return Err(Error::shape(format!(
                    "layer {k}: forward hidden {} != backward hidden {}",
                    fwd.hidden_dim, bwd.hidden_dim
                )));
            }
            if fwd.input_dim != expected_in || bwd.input_dim != expected_in {
                return Err(Error::shape(format!(
                    "layer {k} expects input {}/{}, previous layer emits {expected_in}",
                    fwd.input_dim, bwd.input_dim
                )));
            }
            expected_in = 2 * fwd.hidden_dim;
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].0.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].0.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden_dim()
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        sequence: &[Vec<f64>],
        dropout_rate: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<BiLstmTrace> {
        self.check_shapes()?;
        if sequence.is_empty() {
            return Err(Error::EmptyInput("bidirectional LSTM input sequence"));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidRate(dropout_rate));
        }
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut current: Vec<Vec<f64>> = sequence.to_vec();
        for (k, (fwd, bwd)) in self.layers.iter().enumerate() {
            let mut layer_masks = vec![None; current.len()];
            if k > 0 {
                for (x, m) in current.iter_mut().zip(layer_masks.iter_mut()) {
                    let (dropped, mask) = dropout_with_mask(x, dropout_rate, mode, rng)?;
                    *x = dropped;
                    *m = mask;
                }
            }
            let tf = fwd.forward(&current, false)?;
            let tb = bwd.forward(&current, true)?;
            current = tf
                .hidden_states()
                .into_iter()
                .zip(tb.hidden_states())
                .map(|(mut a, b)| {
                    a.extend(b);
                    a
                })
                .collect();
            masks.push(layer_masks);
            traces.push((tf, tb));
        }
        Ok(BiLstmTrace {
            masks,
            layers: traces,
            top: current,
            hidden_dim: self.hidden_dim(),
        })
    }

    /// Backward pass from per-position gradients on the top states. Returns
    /// gradients with respect to the input sequence.
    pub fn backward(&mut self, trace: &BiLstmTrace, d_top: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let mut d_out = d_top;
        for k in (0..self.layers.len()).rev() {
            let (fwd, bwd) = &mut self.layers[k];
            let h = fwd.hidden_dim;
            let (d_fwd, d_bwd): (Vec<Vec<f64>>, Vec<Vec<f64>>) = d_out
                .iter()
                .map(|d| (d[..h].to_vec(), d[h..].to_vec()))
                .unzip();
            let (tf, tb) = &trace.layers[k];
            let dx_f = fwd.backward(tf, &d_fwd);
            let dx_b = bwd.backward(tb, &d_bwd);
            d_out = dx_f
                .into_iter()
                .zip(dx_b)
                .zip(&trace.masks[k])
                .map(|((a, b), mask)| {
                    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                    apply_mask(&sum, mask.as_ref())
                })
                .collect();
        }
        d_out
    }
}

impl HasParameters for BiLstm {
    fn parameters(&self) -> Vec<&Parameter> {
        self.layers
            .iter()
            .flat_map(|(f, b)| f.parameters().into_iter().chain(b.parameters()))
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers
            .iter_mut()
            .flat_map(|(f, b)| f.parameters_mut().into_iter().chain(b.parameters_mut()))
            .collect()
    }
}

/// Sentence vector of length `2 * hidden_dim` for `sequence`.
pub fn bilstm_encode<R: Rng + ?Sized>(
    sequence: &[Vec<f64>],
    layers: &BiLstm,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(layers.forward(sequence, dropout_rate, mode, rng)?.encoding())
}
