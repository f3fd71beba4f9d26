use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. Eval mode is the exact identity.
pub fn dropout<R: Rng + ?Sized>(v: &[f64], rate: f64, mode: Mode, rng: &mut R) -> Result<Vec<f64>> {
    let (out, _) = dropout_with_mask(v, rate, mode, rng)?;
    Ok(out)
}

/// Like [`dropout`], also returning the per-coordinate scale that was
/// applied (`None` when nothing was dropped) for use in the backward pass.
pub(crate) fn dropout_with_mask<R: Rng + ?Sized>(
    v: &[f64],
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((v.to_vec(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = v
        .iter()
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let out = v.iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((out, Some(mask)))
}

pub(crate) fn apply_mask(grad: &[f64], mask: Option<&Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => grad.iter().zip(m).map(|(g, s)| g * s).collect(),
        None => grad.to_vec(),
    }
}

/// Generator for eval-mode passes, which never draw random numbers.
pub(crate) struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval mode does not sample")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("eval mode does not sample")
    }
    fn fill_bytes(&mut self, _dest: &mut [u8]) {
        unreachable!("eval mode does not sample")
    }
    fn try_fill_bytes(&mut self, _dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("eval mode does not sample")
    }
}
