use super::param::Param;
use crate::error::{Error, Result};
use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use std::f64::consts::PI;

/// Fully connected layer `y = x·W + b` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    /// Uniform fan-in initialisation, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-bound..bound));
        Self { weight: Param::new(weight), bias: Param::new(Array2::zeros((1, outputs))) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.value) + &self.bias.value
    }

    /// Accumulates parameter gradients (when `param_grads`) and returns the
    /// input gradient.
    pub fn backward(&mut self, x: &Array2<f64>, dy: &Array2<f64>, param_grads: bool) -> Array2<f64> {
        if param_grads {
            self.accumulate(x, dy);
        }
        dy.dot(&self.weight.value.t())
    }

    pub fn accumulate(&mut self, x: &Array2<f64>, dy: &Array2<f64>) {
        ndarray::linalg::general_mat_mul(1.0, &x.t(), dy, 1.0, &mut self.weight.grad);
        self.bias.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
}

pub fn relu(x: Array2<f64>) -> Array2<f64> {
    x.mapv_into(|v| v.max(0.0))
}

/// Gradient through a rectifier given its output.
pub fn relu_backward(y: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(y, |d, &y| {
        if y <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

pub fn concat_columns(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

/// `[cos(π·0·τ), …, cos(π·(dim−1)·τ)]`
pub fn cosine_embed(tau: f64, dim: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::QuantileRange(tau));
    }
    Ok((0..dim).map(|i| (PI * i as f64 * tau).cos()).collect())
}

/// Row-wise cosine embedding of every τ in row-major order of `taus`.
pub fn cosine_embed_batch(taus: &Array2<f64>, dim: usize) -> Result<Array2<f64>> {
    let flat: Vec<f64> = taus.iter().copied().collect();
    if let Some(&bad) = flat.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::QuantileRange(bad));
    }
    Ok(Array2::from_shape_fn((flat.len(), dim), |(r, i)| (PI * i as f64 * flat[r]).cos()))
}

/// Masked column-wise max over groups of `slots` consecutive rows. Groups
/// without valid rows pool to zero. Returns the pooled rows and the winning
/// source row per output element.
pub fn masked_max_pool(x: &Array2<f64>, mask: &[bool], slots: usize) -> (Array2<f64>, Vec<Option<usize>>) {
    let groups = x.nrows() / slots;
    let width = x.ncols();
    let mut out = Array2::zeros((groups, width));
    let mut arg = vec![None; groups * width];
    for g in 0..groups {
        for k in 0..slots {
            let row = g * slots + k;
            if !mask[row] {
                continue;
            }
            for h in 0..width {
                let v = x[[row, h]];
                let slot = &mut arg[g * width + h];
                if slot.is_none() || v > out[[g, h]] {
                    out[[g, h]] = v;
                    *slot = Some(row);
                }
            }
        }
    }
    (out, arg)
}

pub fn masked_max_pool_backward(dy: &Array2<f64>, arg: &[Option<usize>], rows: usize) -> Array2<f64> {
    let width = dy.ncols();
    let mut dx = Array2::zeros((rows, width));
    for g in 0..dy.nrows() {
        for h in 0..width {
            if let Some(row) = arg[g * width + h] {
                dx[[row, h]] += dy[[g, h]];
            }
        }
    }
    dx
}
