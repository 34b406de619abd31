//! Single-sample forward primitives. The tape records batched versions of
//! the same functions; these exist for direct use and as reference points.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Added inside every logarithm so saturated predictors stay finite.
pub const LOG_EPS: f64 = 1e-12;

pub const LEAKY_SLOPE: f64 = 0.01;

/// `W·x + b`.
pub fn dense_forward(w: &Matrix, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if w.cols() != x.len() {
        return Err(Error::dim("dense input", w.cols(), x.len()));
    }
    if w.rows() != b.len() {
        return Err(Error::dim("dense bias", w.rows(), b.len()));
    }
    Ok((0..w.rows()).map(|o| dot(w.row(o), x) + b[o]).collect())
}

pub fn leaky_relu(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter().map(|&v| leaky(v, slope)).collect()
}

#[inline]
pub(crate) fn leaky(v: f64, slope: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        slope * v
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// `−ln(p[class] + ε)`.
pub fn cross_entropy(dist: &[f64], true_class: usize) -> Result<f64> {
    let p = dist.get(true_class).ok_or(Error::IndexOutOfRange {
        what: "class",
        index: true_class,
        len: dist.len(),
    })?;
    Ok(-(p + LOG_EPS).ln())
}

/// Mean absolute difference.
pub fn l1_loss(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::dim("l1 operands", x.len(), x_hat.len()));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / x.len() as f64)
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = k;
        }
    }
    best
}

pub fn one_hot(class: usize, card: usize) -> Vec<f64> {
    let mut v = vec![0.0; card];
    v[class] = 1.0;
    v
}
