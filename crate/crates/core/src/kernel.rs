//! Gaussian RBF kernel and dense Gram matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// RBF width.
    pub sigma: f64,
}

impl KernelParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Argument(format!("kernel width must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    fn inv_two_sigma_sq(&self) -> f64 {
        1.0 / (2.0 * self.sigma * self.sigma)
    }
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-|x - y|^2 / (2 sigma^2))`.
pub fn rbf(x: &[f64], y: &[f64], params: KernelParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("kernel on vectors of length {} and {}", x.len(), y.len())));
    }
    Ok((-squared_distance(x, y) * params.inv_two_sigma_sq()).exp())
}

/// Symmetric Gram matrix with unit diagonal. Each unordered pair is
/// evaluated once and mirrored.
pub fn kernel_matrix(inputs: &[Vec<f64>], params: KernelParams) -> Result<DMatrix<f64>> {
    let dim = inputs
        .first()
        .ok_or_else(|| Error::Shape("kernel matrix of zero inputs".into()))?
        .len();
    if inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::Shape("inputs of unequal dimension".into()));
    }
    let n = inputs.len();
    let scale = params.inv_two_sigma_sq();
    let mut k = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in 0..i {
            let v = (-squared_distance(&inputs[i], &inputs[j]) * scale).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Rectangular cross-kernel: row `i` against training input `j`.
pub fn cross_kernel(rows: &[Vec<f64>], train: &[Vec<f64>], params: KernelParams) -> Result<DMatrix<f64>> {
    let mut k = DMatrix::zeros(rows.len(), train.len());
    for (i, x) in rows.iter().enumerate() {
        for (j, t) in train.iter().enumerate() {
            k[(i, j)] = rbf(x, t, params)?;
        }
    }
    Ok(k)
}
