use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial-basis kernel ridge regression on standardized inputs, fitted to the
/// centered target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRidgeModel {
    pub lengthscale: f64,
    pub ridge: f64,
    pub y_mean: f64,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    /// Standardized training rows, row-major.
    pub support: Vec<Vec<f64>>,
    pub dual: Vec<f64>,
}

const MAX_JITTER_TRIES: usize = 6;

fn rbf(a: &[f64], b: &[f64], lengthscale: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-0.5 * d2 / (lengthscale * lengthscale)).exp()
}

impl KernelRidgeModel {
    pub fn n_columns(&self) -> usize {
        self.x_mean.len()
    }

    fn standardize(&self, row: impl Iterator<Item = f64>) -> Vec<f64> {
        row.zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn predict_row(&self, row: impl Iterator<Item = f64>) -> f64 {
        let z = self.standardize(row);
        self.y_mean
            + self
                .support
                .iter()
                .zip(&self.dual)
                .map(|(s, a)| a * rbf(&z, s, self.lengthscale))
                .sum::<f64>()
    }
}

/// Solves `(K + ridge I) alpha = y - mean(y)` by Cholesky, adding diagonal
/// jitter if the factorization fails.
pub fn train_kernel_ridge(
    x: &DMatrix<f64>,
    y: &[f64],
    lengthscale: f64,
    ridge: f64,
) -> Result<KernelRidgeModel> {
    let (n, c) = x.shape();
    if y.len() != n || n == 0 {
        return Err(Error::Training(format!("{n} rows but {} targets", y.len())));
    }
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::Training(format!("ridge must be positive, got {ridge}")));
    }
    if !(lengthscale > 0.0 && lengthscale.is_finite()) {
        return Err(Error::Training(format!(
            "lengthscale must be positive, got {lengthscale}"
        )));
    }
    let x_mean: Vec<f64> = x.column_iter().map(|col| col.mean()).collect();
    let x_scale: Vec<f64> = x
        .column_iter()
        .zip(&x_mean)
        .map(|(col, m)| {
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let support: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..c).map(|j| (x[(i, j)] - x_mean[j]) / x_scale[j]).collect())
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let centered = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let gram = DMatrix::from_fn(n, n, |i, j| rbf(&support[i], &support[j], lengthscale));
    let mut jitter = 0.0;
    for _ in 0..MAX_JITTER_TRIES {
        let mut a = gram.clone();
        for i in 0..n {
            a[(i, i)] += ridge + jitter;
        }
        if let Some(chol) = a.cholesky() {
            let dual = chol.solve(&centered);
            return Ok(KernelRidgeModel {
                lengthscale,
                ridge,
                y_mean,
                x_mean,
                x_scale,
                support,
                dual: dual.iter().copied().collect(),
            });
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
    }
    Err(Error::Training(
        "kernel matrix is not positive definite even after jitter".into(),
    ))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn data(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0f64..1.0));
        let y = (0..n).map(|i| (2.0 * x[(i, 0)]).sin() + x[(i, 1)] * x[(i, 2)]).collect();
        (x, y)
    }

    #[test]
    fn interpolates_with_tiny_ridge() {
        let (x, y) = data(40, 1);
        let m = train_kernel_ridge(&x, &y, 1.0, 1e-10).unwrap();
        for i in 0..40 {
            let p = m.predict_row(x.row(i).iter().copied());
            assert!((p - y[i]).abs() < 1e-4, "row {i}: {p} vs {}", y[i]);
        }
    }

    #[test]
    fn huge_ridge_shrinks_to_mean() {
        let (x, y) = data(30, 2);
        let mean = y.iter().sum::<f64>() / 30.0;
        let m = train_kernel_ridge(&x, &y, 1.0, 1e12).unwrap();
        for i in 0..30 {
            assert!((m.predict_row(x.row(i).iter().copied()) - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let (x, y) = data(25, 3);
        let perm: Vec<usize> = (0..25).rev().collect();
        let xp = DMatrix::from_fn(25, 3, |i, j| x[(perm[i], j)]);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let a = train_kernel_ridge(&x, &y, 0.8, 0.1).unwrap();
        let b = train_kernel_ridge(&xp, &yp, 0.8, 0.1).unwrap();
        let probe = [0.1, -0.3, 0.5];
        let pa = a.predict_row(probe.iter().copied());
        let pb = b.predict_row(probe.iter().copied());
        assert!((pa - pb).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_positive_ridge() {
        let (x, y) = data(10, 4);
        assert!(train_kernel_ridge(&x, &y, 1.0, 0.0).is_err());
    }
}
