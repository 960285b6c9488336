use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, SolverPath};

/// Ordinary least squares with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn n_columns(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_row(&self, row: impl Iterator<Item = f64>) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

/// Fits `y ~ 1 + x` by QR. Needs more than `c + 1` rows for `c` columns and
/// full column rank.
pub fn train_linear(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    let (n, c) = x.shape();
    if y.len() != n {
        return Err(Error::Training(format!("{n} rows but {} targets", y.len())));
    }
    if n <= c + 1 {
        return Err(Error::Training(format!(
            "{n} rows cannot determine {} linear coefficients",
            c + 1
        )));
    }
    let design = DMatrix::from_fn(n, c + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let beta = least_squares(&design, &DVector::from_column_slice(y), SolverPath::Qr)
        .map_err(|e| Error::Training(format!("linear fit: {e}")))?;
    Ok(LinearModel {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_x(n: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, c, |_, _| rng.random_range(-2.0f64..2.0))
    }

    #[test]
    fn recovers_noise_free_coefficients() {
        let x = random_x(40, 4, 1);
        let truth = [1.5, -2.0, 0.25, 3.0];
        let y: Vec<f64> = (0..40)
            .map(|i| 0.7 + (0..4).map(|j| truth[j] * x[(i, j)]).sum::<f64>())
            .collect();
        let m = train_linear(&x, &y).unwrap();
        assert!((m.intercept - 0.7).abs() < 1e-9);
        for (b, t) in m.coefficients.iter().zip(truth) {
            assert!((b - t).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_target() {
        let x = random_x(30, 3, 2);
        let m = train_linear(&x, &[4.0; 30]).unwrap();
        assert!((m.intercept - 4.0).abs() < 1e-10);
        assert!(m.coefficients.iter().all(|b| b.abs() < 1e-10));
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let x = random_x(60, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0f64..1.0)).collect();
        let m = train_linear(&x, &y).unwrap();
        let resid: Vec<f64> = (0..60)
            .map(|i| y[i] - m.predict_row(x.row(i).iter().copied()))
            .collect();
        assert!(resid.iter().sum::<f64>().abs() < 1e-8);
        for j in 0..3 {
            let dot: f64 = (0..60).map(|i| resid[i] * x[(i, j)]).sum();
            assert!(dot.abs() < 1e-8, "column {j}: {dot}");
        }
    }

    #[test]
    fn collinear_columns_fail() {
        let mut x = random_x(20, 2, 5);
        for i in 0..20 {
            x[(i, 1)] = 2.0 * x[(i, 0)];
        }
        assert!(train_linear(&x, &[1.0; 20]).is_err());
    }
}
