use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::Trainer;

/// Out-of-fold R² over `folds` seeded folds: every row is predicted by a
/// model that never saw it, and R² is computed on the pooled predictions.
pub fn cross_validated_r2(trainer: &dyn Trainer, x: &DMatrix<f64>, y: &[f64], folds: usize, seed: u64) -> Result<f64> {
    let n = y.len();
    if folds < 2 || folds > n {
        return Err(Error::Config(format!("cannot split {n} rows into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        fold_of[i] = k % folds;
    }
    let mut predicted = vec![0.0; n];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xt = DMatrix::from_fn(train.len(), x.ncols(), |i, j| x[(train[i], j)]);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = trainer.fit(&xt, &yt)?;
        let xs = DMatrix::from_fn(test.len(), x.ncols(), |i, j| x[(test[i], j)]);
        for (&i, v) in test.iter().zip(model.predict(&xs)?) {
            predicted[i] = v;
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = y.iter().zip(&predicted).map(|(a, b)| (a - b).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::Data("target is constant; R² is undefined".into()));
    }
    Ok(1.0 - sse / sst)
}
