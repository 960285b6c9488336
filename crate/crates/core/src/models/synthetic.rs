//! Seeded spatial processes with known ground truth.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::error::{Error, Result};

pub const MIN_SYNTHETIC_ROWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcOptions {
    /// `beta1(u, v) = 1 + slope * u`.
    pub beta1_slope: f64,
    /// Extra standard-normal features with coefficient zero.
    pub null_features: usize,
}

impl Default for SvcOptions {
    fn default() -> Self {
        SvcOptions {
            beta1_slope: 2.0,
            null_features: 0,
        }
    }
}

/// A generated dataset with its true coefficient surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub dataset: DataSet,
    /// True intercept surface at each location.
    pub beta0: Vec<f64>,
    /// `betas[j][i]`: true coefficient of feature `j` at location `i`. Empty
    /// for processes without a coefficient form.
    pub betas: Vec<Vec<f64>>,
    /// Noise-free response.
    pub signal: Vec<f64>,
    pub noise_sd: f64,
}

fn check(n: usize, noise_sd: f64) -> Result<()> {
    if n < MIN_SYNTHETIC_ROWS {
        return Err(Error::Config(format!(
            "synthetic processes need at least {MIN_SYNTHETIC_ROWS} rows, got {n}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Config(format!("noise sd must be >= 0, got {noise_sd}")));
    }
    Ok(())
}

fn noise(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        // keep the stream aligned with the noisy case
        let _: f64 = StandardNormal.sample(rng);
        0.0
    } else {
        Normal::new(0.0, sd).expect("sd checked").sample(rng)
    }
}

/// Spatially varying coefficient process on the unit square:
/// `y = 3(u + v) + (1 + 2u) x1 + 2 x2 + eps`.
pub fn gen_svc(n: usize, seed: u64, noise_sd: f64) -> Result<SyntheticTruth> {
    gen_svc_with(n, seed, noise_sd, &SvcOptions::default())
}

pub fn gen_svc_with(n: usize, seed: u64, noise_sd: f64, options: &SvcOptions) -> Result<SyntheticTruth> {
    check(n, noise_sd)?;
    let p = 2 + options.null_features;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = DMatrix::zeros(n, p);
    let mut coords = Vec::with_capacity(n);
    let mut beta0 = Vec::with_capacity(n);
    let mut betas = vec![Vec::with_capacity(n); p];
    let mut signal = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        for j in 0..p {
            features[(i, j)] = StandardNormal.sample(&mut rng);
        }
        let b0 = 3.0 * (u + v);
        let b1 = 1.0 + options.beta1_slope * u;
        let b2 = 2.0;
        let s = b0 + b1 * features[(i, 0)] + b2 * features[(i, 1)];
        coords.push([u, v]);
        beta0.push(b0);
        betas[0].push(b1);
        betas[1].push(b2);
        for b in betas.iter_mut().skip(2) {
            b.push(0.0);
        }
        signal.push(s);
        target.push(s + noise(&mut rng, noise_sd));
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok(SyntheticTruth {
        dataset: DataSet::new(names, features, coords, Some(target), None)?,
        beta0,
        betas,
        signal,
        noise_sd,
    })
}

/// S-shaped response of `x1`.
pub fn s_curve(x: f64) -> f64 {
    3.0 * (1.5 * x).tanh()
}

pub const NONLINEAR_NOISE_SD: f64 = 0.1;

/// `y = s_curve(x1) + eps` with an irrelevant `x2` and no spatial term.
pub fn gen_nonlinear(n: usize, seed: u64) -> Result<SyntheticTruth> {
    check(n, NONLINEAR_NOISE_SD)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = DMatrix::zeros(n, 2);
    let mut coords = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        features[(i, 0)] = StandardNormal.sample(&mut rng);
        features[(i, 1)] = StandardNormal.sample(&mut rng);
        let s = s_curve(features[(i, 0)]);
        coords.push([u, v]);
        signal.push(s);
        target.push(s + noise(&mut rng, NONLINEAR_NOISE_SD));
    }
    Ok(SyntheticTruth {
        dataset: DataSet::new(vec!["x1".into(), "x2".into()], features, coords, Some(target), None)?,
        beta0: vec![0.0; n],
        betas: Vec::new(),
        signal,
        noise_sd: NONLINEAR_NOISE_SD,
    })
}
