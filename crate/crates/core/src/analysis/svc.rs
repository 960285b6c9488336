//! Spatially varying coefficients from GeoShapley values.
//!
//! At every location the combined effect `g = phi_j + phi_(GEO,j)` of
//! nearby rows is regressed on `x_j` (with an intercept) using
//! geographically weighted least squares; the local slope is the
//! coefficient estimate.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::ExplanationSet;

/// Smallest adaptive bandwidth (neighbor count) accepted.
pub const MIN_NEIGHBORS: usize = 10;
/// Smallest sample for data-driven bandwidth selection.
pub const MIN_SELECTION_ROWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// `(1 - (d/b)^2)^2` inside the `k`-nearest-neighbor radius `b`.
    #[default]
    Bisquare,
    /// Weight one for the `k` nearest neighbors.
    Uniform,
    /// `exp(-(d/h)^2 / 2)` over all rows with a fixed distance `h`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Neighbor count.
    Adaptive(usize),
    /// Distance, Gaussian kernel only.
    Fixed(f64),
    /// Chosen by leave-one-out cross-validation.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcConfig {
    pub bandwidth: Bandwidth,
    pub kernel: KernelShape,
}

impl Default for SvcConfig {
    fn default() -> Self {
        SvcConfig {
            bandwidth: Bandwidth::Auto,
            kernel: KernelShape::Bisquare,
        }
    }
}

/// Local coefficient surface for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcSurface {
    pub feature: String,
    pub method: String,
    pub kernel: KernelShape,
    /// Neighbor count for adaptive kernels, distance for the Gaussian one.
    pub bandwidth: f64,
    pub row_ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub beta: Vec<f64>,
    pub intercept: Vec<f64>,
    pub masked: Vec<bool>,
    /// 95% interval per location, when bootstrap results were attached.
    pub ci: Option<Vec<[f64; 2]>>,
}

/// Every location's other locations, nearest first (ties by index).
#[derive(Debug, Clone)]
pub struct Neighbors {
    sorted: Vec<Vec<(f64, u32)>>,
}

impl Neighbors {
    pub fn new(coords: &[[f64; 2]]) -> Self {
        let sorted = coords
            .par_iter()
            .map(|a| {
                let mut d: Vec<(f64, u32)> = coords
                    .iter()
                    .enumerate()
                    .map(|(j, b)| (((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(), j as u32))
                    .collect();
                d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                d
            })
            .collect();
        Neighbors { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct LocalFit {
    intercept: f64,
    slope: f64,
}

/// Weights for location `i`. With `leave_out` the location itself is dropped
/// before the neighbor count is applied.
fn local_weights(
    nb: &Neighbors,
    i: usize,
    kernel: KernelShape,
    bandwidth: f64,
    leave_out: bool,
) -> Vec<(usize, f64)> {
    let list = nb.sorted[i]
        .iter()
        .filter(|(_, j)| !(leave_out && *j as usize == i));
    match kernel {
        KernelShape::Gaussian => list
            .map(|&(d, j)| (j as usize, (-0.5 * (d / bandwidth).powi(2)).exp()))
            .collect(),
        KernelShape::Uniform => {
            let k = bandwidth as usize;
            list.take(k).map(|&(_, j)| (j as usize, 1.0)).collect()
        }
        KernelShape::Bisquare => {
            let k = bandwidth as usize;
            let near: Vec<(f64, u32)> = list.take(k).copied().collect();
            let radius = near.last().map(|x| x.0).unwrap_or(0.0);
            if radius == 0.0 {
                return near.iter().map(|&(_, j)| (j as usize, 1.0)).collect();
            }
            near.iter()
                .filter(|(d, _)| *d < radius)
                .map(|&(d, j)| (j as usize, (1.0 - (d / radius).powi(2)).powi(2)))
                .collect()
        }
    }
}

fn weighted_line(weights: &[(usize, f64)], x: &[f64], g: &[f64]) -> Option<LocalFit> {
    let sw: f64 = weights.iter().map(|(_, w)| w).sum();
    if !(sw > 0.0) {
        return None;
    }
    let xbar = weights.iter().map(|&(j, w)| w * x[j]).sum::<f64>() / sw;
    let gbar = weights.iter().map(|&(j, w)| w * g[j]).sum::<f64>() / sw;
    let (mut sxx, mut sxg) = (0.0, 0.0);
    for &(j, w) in weights {
        let dx = x[j] - xbar;
        sxx += w * dx * dx;
        sxg += w * dx * (g[j] - gbar);
    }
    let scale = weights.iter().map(|&(j, w)| w * x[j] * x[j]).sum::<f64>();
    if !(sxx > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return None;
    }
    let slope = sxg / sxx;
    Some(LocalFit {
        intercept: gbar - slope * xbar,
        slope,
    })
}

fn check_inputs(nb: &Neighbors, x: &[f64], g: &[f64]) -> Result<()> {
    let n = nb.len();
    if x.len() != n || g.len() != n {
        return Err(Error::Data(format!(
            "{n} locations, {} feature values, {} effects",
            x.len(),
            g.len()
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if x.iter().all(|v| (v - mean).abs() == 0.0) {
        return Err(Error::Data("feature is constant; no local slope exists".into()));
    }
    Ok(())
}

fn check_bandwidth(kernel: KernelShape, bandwidth: f64) -> Result<()> {
    match kernel {
        KernelShape::Gaussian if !(bandwidth > 0.0 && bandwidth.is_finite()) => {
            Err(Error::Config(format!("Gaussian bandwidth must be positive, got {bandwidth}")))
        }
        KernelShape::Bisquare | KernelShape::Uniform if bandwidth < MIN_NEIGHBORS as f64 => {
            Err(Error::Config(format!(
                "bandwidth of {bandwidth} neighbors is below the minimum of {MIN_NEIGHBORS}"
            )))
        }
        _ => Ok(()),
    }
}

/// Local intercepts and slopes of `g ~ x` at every location.
pub fn gwr_fit(
    nb: &Neighbors,
    x: &[f64],
    g: &[f64],
    kernel: KernelShape,
    bandwidth: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_inputs(nb, x, g)?;
    check_bandwidth(kernel, bandwidth)?;
    let fits: Vec<Option<LocalFit>> = (0..nb.len())
        .into_par_iter()
        .map(|i| weighted_line(&local_weights(nb, i, kernel, bandwidth, false), x, g))
        .collect();
    let mut intercepts = Vec::with_capacity(fits.len());
    let mut slopes = Vec::with_capacity(fits.len());
    for (i, fit) in fits.into_iter().enumerate() {
        let fit = fit.ok_or_else(|| {
            Error::RankDeficient(format!(
                "local regression at location {i} has no spread in the feature; widen the bandwidth"
            ))
        })?;
        intercepts.push(fit.intercept);
        slopes.push(fit.slope);
    }
    Ok((intercepts, slopes))
}

/// Leave-one-out squared prediction error of the local fits.
pub fn cv_score(nb: &Neighbors, x: &[f64], g: &[f64], kernel: KernelShape, bandwidth: f64) -> f64 {
    (0..nb.len())
        .into_par_iter()
        .map(|i| match weighted_line(&local_weights(nb, i, kernel, bandwidth, true), x, g) {
            Some(fit) => (g[i] - fit.intercept - fit.slope * x[i]).powi(2),
            None => f64::INFINITY,
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Adaptive neighbor count in `[10, n]` minimizing the leave-one-out error,
/// found by golden-section search over integers.
///
/// Scores within a relative `1e-9` of the best (measured against the
/// spread of `g`) count as ties, and ties go to the largest bandwidth, so a
/// flat criterion selects the smoothest fit.
pub fn select_bandwidth(nb: &Neighbors, x: &[f64], g: &[f64], kernel: KernelShape) -> Result<usize> {
    let n = nb.len();
    if n < MIN_SELECTION_ROWS {
        return Err(Error::Config(format!(
            "bandwidth selection needs at least {MIN_SELECTION_ROWS} locations, got {n}"
        )));
    }
    if kernel == KernelShape::Gaussian {
        return Err(Error::Config(
            "automatic selection works on adaptive (neighbor-count) kernels".into(),
        ));
    }
    check_inputs(nb, x, g)?;
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    let mut score = |k: usize| -> f64 {
        *scores
            .entry(k)
            .or_insert_with(|| cv_score(nb, x, g, kernel, k as f64))
    };

    let (mut lo, mut hi) = (MIN_NEIGHBORS, n);
    score(lo);
    score(hi);
    let probe = |a: usize, c: usize, left: bool| -> usize {
        let span = (c - a) as f64;
        if left {
            a + (GOLDEN * span).round() as usize
        } else {
            c - (GOLDEN * span).round() as usize
        }
    };
    let mut b = probe(lo, hi, true);
    let mut d = probe(lo, hi, false);
    let mut iterations = 0;
    while hi - lo > 2 && iterations < 200 {
        iterations += 1;
        if score(b) <= score(d) {
            hi = d;
        } else {
            lo = b;
        }
        b = probe(lo, hi, true);
        d = probe(lo, hi, false);
        if b == d {
            d = (b + 1).min(hi);
        }
    }
    for k in lo..=hi {
        score(k);
    }

    let mean = g.iter().sum::<f64>() / n as f64;
    let spread: f64 = g.iter().map(|v| (v - mean).powi(2)).sum();
    let best = scores.values().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::RankDeficient(
            "every candidate bandwidth leaves some local regression singular".into(),
        ));
    }
    let tol = 1e-9 * spread.max(f64::MIN_POSITIVE);
    Ok(scores
        .iter()
        .filter(|(_, s)| **s <= best + tol)
        .map(|(k, _)| *k)
        .max()
        .expect("at least one candidate"))
}

/// Combined effect `phi_j + phi_(GEO,j)` per row.
pub fn combined_effect(explanations: &ExplanationSet, j: usize) -> Vec<f64> {
    explanations
        .rows
        .iter()
        .map(|r| r.attribution.phi[j] + r.attribution.phi_geo_x[j])
        .collect()
}

/// Resolved numeric bandwidth for a configuration.
pub fn resolve_bandwidth(
    nb: &Neighbors,
    x: &[f64],
    g: &[f64],
    config: &SvcConfig,
) -> Result<f64> {
    match (config.bandwidth, config.kernel) {
        (Bandwidth::Auto, kernel) => Ok(select_bandwidth(nb, x, g, kernel)? as f64),
        (Bandwidth::Adaptive(k), KernelShape::Bisquare | KernelShape::Uniform) => {
            check_bandwidth(config.kernel, k as f64)?;
            Ok(k.min(nb.len()) as f64)
        }
        (Bandwidth::Fixed(h), KernelShape::Gaussian) => Ok(h),
        (bw, kernel) => Err(Error::Config(format!(
            "bandwidth {bw:?} does not fit the {kernel:?} kernel"
        ))),
    }
}

/// Local coefficient surface of one feature.
pub fn svc_extract(explanations: &ExplanationSet, feature: &str, config: &SvcConfig) -> Result<SvcSurface> {
    let coords: Vec<[f64; 2]> = explanations.rows.iter().map(|r| r.coords).collect();
    let nb = Neighbors::new(&coords);
    svc_extract_with(explanations, feature, config, &nb)
}

pub fn svc_extract_with(
    explanations: &ExplanationSet,
    feature: &str,
    config: &SvcConfig,
    nb: &Neighbors,
) -> Result<SvcSurface> {
    let j = explanations
        .feature_index(feature)
        .ok_or_else(|| Error::Data(format!("unknown feature `{feature}`")))?;
    if nb.len() != explanations.rows.len() {
        return Err(Error::Data("neighbor table does not match the explanations".into()));
    }
    let x: Vec<f64> = explanations.rows.iter().map(|r| r.x[j]).collect();
    let g = combined_effect(explanations, j);
    let bandwidth = resolve_bandwidth(nb, &x, &g, config)?;
    let (intercept, beta) = gwr_fit(nb, &x, &g, config.kernel, bandwidth)?;
    let method = match config.kernel {
        KernelShape::Bisquare => "gwr_adaptive_bisquare",
        KernelShape::Uniform => "gwr_adaptive_uniform",
        KernelShape::Gaussian => "gwr_fixed_gaussian",
    };
    Ok(SvcSurface {
        feature: feature.to_string(),
        method: method.into(),
        kernel: config.kernel,
        bandwidth,
        row_ids: explanations.rows.iter().map(|r| r.row_id.clone()).collect(),
        coords: explanations.rows.iter().map(|r| r.coords).collect(),
        masked: vec![false; beta.len()],
        beta,
        intercept,
        ci: None,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn scatter(n: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let x = (0..n).map(|_| rng.random_range(-2.0f64..2.0)).collect();
        (coords, x)
    }

    #[test]
    fn exact_line_recovered_at_any_bandwidth() {
        let (coords, x) = scatter(80, 1);
        let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let nb = Neighbors::new(&coords);
        for k in [10.0, 25.0, 80.0] {
            let (a, b) = gwr_fit(&nb, &x, &g, KernelShape::Bisquare, k).unwrap();
            assert!(b.iter().all(|s| (s - 2.0).abs() < 1e-10));
            assert!(a.iter().all(|c| c.abs() < 1e-10));
        }
    }

    #[test]
    fn uniform_full_bandwidth_is_global_ols() {
        let (coords, x) = scatter(60, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.random_range(-1.0f64..1.0)).collect();
        let xbar = x.iter().sum::<f64>() / 60.0;
        let gbar = g.iter().sum::<f64>() / 60.0;
        let slope = x.iter().zip(&g).map(|(a, b)| (a - xbar) * (b - gbar)).sum::<f64>()
            / x.iter().map(|a| (a - xbar).powi(2)).sum::<f64>();
        let nb = Neighbors::new(&coords);
        let (_, b) = gwr_fit(&nb, &x, &g, KernelShape::Uniform, 60.0).unwrap();
        assert!(b.iter().all(|s| (s - slope).abs() < 1e-12));
    }

    #[test]
    fn flat_criterion_picks_largest_bandwidth() {
        let (coords, x) = scatter(50, 4);
        let g: Vec<f64> = x.iter().map(|v| -1.5 * v + 0.25).collect();
        let nb = Neighbors::new(&coords);
        assert_eq!(select_bandwidth(&nb, &x, &g, KernelShape::Bisquare).unwrap(), 50);
    }

    #[test]
    fn steep_surface_prefers_local_fits() {
        let n = 400;
        let (coords, x) = scatter(n, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g: Vec<f64> = (0..n)
            .map(|i| (1.0 + 10.0 * coords[i][0]) * x[i] + rng.random_range(-0.1f64..0.1))
            .collect();
        let nb = Neighbors::new(&coords);
        let k = select_bandwidth(&nb, &x, &g, KernelShape::Bisquare).unwrap();
        assert!(k < n / 2, "selected {k}");
    }

    #[test]
    fn preconditions() {
        let (coords, x) = scatter(29, 7);
        let nb = Neighbors::new(&coords);
        assert!(select_bandwidth(&nb, &x, &x, KernelShape::Bisquare).is_err());
        let (coords, _) = scatter(40, 8);
        let nb = Neighbors::new(&coords);
        let constant = vec![1.0; 40];
        assert!(gwr_fit(&nb, &constant, &constant, KernelShape::Bisquare, 20.0).is_err());
        let (_, x) = scatter(40, 9);
        assert!(gwr_fit(&nb, &x, &x, KernelShape::Bisquare, 9.0).is_err());
    }

    #[test]
    fn scaling_the_feature_rescales_slopes() {
        let (coords, x) = scatter(70, 10);
        let g: Vec<f64> = (0..70).map(|i| (1.0 + coords[i][1]) * x[i]).collect();
        let nb = Neighbors::new(&coords);
        let (_, b) = gwr_fit(&nb, &x, &g, KernelShape::Bisquare, 30.0).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| -4.0 * v).collect();
        let (_, bs) = gwr_fit(&nb, &xs, &g, KernelShape::Bisquare, 30.0).unwrap();
        for (a, s) in b.iter().zip(&bs) {
            assert!((a / -4.0 - s).abs() < 1e-10 * a.abs().max(1.0));
        }
    }
}
