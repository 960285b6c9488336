//! Percentile bootstrap for GeoShapley components and local coefficients.
//!
//! Each replicate resamples the rows with replacement, retrains the model
//! and explains the original rows again against the same background, so
//! the intervals belong to the locations that get mapped.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svc::{
    combined_effect, gwr_fit, resolve_bandwidth, Bandwidth, KernelShape, Neighbors, SvcConfig, SvcSurface,
};
use crate::data::{BackgroundSet, DataSet};
use crate::error::{Error, Result};
use crate::explanation::ExplanationSet;
use crate::game::{PredictionOracle, Trainer};
use crate::kernel::{explain, ExplainConfig};

pub const DEFAULT_REPLICATES: usize = 500;
/// Share of replicates allowed to fail before the run is abandoned.
pub const MAX_FAILED_SHARE: f64 = 0.10;
pub const LOWER_QUANTILE: f64 = 0.025;
pub const UPPER_QUANTILE: f64 = 0.975;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub explain: ExplainConfig,
    /// Features whose local coefficients get intervals too.
    #[serde(default)]
    pub svc_features: Vec<String>,
    #[serde(default)]
    pub svc: SvcConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            explain: ExplainConfig::default(),
            svc_features: Vec::new(),
            svc: SvcConfig::default(),
        }
    }
}

/// Point estimates and percentile bounds of one component at every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentInterval {
    /// `phi_geo`, `phi:<feature>`, `phi_geo_x:<feature>` or `beta:<feature>`.
    pub name: String,
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ComponentInterval {
    pub fn contains_zero(&self, i: usize) -> bool {
        interval_contains_zero(self.lower[i], self.upper[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub seed: u64,
    pub row_ids: Vec<String>,
    /// Bandwidth used for each entry of `svc_features`, fixed from the full-data fit.
    pub svc_bandwidths: Vec<(String, f64)>,
    pub components: Vec<ComponentInterval>,
}

impl BootstrapSummary {
    pub fn component(&self, name: &str) -> Option<&ComponentInterval> {
        self.components.iter().find(|c| c.name == name)
    }
}

/// Boundaries count as containing zero.
pub fn interval_contains_zero(lower: f64, upper: f64) -> bool {
    lower <= 0.0 && upper >= 0.0
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Plan {
    names: Vec<String>,
    svc: Vec<(usize, KernelShape, f64)>,
}

fn component_values(plan: &Plan, ex: &ExplanationSet, nb: &Neighbors) -> Result<Vec<Vec<f64>>> {
    let p = ex.n_features();
    let mut out = Vec::with_capacity(plan.names.len());
    out.push(ex.rows.iter().map(|r| r.attribution.phi_geo).collect());
    for j in 0..p {
        out.push(ex.rows.iter().map(|r| r.attribution.phi[j]).collect());
    }
    for j in 0..p {
        out.push(ex.rows.iter().map(|r| r.attribution.phi_geo_x[j]).collect());
    }
    for &(j, kernel, bandwidth) in &plan.svc {
        let x: Vec<f64> = ex.rows.iter().map(|r| r.x[j]).collect();
        let g = combined_effect(ex, j);
        out.push(gwr_fit(nb, &x, &g, kernel, bandwidth)?.1);
    }
    Ok(out)
}

fn training_data(data: &DataSet, indices: &[usize]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let target = data
        .target()
        .ok_or_else(|| Error::Data("bootstrap needs a target column to retrain".into()))?;
    let p = data.n_features();
    let x = DMatrix::from_fn(indices.len(), p + 2, |i, j| {
        let r = indices[i];
        if j < p {
            data.features()[(r, j)]
        } else {
            data.coords()[r][j - p]
        }
    });
    Ok((x, indices.iter().map(|&i| target[i]).collect()))
}

/// Row indices drawn with replacement for replicate `r`. Each replicate owns
/// its own stream, so results do not depend on scheduling.
pub fn resample_indices(n: usize, seed: u64, replicate: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bootstrap intervals for every component at every row of `data`.
///
/// The point estimates come from a model trained on the full data. Local
/// coefficient bandwidths are settled once on that fit and then held fixed.
pub fn bootstrap(
    data: &DataSet,
    trainer: &dyn Trainer,
    background: &BackgroundSet,
    config: &BootstrapConfig,
) -> Result<BootstrapSummary> {
    if config.replicates == 0 {
        return Err(Error::Config("bootstrap needs at least one replicate".into()));
    }
    let n = data.n_rows();
    let all: Vec<usize> = (0..n).collect();
    let (x, y) = training_data(data, &all)?;
    let model = trainer.fit(&x, &y)?;
    let point = explain(data, model.as_ref(), background, &config.explain)?;

    let nb = Neighbors::new(data.coords());
    let mut names = vec!["phi_geo".to_string()];
    names.extend(data.feature_names().iter().map(|f| format!("phi:{f}")));
    names.extend(data.feature_names().iter().map(|f| format!("phi_geo_x:{f}")));
    let mut svc = Vec::new();
    let mut svc_bandwidths = Vec::new();
    for feature in &config.svc_features {
        let j = data
            .feature_index(feature)
            .ok_or_else(|| Error::Data(format!("unknown feature `{feature}`")))?;
        let xj: Vec<f64> = point.rows.iter().map(|r| r.x[j]).collect();
        let g = combined_effect(&point, j);
        let bw = resolve_bandwidth(&nb, &xj, &g, &config.svc)?;
        svc.push((j, config.svc.kernel, bw));
        svc_bandwidths.push((feature.clone(), bw));
        names.push(format!("beta:{feature}"));
    }
    let plan = Plan { names, svc };
    let points = component_values(&plan, &point, &nb)?;

    let replicate = |r: usize| -> Result<Vec<Vec<f64>>> {
        let (xb, yb) = training_data(data, &resample_indices(n, config.seed, r))?;
        let oracle: Box<dyn PredictionOracle> = trainer.fit(&xb, &yb)?;
        let ex = explain(data, oracle.as_ref(), background, &config.explain)?;
        component_values(&plan, &ex, &nb)
    };
    let results: Vec<Result<Vec<Vec<f64>>>> =
        (0..config.replicates).into_par_iter().map(replicate).collect();

    let mut draws: Vec<Vec<Vec<f64>>> = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => draws.push(v),
            Err(e) => {
                failed += 1;
                log::warn!("bootstrap replicate {r} failed: {e}");
            }
        }
    }
    if failed as f64 > MAX_FAILED_SHARE * config.replicates as f64 || draws.is_empty() {
        return Err(Error::BootstrapFailed {
            failed,
            total: config.replicates,
        });
    }

    let components = plan
        .names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let (lower, upper): (Vec<f64>, Vec<f64>) = (0..n)
                .map(|i| {
                    let mut s: Vec<f64> = draws.iter().map(|d| d[c][i]).collect();
                    s.sort_by(f64::total_cmp);
                    (quantile_sorted(&s, LOWER_QUANTILE), quantile_sorted(&s, UPPER_QUANTILE))
                })
                .unzip();
            ComponentInterval {
                name: name.clone(),
                point: points[c].clone(),
                lower,
                upper,
            }
        })
        .collect();

    Ok(BootstrapSummary {
        replicates: config.replicates,
        succeeded: draws.len(),
        failed,
        seed: config.seed,
        row_ids: data.row_ids().to_vec(),
        svc_bandwidths,
        components,
    })
}

/// Flags every location whose `beta:<feature>` interval contains zero and
/// attaches the intervals. Coefficient values are left as they are.
pub fn mask_by_ci(surface: &mut SvcSurface, summary: &BootstrapSummary) -> Result<()> {
    let name = format!("beta:{}", surface.feature);
    let c = summary
        .component(&name)
        .ok_or_else(|| Error::Data(format!("bootstrap summary has no `{name}` component")))?;
    if summary.row_ids != surface.row_ids {
        return Err(Error::Data(
            "bootstrap summary rows do not line up with the coefficient surface".into(),
        ));
    }
    surface.masked = (0..surface.beta.len()).map(|i| c.contains_zero(i)).collect();
    surface.ci = Some(c.lower.iter().zip(&c.upper).map(|(l, u)| [*l, *u]).collect());
    Ok(())
}

/// Per-row masks for any component: `true` where its interval contains zero.
pub fn mask_component(summary: &BootstrapSummary, name: &str) -> Result<Vec<bool>> {
    let c = summary
        .component(name)
        .ok_or_else(|| Error::Data(format!("bootstrap summary has no `{name}` component")))?;
    Ok((0..c.point.len()).map(|i| c.contains_zero(i)).collect())
}

/// SVC settings a bootstrap run should reuse so that its `beta` intervals
/// match a surface computed separately.
pub fn fixed_svc_config(surface: &SvcSurface) -> SvcConfig {
    let bandwidth = match surface.kernel {
        KernelShape::Gaussian => Bandwidth::Fixed(surface.bandwidth),
        _ => Bandwidth::Adaptive(surface.bandwidth as usize),
    };
    SvcConfig {
        bandwidth,
        kernel: surface.kernel,
    }
}
