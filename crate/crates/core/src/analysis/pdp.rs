use crate::error::{Error, Result};
use crate::explanation::ExplanationSet;

/// `(x_j, phi_j)` for every explained row, sorted by `x_j`. No aggregation.
pub fn pdp_points(explanations: &ExplanationSet, feature: &str) -> Result<Vec<(f64, f64)>> {
    let j = explanations
        .feature_index(feature)
        .ok_or_else(|| Error::Data(format!("unknown feature `{feature}`")))?;
    let mut points: Vec<(f64, f64)> = explanations
        .rows
        .iter()
        .map(|r| (r.x[j], r.attribution.phi[j]))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(points)
}
