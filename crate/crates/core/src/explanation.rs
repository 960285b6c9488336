//! Per-row GeoShapley records and their JSON file format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything whose parts should add up to a prediction.
pub trait Additive {
    /// Base value plus every component.
    fn total(&self) -> f64;
}

/// One row's decomposition `phi0 + phi_geo + sum(phi) + sum(phi_geo_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub phi0: f64,
    pub phi_geo: f64,
    pub phi: Vec<f64>,
    pub phi_geo_x: Vec<f64>,
}

impl Attribution {
    /// Largest absolute difference across every component.
    pub fn max_abs_diff(&self, other: &Attribution) -> f64 {
        let mut d = (self.phi0 - other.phi0).abs().max((self.phi_geo - other.phi_geo).abs());
        for (a, b) in self.phi.iter().zip(&other.phi) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.phi_geo_x.iter().zip(&other.phi_geo_x) {
            d = d.max((a - b).abs());
        }
        d
    }

    pub fn scaled(&self, c: f64) -> Attribution {
        Attribution {
            phi0: self.phi0 * c,
            phi_geo: self.phi_geo * c,
            phi: self.phi.iter().map(|v| v * c).collect(),
            phi_geo_x: self.phi_geo_x.iter().map(|v| v * c).collect(),
        }
    }
}

impl Additive for Attribution {
    fn total(&self) -> f64 {
        self.phi0 + self.phi_geo + self.phi.iter().sum::<f64>() + self.phi_geo_x.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationRow {
    pub row_id: String,
    pub coords: [f64; 2],
    /// Feature values of the explained instance, in feature order.
    pub x: Vec<f64>,
    pub prediction: f64,
    pub attribution: Attribution,
}

impl ExplanationRow {
    pub fn efficiency_gap(&self) -> f64 {
        (self.attribution.total() - self.prediction).abs()
    }
}

/// Explanations for a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationSet {
    pub feature_names: Vec<String>,
    pub include_geo: bool,
    pub rows: Vec<ExplanationRow>,
}

impl ExplanationSet {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn max_efficiency_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.efficiency_gap()).fold(0.0, f64::max)
    }

    /// Base value shared by all rows, when it is shared.
    pub fn base_value(&self) -> Option<f64> {
        let first = self.rows.first()?.attribution.phi0;
        self.rows
            .iter()
            .all(|r| r.attribution.phi0 == first)
            .then_some(first)
    }

    pub fn to_document(&self) -> ExplanationDocument {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let named = |vals: &[f64]| -> BTreeMap<String, f64> {
                    self.feature_names.iter().cloned().zip(vals.iter().copied()).collect()
                };
                RowRecord {
                    row_id: r.row_id.clone(),
                    coords: r.coords,
                    prediction: r.prediction,
                    base_value: r.attribution.phi0,
                    phi_geo: r.attribution.phi_geo,
                    phi: named(&r.attribution.phi),
                    phi_geo_x: named(&r.attribution.phi_geo_x),
                    x: named(&r.x),
                }
            })
            .collect();
        ExplanationDocument {
            manifest_hash: None,
            base_value: self
                .base_value()
                .unwrap_or_else(|| self.rows.iter().map(|r| r.attribution.phi0).sum::<f64>() / self.rows.len().max(1) as f64),
            include_geo: self.include_geo,
            feature_names: self.feature_names.clone(),
            rows,
        }
    }

    pub fn from_document(doc: &ExplanationDocument) -> Result<Self> {
        let names = doc.feature_names.clone();
        let pick = |map: &BTreeMap<String, f64>, what: &str, id: &str| -> Result<Vec<f64>> {
            names
                .iter()
                .map(|n| {
                    map.get(n).copied().ok_or_else(|| {
                        Error::Data(format!("row {id}: `{what}` lacks feature `{n}`"))
                    })
                })
                .collect()
        };
        let rows = doc
            .rows
            .iter()
            .map(|r| {
                Ok(ExplanationRow {
                    row_id: r.row_id.clone(),
                    coords: r.coords,
                    x: pick(&r.x, "x", &r.row_id)?,
                    prediction: r.prediction,
                    attribution: Attribution {
                        phi0: r.base_value,
                        phi_geo: r.phi_geo,
                        phi: pick(&r.phi, "phi", &r.row_id)?,
                        phi_geo_x: pick(&r.phi_geo_x, "phi_geo_x", &r.row_id)?,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExplanationSet {
            feature_names: names,
            include_geo: doc.include_geo,
            rows,
        })
    }
}

/// On-disk explanation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_hash: Option<String>,
    pub base_value: f64,
    pub include_geo: bool,
    pub feature_names: Vec<String>,
    pub rows: Vec<RowRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub row_id: String,
    pub coords: [f64; 2],
    pub prediction: f64,
    pub base_value: f64,
    pub phi_geo: f64,
    pub phi: BTreeMap<String, f64>,
    pub phi_geo_x: BTreeMap<String, f64>,
    pub x: BTreeMap<String, f64>,
}
