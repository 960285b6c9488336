use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::ExplanationSet;

/// Name of the location row in importance tables.
pub const GEO_NAME: &str = "GEO";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub name: String,
    /// `mean |phi_j|` (for the location row: `mean |phi_geo|`).
    pub primary_part: f64,
    /// `mean |phi_(GEO,j)|`; zero for the location row.
    pub geo_part: f64,
    pub total: f64,
}

/// Global importance, sorted by total (descending, ties by name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceTable {
    pub fn get(&self, name: &str) -> Option<&ImportanceEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn ranking(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }
}

fn mean_abs(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.map(f64::abs).sum::<f64>() / n as f64
}

pub fn global_importance(explanations: &ExplanationSet) -> Result<ImportanceTable> {
    let rows = &explanations.rows;
    if rows.is_empty() {
        return Err(Error::Data("no explanations to summarize".into()));
    }
    let n = rows.len();
    let mut entries: Vec<ImportanceEntry> = explanations
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let primary_part = mean_abs(rows.iter().map(|r| r.attribution.phi[j]), n);
            let geo_part = mean_abs(rows.iter().map(|r| r.attribution.phi_geo_x[j]), n);
            ImportanceEntry {
                name: name.clone(),
                primary_part,
                geo_part,
                total: primary_part + geo_part,
            }
        })
        .collect();
    if explanations.include_geo {
        let primary_part = mean_abs(rows.iter().map(|r| r.attribution.phi_geo), n);
        entries.push(ImportanceEntry {
            name: GEO_NAME.into(),
            primary_part,
            geo_part: 0.0,
            total: primary_part,
        });
    }
    entries.sort_by(|a, b| {
        b.total
            .partial_cmp(&a.total)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(ImportanceTable { entries })
}
