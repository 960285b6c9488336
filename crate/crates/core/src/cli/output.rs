//! Artifact writers. CSV files start with a `# manifest_hash=` comment line;
//! JSON artifacts carry a `manifest_hash` field. Floats are written in
//! shortest round-trip form.

use std::path::Path;

use serde_json::json;

use crate::analysis::bootstrap::BootstrapSummary;
use crate::analysis::{ImportanceTable, SvcSurface};
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::explanation::ExplanationSet;
use crate::models::SyntheticTruth;

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_with_hash(path: &Path, hash: &str, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Data(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::Data(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    let mut text = format!("# manifest_hash={hash}\n");
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    write_text(path, &text)
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn json_line(value: &impl serde::Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_dataset_csv(path: &Path, data: &DataSet, hash: &str) -> Result<()> {
    let mut header = vec!["id".to_string(), "u".into(), "v".into()];
    header.extend(data.feature_names().iter().cloned());
    let has_y = data.target().is_some();
    if has_y {
        header.push("y".into());
    }
    let rows = (0..data.n_rows()).map(|i| {
        let mut r = vec![data.row_ids()[i].clone(), num(data.coords()[i][0]), num(data.coords()[i][1])];
        r.extend(data.features().row(i).iter().map(|v| num(*v)));
        if let Some(y) = data.target() {
            r.push(num(y[i]));
        }
        r
    });
    csv_with_hash(path, hash, &header, rows)
}

pub fn write_truth_csv(path: &Path, truth: &SyntheticTruth, hash: &str) -> Result<()> {
    let data = &truth.dataset;
    let mut header = vec!["id".to_string(), "signal".into(), "beta0".into()];
    if !truth.betas.is_empty() {
        header.extend(data.feature_names().iter().map(|f| format!("beta_{f}")));
    }
    let rows = (0..data.n_rows()).map(|i| {
        let mut r = vec![data.row_ids()[i].clone(), num(truth.signal[i]), num(truth.beta0[i])];
        r.extend(truth.betas.iter().map(|b| num(b[i])));
        r
    });
    csv_with_hash(path, hash, &header, rows)
}

pub fn write_explanations(path: &Path, ex: &ExplanationSet, hash: &str) -> Result<()> {
    let mut doc = ex.to_document();
    doc.manifest_hash = Some(hash.to_string());
    write_text(path, &json_line(&doc)?)
}

pub fn write_importance_csv(path: &Path, table: &ImportanceTable, hash: &str) -> Result<()> {
    let header = ["feature", "primary_part", "geo_part", "total"].map(String::from);
    let rows = table
        .entries
        .iter()
        .map(|e| vec![e.name.clone(), num(e.primary_part), num(e.geo_part), num(e.total)]);
    csv_with_hash(path, hash, &header, rows)
}

pub fn write_pdp_csv(path: &Path, points: &[(f64, f64)], hash: &str) -> Result<()> {
    let header = ["x", "phi"].map(String::from);
    csv_with_hash(path, hash, &header, points.iter().map(|(x, p)| vec![num(*x), num(*p)]))
}

/// GeoJSON FeatureCollection of points with the local coefficients.
pub fn svc_geojson(surface: &SvcSurface, hash: &str) -> serde_json::Value {
    let features: Vec<serde_json::Value> = (0..surface.beta.len())
        .map(|i| {
            let mut props = json!({
                "row_id": surface.row_ids[i],
                "beta": surface.beta[i],
                "intercept": surface.intercept[i],
                "masked": surface.masked[i],
            });
            if let Some(ci) = &surface.ci {
                props["ci_lower"] = json!(ci[i][0]);
                props["ci_upper"] = json!(ci[i][1]);
            }
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": surface.coords[i]},
                "properties": props,
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "manifest_hash": hash,
        "feature": surface.feature,
        "method": surface.method,
        "bandwidth": surface.bandwidth,
        "features": features,
    })
}

pub fn write_svc_geojson(path: &Path, surface: &SvcSurface, hash: &str) -> Result<()> {
    write_text(path, &json_line(&svc_geojson(surface, hash))?)
}

pub fn write_bootstrap(path: &Path, summary: &BootstrapSummary, hash: &str) -> Result<()> {
    let mut value = serde_json::to_value(summary)?;
    value["manifest_hash"] = json!(hash);
    write_text(path, &json_line(&value)?)
}
