//! CSV ingestion.

use std::path::Path;

use nalgebra::DMatrix;

use crate::data::DataSet;
use crate::error::{Error, Result};

/// Which columns of a CSV file play which role.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ColumnSpec {
    pub coords: [String; 2],
    pub target: Option<String>,
    /// Row identifier column; when absent from the file, row numbers are used.
    pub id: Option<String>,
    /// Explicit feature list. Empty means every remaining column.
    pub features: Vec<String>,
    pub exclude: Vec<String>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec {
            coords: ["u".into(), "v".into()],
            target: Some("y".into()),
            id: Some("id".into()),
            features: Vec::new(),
            exclude: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dataset: DataSet,
    /// Ids of rows dropped for missing values.
    pub dropped: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("null")
}

/// Reads a headed CSV file. Rows with a missing value in any selected
/// column are dropped and reported; other non-numeric cells are errors.
pub fn ingest_csv(path: &Path, spec: &ColumnSpec) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, spec, &path.display().to_string())
}

pub fn ingest_reader(reader: impl std::io::Read, spec: &ColumnSpec, source: &str) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{source}: cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("{source}: column `{name}` not found in header")))
    };
    let cu = find(&spec.coords[0])?;
    let cv = find(&spec.coords[1])?;
    let target = spec.target.as_deref().map(find).transpose()?;
    let id = match spec.id.as_deref() {
        Some(name) => headers.iter().position(|h| h == name),
        None => None,
    };
    let features: Vec<usize> = if spec.features.is_empty() {
        (0..headers.len())
            .filter(|&c| c != cu && c != cv && Some(c) != target && Some(c) != id)
            .filter(|&c| !spec.exclude.contains(&headers[c]))
            .collect()
    } else {
        spec.features
            .iter()
            .filter(|f| !spec.exclude.contains(f))
            .map(|f| find(f))
            .collect::<Result<_>>()?
    };
    if features.is_empty() {
        return Err(Error::Data(format!("{source}: no feature columns selected")));
    }

    let mut selected = features.clone();
    selected.extend([cu, cv]);
    selected.extend(target);
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut ids = Vec::new();
    let mut dropped = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{source}: {e}")))?;
        let row_id = match id {
            Some(c) => record.get(c).unwrap_or("").trim().to_string(),
            None => r.to_string(),
        };
        if selected.iter().any(|&c| record.get(c).is_none_or(is_missing)) {
            dropped.push(row_id);
            continue;
        }
        let row = selected
            .iter()
            .map(|&c| {
                let cell = record.get(c).expect("checked").trim();
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::Data(format!(
                        "{source}: row {row_id}, column `{}`: `{cell}` is not a number",
                        headers[c]
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
        ids.push(row_id);
    }
    if values.is_empty() {
        return Err(Error::Data(format!("{source}: no usable rows")));
    }
    if !dropped.is_empty() {
        log::warn!(
            "{source}: dropped {} row(s) with missing values: {}",
            dropped.len(),
            dropped.join(", ")
        );
    }
    let p = features.len();
    let n = values.len();
    let x = DMatrix::from_fn(n, p, |i, j| values[i][j]);
    let coords = values.iter().map(|r| [r[p], r[p + 1]]).collect();
    let y = target.map(|_| values.iter().map(|r| r[p + 2]).collect());
    let names = features.iter().map(|&c| headers[c].clone()).collect();
    Ok(Ingested {
        dataset: DataSet::new(names, x, coords, y, Some(ids))?,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, spec: &ColumnSpec) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), spec, "test.csv")
    }

    #[test]
    fn selects_remaining_columns_as_features() {
        let text = "id,u,v,a,b,y\nr1,0,1,2,3,4\nr2,1,0,5,6,7\n";
        let got = read(text, &ColumnSpec::default()).unwrap();
        let d = &got.dataset;
        assert_eq!(d.feature_names(), ["a", "b"]);
        assert_eq!(d.row_ids(), ["r1", "r2"]);
        assert_eq!(d.model_row(1), vec![5.0, 6.0, 1.0, 0.0]);
        assert_eq!(d.target().unwrap(), [4.0, 7.0]);
    }

    #[test]
    fn missing_cell_drops_row() {
        let text = "id,u,v,a,y\nr1,0,1,2,4\nr2,1,0,,7\nr3,1,1,3,NA\n";
        let got = read(text, &ColumnSpec::default()).unwrap();
        assert_eq!(got.dataset.n_rows(), 1);
        assert_eq!(got.dropped, vec!["r2", "r3"]);
    }

    #[test]
    fn errors_name_the_problem() {
        let e = read("id,lon,v,a,y\n1,0,0,0,0\n", &ColumnSpec::default()).unwrap_err();
        assert!(e.to_string().contains("`u`"), "{e}");
        let e = read("id,u,v,a,y\n1,0,0,abc,0\n", &ColumnSpec::default()).unwrap_err();
        assert!(e.to_string().contains("abc"), "{e}");
        let e = read("id,u,v,a,y\n1,0,0,,0\n", &ColumnSpec::default()).unwrap_err();
        assert!(e.to_string().contains("no usable rows"), "{e}");
    }

    #[test]
    fn explicit_lists_and_exclusions() {
        let spec = ColumnSpec {
            features: vec!["b".into(), "a".into()],
            exclude: vec!["a".into()],
            target: None,
            ..Default::default()
        };
        let got = read("u,v,a,b\n0,0,1,2\n", &spec).unwrap();
        assert_eq!(got.dataset.feature_names(), ["b"]);
        assert_eq!(got.dataset.row_ids(), ["0"]);
        assert!(got.dataset.target().is_none());
    }
}
