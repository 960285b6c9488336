//! Tabular geospatial data and background sets.
//!
//! Every model in this crate consumes rows laid out as the `p` feature
//! columns followed by the two coordinate columns, in that order.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` observations with `p` named features, one coordinate pair per row and an
/// optional target.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    feature_names: Vec<String>,
    features: DMatrix<f64>,
    coords: Vec<[f64; 2]>,
    target: Option<Vec<f64>>,
    row_ids: Vec<String>,
}

impl DataSet {
    pub fn new(
        feature_names: Vec<String>,
        features: DMatrix<f64>,
        coords: Vec<[f64; 2]>,
        target: Option<Vec<f64>>,
        row_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, p) = features.shape();
        if n == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if p == 0 {
            return Err(Error::Data("dataset has no feature columns".into()));
        }
        if feature_names.len() != p {
            return Err(Error::Data(format!(
                "{} feature names for {p} feature columns",
                feature_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!("duplicate feature name `{name}`")));
            }
        }
        if coords.len() != n {
            return Err(Error::Data(format!("{} coordinate pairs for {n} rows", coords.len())));
        }
        if let Some((i, _)) = features
            .row_iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Data(format!("non-finite feature value in row {i}")));
        }
        if let Some(i) = coords.iter().position(|c| !(c[0].is_finite() && c[1].is_finite())) {
            return Err(Error::Data(format!("non-finite coordinate in row {i}")));
        }
        if let Some(t) = &target {
            if t.len() != n {
                return Err(Error::Data(format!("{} target values for {n} rows", t.len())));
            }
            if let Some(i) = t.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite target in row {i}")));
            }
        }
        let row_ids = match row_ids {
            Some(ids) if ids.len() != n => {
                return Err(Error::Data(format!("{} row ids for {n} rows", ids.len())))
            }
            Some(ids) => ids,
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        Ok(DataSet {
            feature_names,
            features,
            coords,
            target,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Width of a model input row: features plus both coordinates.
    pub fn n_columns(&self) -> usize {
        self.n_features() + 2
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        self.features.column(j).iter().copied().collect()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Model input row `i`: features then coordinates.
    pub fn model_row(&self, i: usize) -> Vec<f64> {
        let mut row: Vec<f64> = self.features.row(i).iter().copied().collect();
        row.extend_from_slice(&self.coords[i]);
        row
    }

    /// The full `n x (p + 2)` model input matrix.
    pub fn model_matrix(&self) -> DMatrix<f64> {
        let p = self.n_features();
        DMatrix::from_fn(self.n_rows(), p + 2, |i, j| {
            if j < p {
                self.features[(i, j)]
            } else {
                self.coords[i][j - p]
            }
        })
    }

    /// Rows picked by index, duplicates allowed (bootstrap resamples).
    pub fn select_rows(&self, indices: &[usize]) -> Result<DataSet> {
        let p = self.n_features();
        let features = DMatrix::from_fn(indices.len(), p, |i, j| self.features[(indices[i], j)]);
        let coords = indices.iter().map(|&i| self.coords[i]).collect();
        let target = self
            .target
            .as_ref()
            .map(|t| indices.iter().map(|&i| t[i]).collect());
        let ids = indices.iter().map(|&i| self.row_ids[i].clone()).collect();
        DataSet::new(self.feature_names.clone(), features, coords, target, Some(ids))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Sampled { seed: u64, k: usize },
    UserSupplied,
}

/// Reference rows that stand in for "absent" players.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    rows: DMatrix<f64>,
    provenance: Provenance,
}

/// Background size used when none is given.
pub const DEFAULT_BACKGROUND_SIZE: usize = 100;

impl BackgroundSet {
    /// Samples `k` rows without replacement; `k > n` clamps to `n`.
    pub fn sample(data: &DataSet, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("background size must be at least 1".into()));
        }
        let n = data.n_rows();
        let k = k.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
        picked.sort_unstable();
        let all = data.model_matrix();
        let rows = DMatrix::from_fn(k, all.ncols(), |i, j| all[(picked[i], j)]);
        Ok(BackgroundSet {
            rows,
            provenance: Provenance::Sampled { seed, k },
        })
    }

    pub fn from_rows(rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::Data("background set is empty".into()));
        }
        if rows.ncols() < 3 {
            return Err(Error::Data(
                "background rows need at least one feature and two coordinates".into(),
            ));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("background contains non-finite values".into()));
        }
        Ok(BackgroundSet {
            rows,
            provenance: Provenance::UserSupplied,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn n_columns(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Column means of the background rows.
    pub fn column_means(&self) -> Vec<f64> {
        self.rows.column_iter().map(|c| c.mean()).collect()
    }
}
