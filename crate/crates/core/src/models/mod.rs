//! Built-in trainable oracles and synthetic ground-truth processes.

mod boosted_trees;
mod kernel_ridge;
mod linear;
pub mod synthetic;
mod validation;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use boosted_trees::{train_boosted_trees, BoostedTrees, GbtConfig, Node, Tree};
pub use kernel_ridge::{train_kernel_ridge, KernelRidgeModel};
pub use linear::{train_linear, LinearModel};
pub use validation::cross_validated_r2;
pub use synthetic::{gen_nonlinear, gen_svc, gen_svc_with, SvcOptions, SyntheticTruth};

use crate::error::{Error, Result};
use crate::game::{PredictionOracle, Trainer};

/// A fitted built-in model over `p + 2` input columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Linear(LinearModel),
    KernelRidge(KernelRidgeModel),
    BoostedTrees(BoostedTrees),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Linear(_) => "linear",
            TrainedModel::KernelRidge(_) => "kernel_ridge",
            TrainedModel::BoostedTrees(_) => "boosted_trees",
        }
    }

    /// Spec that refits a model of the same kind and hyperparameters.
    pub fn spec(&self) -> ModelSpec {
        match self {
            TrainedModel::Linear(_) => ModelSpec::Linear,
            TrainedModel::KernelRidge(m) => ModelSpec::KernelRidge {
                lengthscale: m.lengthscale,
                ridge: m.ridge,
            },
            TrainedModel::BoostedTrees(m) => ModelSpec::BoostedTrees(m.config),
        }
    }
}

impl PredictionOracle for TrainedModel {
    fn n_columns(&self) -> usize {
        match self {
            TrainedModel::Linear(m) => m.n_columns(),
            TrainedModel::KernelRidge(m) => m.n_columns(),
            TrainedModel::BoostedTrees(m) => m.n_columns,
        }
    }

    fn predict(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        if rows.ncols() != self.n_columns() {
            return Err(Error::ColumnMismatch {
                expected: self.n_columns(),
                actual: rows.ncols(),
            });
        }
        let out = (0..rows.nrows()).map(|i| match self {
            TrainedModel::Linear(m) => m.predict_row(rows.row(i).iter().copied()),
            TrainedModel::KernelRidge(m) => m.predict_row(rows.row(i).iter().copied()),
            TrainedModel::BoostedTrees(m) => m.predict_row(&|j| rows[(i, j)]),
        });
        Ok(out.collect())
    }
}

/// Which built-in learner to fit, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear,
    KernelRidge { lengthscale: f64, ridge: f64 },
    BoostedTrees(GbtConfig),
}

impl ModelSpec {
    pub fn train(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<TrainedModel> {
        Ok(match self {
            ModelSpec::Linear => TrainedModel::Linear(train_linear(x, y)?),
            ModelSpec::KernelRidge { lengthscale, ridge } => {
                TrainedModel::KernelRidge(train_kernel_ridge(x, y, *lengthscale, *ridge)?)
            }
            ModelSpec::BoostedTrees(config) => {
                TrainedModel::BoostedTrees(train_boosted_trees(x, y, config)?)
            }
        })
    }
}

impl Trainer for ModelSpec {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Box<dyn PredictionOracle>> {
        Ok(Box::new(self.train(x, y)?))
    }
}

pub const ARTIFACT_FORMAT: &str = "geoshap-model";
pub const ARTIFACT_VERSION: u32 = 1;

/// Versioned JSON model file. Floats are written in shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub feature_names: Vec<String>,
    pub model: TrainedModel,
}

impl ModelArtifact {
    pub fn new(model: TrainedModel, feature_names: Vec<String>) -> Self {
        ModelArtifact {
            format: ARTIFACT_FORMAT.into(),
            version: ARTIFACT_VERSION,
            feature_names,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: ModelArtifact = serde_json::from_str(text)
            .map_err(|e| Error::Data(format!("corrupt model artifact: {e}")))?;
        if artifact.format != ARTIFACT_FORMAT {
            return Err(Error::Data(format!("not a model artifact: format `{}`", artifact.format)));
        }
        if artifact.version != ARTIFACT_VERSION {
            return Err(Error::Data(format!(
                "unsupported model artifact version {}",
                artifact.version
            )));
        }
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
