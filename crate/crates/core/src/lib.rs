//! GeoShapley explanations for models over geospatial tabular data.
//!
//! A prediction is split into a base value, an intrinsic location effect,
//! location-invariant feature effects and location-by-feature interaction
//! effects that add up exactly to the prediction. On top of that the crate
//! extracts spatially varying coefficients with a geographically weighted
//! smoother and attaches bootstrap confidence intervals.

pub mod analysis;
pub mod bridge;
pub mod cli;
pub mod data;
pub mod error;
pub mod exact;
pub mod explanation;
pub mod game;
pub mod kernel;
pub mod linalg;
pub mod models;

pub use data::{BackgroundSet, DataSet};
pub use error::{Error, ErrorClass, Result};
pub use explanation::{Additive, Attribution, ExplanationRow, ExplanationSet};
pub use game::{Coalition, PlayerIndex, PredictionOracle, Trainer};
pub use kernel::{explain, ExplainConfig};
