//! Summaries built on top of explanations: global importance, dependence
//! points, local coefficient surfaces and bootstrap intervals.

pub mod bootstrap;
pub mod importance;
pub mod pdp;
pub mod svc;

pub use bootstrap::{bootstrap, mask_by_ci, BootstrapConfig, BootstrapSummary, ComponentInterval};
pub use importance::{global_importance, ImportanceEntry, ImportanceTable, GEO_NAME};
pub use pdp::pdp_points;
pub use svc::{select_bandwidth, svc_extract, Bandwidth, KernelShape, SvcConfig, SvcSurface};
