//! Streetscape safety analytics: indicator extraction from semantic label
//! masks, gradient-boosted multiclass accident modeling with exact Shapley
//! attributions, and confounder-adjusted causal effect estimation via
//! generalized propensity score weighting.

pub mod causal;
pub mod dataset;
pub mod error;
pub mod gbt;
pub mod indicators;
pub mod mask;
pub mod pipeline;
pub mod report;
pub mod schema;
pub mod shap;
pub mod synth;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
