//! Community-level counterfactual crime analysis.
//!
//! Stage one fits a structural time-series model to each community's daily
//! counts before an intervention date and compares the forecast with what
//! happened afterwards. Stage two regresses the resulting "significant
//! reduction" indicator on community covariates with Firth's penalized
//! logistic regression.

pub mod bsts;
pub mod covariates;
pub mod crime_data;
pub mod firth;
pub mod pipeline;
mod error;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
