//! Community covariate table, stage-one CR matrix and the regression
//! designs built from them.

mod design;
mod table;

pub use design::{build_design, covid_offset, Dimension, Predictor};
pub use table::{load_covariates, read_covariates, validate_covariates, CommunityCovariates, CrMatrix};

#[cfg(test)]
pub(crate) mod tests_support {
    pub(crate) use super::table::tests::synthetic_table as table;
}
