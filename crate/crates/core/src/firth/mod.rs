//! Firth bias-reduced logistic regression.
//!
//! Maximizes the Jeffreys-penalized log-likelihood
//! `l(beta) + 0.5 log det(X'WX)`, which keeps estimates finite under
//! complete or quasi-complete separation.

mod design;
mod fit;

pub use design::{DesignMatrix, INTERCEPT};
pub use fit::{
    average_marginal_effect, fit, penalized_lr_test, predict, significance_stars, wald_stats, ConvergenceControl,
    EffectKind, FirthFit, CONDITION_LIMIT, LR_SLACK,
};
