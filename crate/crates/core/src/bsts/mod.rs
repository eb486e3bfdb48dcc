//! Bayesian structural time-series engine: a local level (plus optional
//! weekly seasonal) model fit by Gibbs sampling on the pre-period, used to
//! forecast the no-intervention counterfactual for the post-period.

mod gibbs;
mod impact;
mod kalman;
mod model;

pub use gibbs::{
    gibbs_sample, posterior_predict, PosteriorDraws, PredictiveDraws, PriorSpec, SamplerConfig, SdPrior,
    Standardization, LEVEL_SD_FRACTION, OBS_PRIOR_WEIGHT, OBS_SD_FRACTION, SEASONAL_SD_FRACTION,
    STATE_PRIOR_WEIGHT,
};
pub use impact::{
    analyze_counts, causal_impact, crime_reduction_indicator, summarize_effect, tail_p_value, ImpactConfig,
    ImpactResult, ImpactSummary, DEFAULT_ALPHA, DEGENERATE_PREDICTION,
};
pub use kalman::{
    kalman_filter, simulation_smoother, state_smoother, CovarianceRecursion, FilterOutput, SimulationSmoother,
    SmootherOutput,
};
pub use model::{
    InitialState, Seasonality, StateMatrix, StateSpaceModel, StateVector, Variances, DIFFUSE_VARIANCE,
    SEASON_PERIOD, STATE_DIM,
};
