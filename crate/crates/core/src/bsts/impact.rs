use serde::{Deserialize, Serialize};

use super::gibbs::{gibbs_sample, posterior_predict, PredictiveDraws, PriorSpec, SamplerConfig};
use super::model::Seasonality;
use crate::crime_data::{CrimeCategory, DailyCountSeries, StudyWindow};
use crate::error::{invalid, Result};
use crate::rng::derive_seed;
use crate::stats::{quantile, quantile_sorted};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Below this many predicted post-period events the relative effect is not
/// reported and the model is flagged degenerate.
pub const DEGENERATE_PREDICTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub alpha: f64,
    pub seasonality: Seasonality,
    pub standardize: bool,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        ImpactConfig {
            iterations: 1000,
            burn_in: 100,
            alpha: DEFAULT_ALPHA,
            seasonality: Seasonality::Weekly,
            standardize: true,
        }
    }
}

impl ImpactConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.iterations <= self.burn_in {
            return Err(invalid(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        Ok(())
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            seasonality: self.seasonality,
            iterations: self.iterations,
            burn_in: self.burn_in,
        }
    }
}

/// Posterior summary of the post-period effect for one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactSummary {
    pub actual_cum: u64,
    pub predicted_cum_mean: f64,
    /// 2.5% and 97.5% quantiles of the cumulative counterfactual.
    pub predicted_cum_ci: (f64, f64),
    /// `actual / predicted_mean - 1`; `None` when degenerate.
    pub rce: Option<f64>,
    pub rce_ci: Option<(f64, f64)>,
    pub p_value: f64,
    pub cr: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactResult {
    pub community_id: u8,
    pub category: CrimeCategory,
    pub seed: u64,
    #[serde(flatten)]
    pub summary: ImpactSummary,
}

/// One-sided posterior tail area in the direction of the observed effect,
/// with add-one smoothing so the result lies in `(0, 1]`.
pub fn tail_p_value(draws_cum: &[f64], actual_cum: f64) -> Result<f64> {
    if draws_cum.is_empty() {
        return Err(invalid("tail probability needs at least one draw"));
    }
    let median = quantile(draws_cum, 0.5);
    let extreme = if actual_cum <= median {
        draws_cum.iter().filter(|&&d| d <= actual_cum).count()
    } else {
        draws_cum.iter().filter(|&&d| d >= actual_cum).count()
    };
    Ok((1 + extreme) as f64 / (1 + draws_cum.len()) as f64)
}

/// `true` iff the effect is a reduction significant at `alpha`.
pub fn crime_reduction_indicator(rce: f64, p_value: f64, alpha: f64) -> Result<bool> {
    if rce.is_nan() {
        return Err(invalid("relative effect is NaN"));
    }
    if !(p_value > 0.0 && p_value <= 1.0) {
        return Err(invalid(format!("p-value must lie in (0, 1], got {p_value}")));
    }
    Ok(rce < 0.0 && p_value <= alpha)
}

/// Summarize observed post-period counts against counterfactual draws.
pub fn summarize_effect(predictive: &PredictiveDraws, actual_cum: u64, alpha: f64) -> Result<ImpactSummary> {
    let actual = actual_cum as f64;
    let mut sorted = predictive.cumulative.clone();
    sorted.sort_by(f64::total_cmp);
    let predicted_cum_mean = predictive.mean_cumulative();
    let predicted_cum_ci = (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975));
    let p_value = tail_p_value(&predictive.cumulative, actual)?;

    let degenerate = !(predicted_cum_mean > DEGENERATE_PREDICTION);
    let (rce, rce_ci, cr) = if degenerate {
        (None, None, false)
    } else {
        let rce = actual / predicted_cum_mean - 1.0;
        // A non-positive draw puts no finite bound on the relative effect.
        let per_draw: Vec<f64> = predictive
            .cumulative
            .iter()
            .map(|&c| if c > 0.0 { actual / c - 1.0 } else { f64::INFINITY })
            .collect();
        let ci = (quantile(&per_draw, 0.025), quantile(&per_draw, 0.975));
        let cr = crime_reduction_indicator(rce, p_value, alpha)?;
        (Some(rce), Some(ci), cr)
    };
    Ok(ImpactSummary {
        actual_cum,
        predicted_cum_mean,
        predicted_cum_ci,
        rce,
        rce_ci,
        p_value,
        cr,
        degenerate,
    })
}

/// Fit on `pre`, forecast `post.len()` days and compare with `post`.
/// Returns the summary together with the forecast draws.
pub fn analyze_counts(
    pre: &[u32],
    post: &[u32],
    config: &ImpactConfig,
    seed: u64,
) -> Result<(ImpactSummary, PredictiveDraws)> {
    config.validate()?;
    let pre: Vec<f64> = pre.iter().map(|&c| c as f64).collect();
    let prior = PriorSpec::for_series(&pre, config.standardize);
    let draws = gibbs_sample(&pre, &prior, &config.sampler(), derive_seed(seed, 0))?;
    let predictive = posterior_predict(&draws, post.len(), derive_seed(seed, 1))?;
    let actual: u64 = post.iter().map(|&c| c as u64).sum();
    let summary = summarize_effect(&predictive, actual, config.alpha)?;
    Ok((summary, predictive))
}

pub fn causal_impact(
    series: &DailyCountSeries,
    window: &StudyWindow,
    config: &ImpactConfig,
    seed: u64,
) -> Result<ImpactResult> {
    let (pre, post) = series.split(window)?;
    let (summary, _) = analyze_counts(pre, post, config, seed)?;
    Ok(ImpactResult {
        community_id: series.community_id,
        category: series.category,
        seed,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_p_counting_rule() {
        let above: Vec<f64> = (0..999).map(|i| 100.0 + i as f64).collect();
        assert!((tail_p_value(&above, 50.0).unwrap() - 0.001).abs() < 1e-15);
        assert_eq!(tail_p_value(&[7.0; 20], 7.0).unwrap(), 1.0);
        let ramp: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((tail_p_value(&ramp, 5.0).unwrap() - 6.0 / 101.0).abs() < 1e-15);
        // upper tail
        assert!((tail_p_value(&ramp, 98.0).unwrap() - 4.0 / 101.0).abs() < 1e-15);
        assert!(tail_p_value(&[], 1.0).is_err());
    }

    #[test]
    fn reduction_indicator_table() {
        assert!(crime_reduction_indicator(-0.30, 0.01, DEFAULT_ALPHA).unwrap());
        assert!(!crime_reduction_indicator(-0.30, 0.20, DEFAULT_ALPHA).unwrap());
        assert!(!crime_reduction_indicator(0.50, 0.001, DEFAULT_ALPHA).unwrap());
        assert!(crime_reduction_indicator(-0.01, 0.05, DEFAULT_ALPHA).unwrap());
        assert!(crime_reduction_indicator(f64::NAN, 0.01, DEFAULT_ALPHA).is_err());
        assert!(crime_reduction_indicator(-0.3, 0.0, DEFAULT_ALPHA).is_err());
    }

    #[test]
    fn summary_identities() {
        let cum: Vec<f64> = (0..200).map(|i| 80.0 + (i % 41) as f64).collect();
        let pred = PredictiveDraws {
            daily: cum.iter().map(|c| vec![*c]).collect(),
            cumulative: cum,
        };
        let s = summarize_effect(&pred, 60, DEFAULT_ALPHA).unwrap();
        let rce = s.rce.unwrap();
        assert!((rce - (60.0 / s.predicted_cum_mean - 1.0)).abs() < 1e-12);
        let (lo, hi) = s.rce_ci.unwrap();
        assert!(lo <= hi);
        assert_eq!(s.cr, crime_reduction_indicator(rce, s.p_value, DEFAULT_ALPHA).unwrap());
        assert!(s.cr);
    }

    #[test]
    fn degenerate_when_prediction_tiny() {
        let pred = PredictiveDraws {
            daily: vec![vec![0.1]; 10],
            cumulative: vec![0.1; 10],
        };
        let s = summarize_effect(&pred, 0, DEFAULT_ALPHA).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.rce, None);
        assert!(!s.cr);
    }
}
