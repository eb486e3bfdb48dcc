use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsts::{causal_impact, ImpactConfig, ImpactResult, ImpactSummary};
use crate::covariates::{build_design, CommunityCovariates, CrMatrix, Dimension};
use crate::crime_data::{CrimeCategory, SeriesMatrix, NUM_COMMUNITIES};
use crate::error::{invalid, Result};
use crate::firth::{average_marginal_effect, fit, ConvergenceControl, EffectKind, FirthFit};
use crate::rng::mix64;

/// Seed of one model. Depends only on the base seed and the model's
/// identity, never on scheduling.
pub fn model_seed(seed_base: u64, community_id: u8, crime: CrimeCategory) -> u64 {
    seed_base ^ mix64(((crime.index() as u64 + 1) << 8) | community_id as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFailure {
    pub community_id: u8,
    pub category: CrimeCategory,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutput {
    /// Ordered by crime, then community.
    pub results: Vec<ImpactResult>,
    pub cr: CrMatrix,
    /// Models that raised an error; they appear in `results` as degenerate.
    pub failures: Vec<ModelFailure>,
}

impl BatchOutput {
    /// Significant increases: positive effect with `p <= alpha`.
    pub fn increase_count(&self, crime: CrimeCategory, alpha: f64) -> usize {
        self.results
            .iter()
            .filter(|r| r.category == crime && is_significant_increase(&r.summary, alpha))
            .count()
    }
}

pub fn is_significant_increase(s: &ImpactSummary, alpha: f64) -> bool {
    matches!(s.rce, Some(r) if r > 0.0) && s.p_value <= alpha
}

fn failed_summary(actual_cum: u64) -> ImpactSummary {
    ImpactSummary {
        actual_cum,
        predicted_cum_mean: f64::NAN,
        predicted_cum_ci: (f64::NAN, f64::NAN),
        rce: None,
        rce_ci: None,
        p_value: 1.0,
        cr: false,
        degenerate: true,
    }
}

/// Fit every (community, crime) model on `workers` threads.
pub fn run_impact_batch(
    matrix: &SeriesMatrix,
    config: &ImpactConfig,
    seed_base: u64,
    workers: usize,
) -> Result<BatchOutput> {
    config.validate()?;
    if workers == 0 {
        return Err(invalid("workers must be at least 1"));
    }
    let window = matrix.window;
    let post_len = window.post_len();
    let jobs: Vec<_> = CrimeCategory::ALL
        .iter()
        .flat_map(|&c| (1..=NUM_COMMUNITIES as u8).map(move |id| (c, id)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start {workers} worker threads: {e}")))?;

    let outcomes: Vec<(ImpactResult, Option<String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(crime, id)| {
                let series = matrix.get(id, crime);
                let seed = model_seed(seed_base, id, crime);
                match causal_impact(series, &window, config, seed) {
                    Ok(r) => (r, None),
                    Err(e) => {
                        let actual = series.counts[series.counts.len() - post_len..]
                            .iter()
                            .map(|&c| c as u64)
                            .sum();
                        let r = ImpactResult {
                            community_id: id,
                            category: crime,
                            seed,
                            summary: failed_summary(actual),
                        };
                        (r, Some(e.to_string()))
                    }
                }
            })
            .collect()
    });

    let mut cr = CrMatrix::default();
    let mut results = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (r, err) in outcomes {
        cr.set(r.community_id, r.category, r.summary.cr);
        if let Some(message) = err {
            failures.push(ModelFailure {
                community_id: r.community_id,
                category: r.category,
                message,
            });
        }
        results.push(r);
    }
    Ok(BatchOutput { results, cr, failures })
}

/// One regression model's outcome; `fit` is `None` when skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub dimension: Dimension,
    pub crime: CrimeCategory,
    pub fit: Option<FirthFit>,
    /// Average marginal effect per coefficient (`None` for the intercept).
    pub marginal_effects: Vec<Option<f64>>,
    pub notes: Vec<String>,
    pub skipped: Option<String>,
}

/// All dimension x crime Firth fits, dimension-major.
pub fn run_regressions(
    cr: &CrMatrix,
    covs: &[CommunityCovariates],
    dimensions: &[Dimension],
    control: &ConvergenceControl,
) -> Result<Vec<RegressionModel>> {
    let mut out = Vec::new();
    for &dimension in dimensions {
        for crime in CrimeCategory::ALL {
            let positives = cr.count(crime);
            if positives == 0 || positives == NUM_COMMUNITIES {
                out.push(RegressionModel {
                    dimension,
                    crime,
                    fit: None,
                    marginal_effects: Vec::new(),
                    notes: Vec::new(),
                    skipped: Some(format!(
                        "{crime}: {positives} of {NUM_COMMUNITIES} communities have CR = 1, no variation to model"
                    )),
                });
                continue;
            }
            let fitted = build_design(covs, cr, dimension, crime).and_then(|design| {
                let f = fit(&design, control)?;
                let mut marginal_effects = vec![None];
                for j in 1..design.p() {
                    let kind = EffectKind::detect(&design.column(j));
                    marginal_effects.push(Some(average_marginal_effect(&f, &design, j, kind)?));
                }
                Ok((design, f, marginal_effects))
            });
            let (design, f, marginal_effects) = match fitted {
                Ok(v) => v,
                Err(e) => {
                    out.push(RegressionModel {
                        dimension,
                        crime,
                        fit: None,
                        marginal_effects: Vec::new(),
                        notes: Vec::new(),
                        skipped: Some(e.to_string()),
                    });
                    continue;
                }
            };
            let mut notes = design.notes.clone();
            if !f.converged {
                notes.push(format!("did not converge in {} iterations", f.iterations_used));
            }
            out.push(RegressionModel {
                dimension,
                crime,
                fit: Some(f),
                marginal_effects,
                notes,
                skipped: None,
            });
        }
    }
    Ok(out)
}
