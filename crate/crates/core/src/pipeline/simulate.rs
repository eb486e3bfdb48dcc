use std::io::Write;

use chrono::{Duration, NaiveTime};
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsts::{analyze_counts, ImpactConfig};
use crate::covariates::CommunityCovariates;
use crate::crime_data::{CrimeCategory, StudyWindow, NUM_COMMUNITIES};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, seeded};

/// Poisson series with a step change in rate at the intervention date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub pre_rate: f64,
    pub post_rate: f64,
    pub window: StudyWindow,
    pub n_replicates: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pre_rate", self.pre_rate), ("post_rate", self.post_rate)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be a finite rate >= 0, got {v}")));
            }
        }
        if self.n_replicates == 0 {
            return Err(invalid("n_replicates must be at least 1"));
        }
        self.window.validate()
    }

    /// True relative effect, `post_rate / pre_rate - 1`.
    pub fn true_rce(&self) -> f64 {
        self.post_rate / self.pre_rate - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub spec: SyntheticSpec,
    pub cr_rate: f64,
    /// Over non-degenerate replicates; NaN when there are none.
    pub mean_rce: f64,
    pub mean_p: f64,
    pub degenerate: usize,
    pub replicates: Vec<ReplicateOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub seed: u64,
    pub rce: Option<f64>,
    pub p_value: f64,
    pub cr: bool,
}

fn poisson_counts(rate: f64, len: usize, rng: &mut crate::rng::Rng) -> Result<Vec<u32>> {
    if rate == 0.0 {
        return Ok(vec![0; len]);
    }
    let d = Poisson::new(rate).map_err(|e| Error::Numerical(format!("poisson rate {rate}: {e}")))?;
    Ok((0..len).map(|_| d.sample(rng) as u32).collect())
}

/// Size / power run of the detector on `n_replicates` synthetic series.
pub fn simulate(spec: &SyntheticSpec, config: &ImpactConfig, workers: usize) -> Result<SimulationReport> {
    spec.validate()?;
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start worker threads: {e}")))?;
    let replicates: Vec<ReplicateOutcome> = pool.install(|| {
        (0..spec.n_replicates as u64)
            .into_par_iter()
            .map(|r| -> Result<ReplicateOutcome> {
                let seed = derive_seed(spec.seed, r);
                let mut rng = seeded(derive_seed(seed, 2));
                let pre = poisson_counts(spec.pre_rate, spec.window.pre_len(), &mut rng)?;
                let post = poisson_counts(spec.post_rate, spec.window.post_len(), &mut rng)?;
                let (s, _) = analyze_counts(&pre, &post, config, seed)?;
                Ok(ReplicateOutcome {
                    seed,
                    rce: s.rce,
                    p_value: s.p_value,
                    cr: s.cr,
                })
            })
            .collect::<Result<_>>()
    })?;
    let n = replicates.len() as f64;
    let rces: Vec<f64> = replicates.iter().filter_map(|r| r.rce).collect();
    Ok(SimulationReport {
        spec: *spec,
        cr_rate: replicates.iter().filter(|r| r.cr).count() as f64 / n,
        mean_rce: rces.iter().sum::<f64>() / rces.len() as f64,
        mean_p: replicates.iter().map(|r| r.p_value).sum::<f64>() / n,
        degenerate: replicates.len() - rces.len(),
        replicates,
    })
}

/// Base daily rate per community for each crime in the synthetic city.
const CITY_RATES: [f64; 4] = [0.35, 0.75, 0.5, 0.3];

/// Writes a portal-style crime export (`ID,Date,IUCR,Community Area`) for a
/// synthetic city: community-specific Poisson rates with a weekly pattern
/// and, for a subset of communities, a drop after the intervention.
pub fn write_synthetic_crimes<W: Write>(window: &StudyWindow, seed: u64, writer: W) -> Result<usize> {
    let mut rng = seeded(derive_seed(seed, 10));
    let spread = LogNormal::new(0.0, 0.6).expect("valid lognormal");
    let weekday = [1.0, 0.95, 0.95, 1.0, 1.1, 1.15, 0.85];
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ID", "Date", "IUCR", "Community Area"])?;
    let mut id = 0u64;
    for crime in CrimeCategory::ALL {
        let codes = crime.iucr_codes();
        for community in 1..=NUM_COMMUNITIES {
            let rate = CITY_RATES[crime.index()] * spread.sample(&mut rng);
            let drop = if rng.random_bool(0.4) { rng.random_range(0.3..0.8) } else { 1.0 };
            for day in 0..window.len() {
                let date = window.date_at(day);
                let mut lambda = rate * weekday[day % 7];
                if date >= window.post_start {
                    lambda *= drop;
                }
                let n = Poisson::new(lambda).map(|d| d.sample(&mut rng) as u32).unwrap_or(0);
                for _ in 0..n {
                    id += 1;
                    let secs = rng.random_range(0..86_400u32);
                    let ts = date.and_time(NaiveTime::MIN) + Duration::seconds(secs as i64);
                    let code = codes[rng.random_range(0..codes.len())];
                    w.write_record([
                        id.to_string(),
                        ts.format("%m/%d/%Y %I:%M:%S %p").to_string(),
                        code.to_string(),
                        community.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::Validation(format!("writing synthetic crimes: {e}")))?;
    Ok(id as usize)
}

/// A plausible random covariate table for all 77 communities.
pub fn synthetic_covariates(seed: u64) -> Vec<CommunityCovariates> {
    let mut rng = seeded(derive_seed(seed, 11));
    (1..=NUM_COMMUNITIES as u8)
        .map(|id| CommunityCovariates {
            community_id: id,
            burglary_rate_2019: rng.random_range(5.0..80.0),
            assault_rate_2019: rng.random_range(10.0..200.0),
            narcotics_rate_2019: rng.random_range(2.0..400.0),
            robbery_rate_2019: rng.random_range(5.0..120.0),
            neighborhood_safety: rng.random_range(25.0..95.0),
            has_police: rng.random_bool(0.35) as u8,
            population_k: rng.random_range(3.0..100.0),
            income_diversity: rng.random_range(0.2..0.9),
            crowded_housing_pct: rng.random_range(0.5..15.0),
            vacant_housing_pct: rng.random_range(2.0..35.0),
            poverty_rate: rng.random_range(3.0..55.0),
            pct_over_65: rng.random_range(5.0..25.0),
            pct_under_18: rng.random_range(10.0..32.0),
            overall_health: rng.random_range(45.0..90.0),
            covid_case_rate_10k: rng.random_range(30.0..350.0),
        })
        .collect()
}

pub fn write_covariates_csv<W: Write>(rows: &[CommunityCovariates], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("writing covariates: {e}")))?;
    Ok(())
}
