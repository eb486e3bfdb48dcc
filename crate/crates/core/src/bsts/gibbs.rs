use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kalman::SimulationSmoother;
use super::model::{InitialState, Seasonality, StateSpaceModel, StateVector, Variances, SEASON_PERIOD};
use crate::error::{invalid, Error, Result};

/// Inverse-gamma prior on a variance, parameterized by a guess at the
/// standard deviation and the number of pseudo-observations behind it:
/// `1/sigma^2 ~ Gamma(weight / 2, rate = weight * sd_guess^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdPrior {
    pub sd_guess: f64,
    pub weight: f64,
}

impl SdPrior {
    pub fn new(sd_guess: f64, weight: f64) -> Self {
        SdPrior { sd_guess, weight }
    }

    pub fn shape(&self) -> f64 {
        self.weight / 2.0
    }

    pub fn scale(&self) -> f64 {
        self.weight * self.sd_guess * self.sd_guess / 2.0
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.sd_guess.is_finite() && self.sd_guess > 0.0) {
            return Err(invalid(format!("{what} prior sd guess must be positive, got {}", self.sd_guess)));
        }
        if !(self.weight.is_finite() && self.weight >= 1.0) {
            return Err(invalid(format!("{what} prior weight must be >= 1, got {}", self.weight)));
        }
        Ok(())
    }

    /// Draw from the conjugate full conditional given `n_terms` squared
    /// residuals summing to `sum_sq`. Proper for any data because the prior
    /// scale is positive.
    pub fn posterior_draw<R: Rng + ?Sized>(&self, n_terms: usize, sum_sq: f64, rng: &mut R) -> f64 {
        let shape = self.shape() + n_terms as f64 / 2.0;
        let rate = self.scale() + sum_sq / 2.0;
        let precision = Gamma::new(shape, 1.0 / rate)
            .expect("gamma parameters are positive")
            .sample(rng);
        (1.0 / precision).max(f64::MIN_POSITIVE)
    }
}

/// Default prior guesses as fractions of the series standard deviation.
pub const LEVEL_SD_FRACTION: f64 = 0.01;
pub const SEASONAL_SD_FRACTION: f64 = 0.01;
pub const OBS_SD_FRACTION: f64 = 0.8;
pub const STATE_PRIOR_WEIGHT: f64 = 32.0;
pub const OBS_PRIOR_WEIGHT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub level: SdPrior,
    pub obs: SdPrior,
    pub seasonal: SdPrior,
    /// Fit on the pre-period scaled to zero mean and unit variance.
    pub standardize: bool,
}

impl PriorSpec {
    /// Defaults for a series whose working-scale standard deviation is `sd`.
    pub fn scaled(sd: f64, standardize: bool) -> Self {
        PriorSpec {
            level: SdPrior::new(LEVEL_SD_FRACTION * sd, STATE_PRIOR_WEIGHT),
            obs: SdPrior::new(OBS_SD_FRACTION * sd, OBS_PRIOR_WEIGHT),
            seasonal: SdPrior::new(SEASONAL_SD_FRACTION * sd, STATE_PRIOR_WEIGHT),
            standardize,
        }
    }

    /// Defaults for fitting `series`: guesses relative to unit scale when
    /// standardizing, otherwise relative to the raw standard deviation.
    pub fn for_series(series: &[f64], standardize: bool) -> Self {
        if standardize {
            Self::scaled(1.0, true)
        } else {
            Self::scaled(Standardization::of(series).scale, false)
        }
    }

    pub fn validate(&self, seasonality: Seasonality) -> Result<()> {
        self.level.validate("level")?;
        self.obs.validate("observation")?;
        if seasonality == Seasonality::Weekly {
            self.seasonal.validate("seasonal")?;
        }
        Ok(())
    }
}

/// Affine map between the data and the working scale of the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub scale: f64,
}

impl Standardization {
    pub const IDENTITY: Standardization = Standardization { mean: 0.0, scale: 1.0 };

    /// Sample mean and standard deviation; a constant series gets scale 1.
    pub fn of(series: &[f64]) -> Self {
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let var = if series.len() > 1 {
            series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let sd = var.sqrt();
        Standardization {
            mean,
            scale: if sd > 1e-8 { sd } else { 1.0 },
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.mean) / self.scale
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.scale + self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seasonality: Seasonality,
    pub iterations: usize,
    pub burn_in: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seasonality: Seasonality::Weekly,
            iterations: 1000,
            burn_in: 100,
        }
    }
}

/// Retained MCMC draws: one variance triple and one end-of-sample state per
/// iteration after burn-in, on the working scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub seasonality: Seasonality,
    pub standardization: Standardization,
    pub variances: Vec<Variances>,
    /// State at the last fitted time point for each draw.
    pub final_states: Vec<StateVector>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }
}

/// Gibbs sampler alternating simulation-smoother state draws with conjugate
/// inverse-gamma variance draws.
pub fn gibbs_sample(
    series: &[f64],
    prior: &PriorSpec,
    config: &SamplerConfig,
    seed: u64,
) -> Result<PosteriorDraws> {
    let n = series.len();
    if n < 2 {
        return Err(invalid("need at least two pre-period observations"));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("series value at index {i} is not finite")));
    }
    if config.seasonality == Seasonality::Weekly && n < 3 * SEASON_PERIOD {
        return Err(invalid(format!(
            "weekly seasonality needs at least {} pre-period days, got {n}",
            3 * SEASON_PERIOD
        )));
    }
    if config.iterations <= config.burn_in {
        return Err(invalid(format!(
            "iterations ({}) must exceed burn-in ({})",
            config.iterations, config.burn_in
        )));
    }
    prior.validate(config.seasonality)?;

    let standardization = if prior.standardize {
        Standardization::of(series)
    } else {
        Standardization::IDENTITY
    };
    let y: Vec<f64> = series.iter().map(|&x| standardization.forward(x)).collect();
    let spread = Standardization::of(&y).scale;
    let initial = InitialState::Proper {
        level_mean: y[0],
        level_var: spread * spread,
        seasonal_var: spread * spread,
    };
    let seasonal = config.seasonality == Seasonality::Weekly;

    let mut rng = crate::rng::seeded(seed);
    let mut variances = Variances {
        obs: prior.obs.sd_guess.powi(2),
        level: prior.level.sd_guess.powi(2),
        seasonal: if seasonal { prior.seasonal.sd_guess.powi(2) } else { 0.0 },
    };
    let kept = config.iterations - config.burn_in;
    let mut out = PosteriorDraws {
        seasonality: config.seasonality,
        standardization,
        variances: Vec::with_capacity(kept),
        final_states: Vec::with_capacity(kept),
    };

    for iteration in 0..config.iterations {
        let model = StateSpaceModel {
            seasonality: config.seasonality,
            variances,
            initial,
        };
        let smoother = SimulationSmoother::new(&model, n)?;
        let states = smoother.draw(&y, &mut rng)?;
        let z = model.observation();

        let obs_ss: f64 = states
            .iter()
            .zip(&y)
            .map(|(a, yt)| (yt - z.dot(a)).powi(2))
            .sum();
        let level_ss: f64 = states.windows(2).map(|w| (w[1][0] - w[0][0]).powi(2)).sum();
        variances.obs = prior.obs.posterior_draw(n, obs_ss, &mut rng);
        variances.level = prior.level.posterior_draw(n - 1, level_ss, &mut rng);
        if seasonal {
            // omega_t = gamma_{t+1} + gamma_t + ... + gamma_{t-5}
            let seasonal_ss: f64 = states
                .windows(2)
                .map(|w| (w[1][1] + w[0].rows(1, SEASON_PERIOD - 1).sum()).powi(2))
                .sum();
            variances.seasonal = prior.seasonal.posterior_draw(n - 1, seasonal_ss, &mut rng);
        }
        if !(variances.obs.is_finite() && variances.level.is_finite() && variances.seasonal.is_finite()) {
            return Err(Error::Numerical(format!("non-finite variance draw at iteration {iteration}")));
        }

        if iteration >= config.burn_in {
            out.variances.push(variances);
            out.final_states.push(states[n - 1]);
        }
    }
    Ok(out)
}

/// Per-draw forecasts on the original data scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraws {
    /// `n_draws x post_length`
    pub daily: Vec<Vec<f64>>,
    /// Row sums of `daily`.
    pub cumulative: Vec<f64>,
}

impl PredictiveDraws {
    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn mean_cumulative(&self) -> f64 {
        self.cumulative.iter().sum::<f64>() / self.cumulative.len() as f64
    }

    pub fn mean_daily(&self) -> Vec<f64> {
        let len = self.daily.first().map_or(0, Vec::len);
        let n = self.daily.len() as f64;
        (0..len)
            .map(|t| self.daily.iter().map(|row| row[t]).sum::<f64>() / n)
            .collect()
    }
}

/// Propagate each draw's final state `post_length` steps with fresh level,
/// seasonal and observation noise from that draw's variances.
pub fn posterior_predict(draws: &PosteriorDraws, post_length: usize, seed: u64) -> Result<PredictiveDraws> {
    if draws.is_empty() {
        return Err(invalid("no posterior draws to predict from"));
    }
    if post_length == 0 {
        return Err(invalid("post-period length must be at least 1"));
    }
    let mut rng = crate::rng::seeded(seed);
    let shape = StateSpaceModel {
        seasonality: draws.seasonality,
        variances: draws.variances[0],
        initial: InitialState::Diffuse,
    };
    let t = shape.transition();
    let z = shape.observation();
    let seasonal = shape.has_seasonal();
    let std = draws.standardization;

    let mut daily = Vec::with_capacity(draws.len());
    let mut cumulative = Vec::with_capacity(draws.len());
    for (v, start) in draws.variances.iter().zip(&draws.final_states) {
        let (sd_obs, sd_level) = (v.obs.sqrt(), v.level.sqrt());
        let sd_seasonal = if seasonal { v.seasonal.sqrt() } else { 0.0 };
        let mut alpha = *start;
        let mut row = Vec::with_capacity(post_length);
        for _ in 0..post_length {
            let eta: f64 = rng.sample(StandardNormal);
            let omega: f64 = rng.sample(StandardNormal);
            let eps: f64 = rng.sample(StandardNormal);
            alpha = t * alpha;
            alpha[0] += sd_level * eta;
            alpha[1] += sd_seasonal * omega;
            row.push(std.inverse(z.dot(&alpha) + sd_obs * eps));
        }
        cumulative.push(row.iter().sum());
        daily.push(row);
    }
    Ok(PredictiveDraws { daily, cumulative })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_propagation() {
        let c = 3.25;
        let mut state = StateVector::zeros();
        state[0] = c;
        let draws = PosteriorDraws {
            seasonality: Seasonality::None,
            standardization: Standardization::IDENTITY,
            variances: vec![
                Variances {
                    obs: 1e-12,
                    level: 1e-12,
                    seasonal: 0.0
                };
                50
            ],
            final_states: vec![state; 50],
        };
        let pred = posterior_predict(&draws, 10, 3).unwrap();
        for (row, cum) in pred.daily.iter().zip(&pred.cumulative) {
            assert!((cum - 10.0 * c).abs() < 1e-4);
            assert_eq!(*cum, row.iter().sum::<f64>());
        }
        assert!(posterior_predict(&draws, 0, 3).is_err());
    }

    #[test]
    fn standardization_inverts() {
        let s = Standardization::of(&[1.0, 2.0, 3.0, 4.0]);
        for x in [-3.0, 0.0, 2.5, 10.0] {
            assert!((s.inverse(s.forward(x)) - x).abs() < 1e-12);
        }
        assert_eq!(Standardization::of(&[5.0; 10]).scale, 1.0);
    }

    #[test]
    fn input_validation() {
        let prior = PriorSpec::scaled(1.0, true);
        let cfg = SamplerConfig::default();
        assert!(gibbs_sample(&[1.0; 10], &prior, &cfg, 1).is_err());
        let bad = SamplerConfig {
            iterations: 10,
            burn_in: 10,
            ..cfg
        };
        assert!(gibbs_sample(&[1.0; 50], &prior, &bad, 1).is_err());
        let mut p = prior;
        p.obs.weight = 0.5;
        assert!(gibbs_sample(&[1.0; 50], &p, &cfg, 1).is_err());
    }

    #[test]
    fn degenerate_series_runs() {
        let cfg = SamplerConfig {
            iterations: 60,
            burn_in: 10,
            ..Default::default()
        };
        let prior = PriorSpec::for_series(&[0.0; 40], true);
        let d = gibbs_sample(&[0.0; 40], &prior, &cfg, 5).unwrap();
        assert_eq!(d.len(), 50);
        assert!(d.variances.iter().all(|v| v.obs > 0.0 && v.level > 0.0 && v.seasonal > 0.0));
    }
}
