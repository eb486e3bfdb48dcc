//! Kalman filtering and smoothing for [`StateSpaceModel`].
//!
//! The covariance recursion does not depend on the data, so it is computed
//! once per set of variances ([`CovarianceRecursion`]) and shared by the
//! mean filter, the state smoother and the simulation smoother.

use rand::Rng;
use rand_distr::StandardNormal;

use super::model::{StateMatrix, StateSpaceModel, StateVector};
use crate::error::{invalid, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// Sum of one-step-ahead Gaussian log densities, diffuse steps excluded.
    pub log_likelihood: f64,
    /// `a_t = E[alpha_t | y_1..y_{t-1}]`
    pub predicted_means: Vec<StateVector>,
    pub predicted_covs: Vec<StateMatrix>,
    /// `E[alpha_t | y_1..y_t]`
    pub filtered_means: Vec<StateVector>,
    pub filtered_covs: Vec<StateMatrix>,
    /// One-step prediction errors `v_t`.
    pub innovations: Vec<f64>,
    pub innovation_variances: Vec<f64>,
}

impl FilterOutput {
    pub fn filtered_level(&self) -> Vec<f64> {
        self.filtered_means.iter().map(|a| a[0]).collect()
    }

    pub fn filtered_level_variance(&self) -> Vec<f64> {
        self.filtered_covs.iter().map(|p| p[(0, 0)]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SmootherOutput {
    pub means: Vec<StateVector>,
    pub covs: Vec<StateMatrix>,
}

impl SmootherOutput {
    pub fn level(&self) -> Vec<f64> {
        self.means.iter().map(|a| a[0]).collect()
    }
}

/// Predicted state covariances `P_t`, innovation variances `F_t` and gains
/// `K_t = T P_t Z / F_t` for a series of a given length.
#[derive(Debug, Clone)]
pub struct CovarianceRecursion {
    t: StateMatrix,
    z: StateVector,
    p: Vec<StateMatrix>,
    f: Vec<f64>,
    k: Vec<StateVector>,
}

impl CovarianceRecursion {
    pub fn new(model: &StateSpaceModel, len: usize) -> Result<Self> {
        let t = model.transition();
        let z = model.observation();
        let q = model.state_noise();
        let h = model.variances.obs;
        let (_, mut p_t) = model.initial_moments();
        let tt = t.transpose();

        let mut p = Vec::with_capacity(len);
        let mut f = Vec::with_capacity(len);
        let mut k = Vec::with_capacity(len);
        for step in 0..len {
            let pz = p_t * z;
            let f_t = z.dot(&pz) + h;
            if !(f_t.is_finite() && f_t > 0.0) {
                return Err(Error::Numerical(format!(
                    "innovation variance {f_t} at step {step} is not positive"
                )));
            }
            let k_t = t * pz / f_t;
            let mut next = t * p_t * tt - k_t * k_t.transpose() * f_t + q;
            next = (next + next.transpose()) * 0.5;
            p.push(p_t);
            f.push(f_t);
            k.push(k_t);
            p_t = next;
        }
        Ok(CovarianceRecursion { t, z, p, f, k })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Predicted means and innovations for `y` starting from mean `a1`.
    fn mean_pass(&self, y: &[f64], a1: StateVector) -> (Vec<StateVector>, Vec<f64>) {
        let mut a = a1;
        let mut means = Vec::with_capacity(y.len());
        let mut innovations = Vec::with_capacity(y.len());
        for (i, &obs) in y.iter().enumerate() {
            let v = obs - self.z.dot(&a);
            means.push(a);
            innovations.push(v);
            a = self.t * a + self.k[i] * v;
        }
        (means, innovations)
    }

    /// Backward smoothing recursion for the state means.
    fn smooth_means(&self, means: &[StateVector], innovations: &[f64]) -> Vec<StateVector> {
        let n = means.len();
        let mut out = vec![StateVector::zeros(); n];
        let mut r = StateVector::zeros();
        for i in (0..n).rev() {
            // r_{t-1} = Z v_t / F_t + L_t' r_t,  L_t = T - K_t Z'
            let lr = self.t.tr_mul(&r) - self.z * self.k[i].dot(&r);
            r = self.z * (innovations[i] / self.f[i]) + lr;
            out[i] = means[i] + self.p[i] * r;
        }
        out
    }
}

fn check_series(series: &[f64]) -> Result<()> {
    if series.is_empty() {
        return Err(invalid("series must not be empty"));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("series value at index {i} is not finite")));
    }
    Ok(())
}

pub fn kalman_filter(series: &[f64], model: &StateSpaceModel) -> Result<FilterOutput> {
    check_series(series)?;
    model.validate()?;
    let cov = CovarianceRecursion::new(model, series.len())?;
    let (a1, _) = model.initial_moments();
    let (predicted_means, innovations) = cov.mean_pass(series, a1);

    let skip = model.diffuse_steps();
    let mut log_likelihood = 0.0;
    let mut filtered_means = Vec::with_capacity(series.len());
    let mut filtered_covs = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        let (p, f, v) = (&cov.p[i], cov.f[i], innovations[i]);
        if i >= skip {
            log_likelihood -= 0.5 * (LN_2PI + f.ln() + v * v / f);
        }
        let pz = p * cov.z;
        filtered_means.push(predicted_means[i] + pz * (v / f));
        let mut pf = p - pz * pz.transpose() / f;
        pf = (pf + pf.transpose()) * 0.5;
        filtered_covs.push(pf);
    }
    Ok(FilterOutput {
        log_likelihood,
        predicted_means,
        predicted_covs: cov.p.clone(),
        filtered_means,
        filtered_covs,
        innovation_variances: cov.f.clone(),
        innovations,
    })
}

/// Smoothed state means and covariances `E[alpha_t | y]`, `Var[alpha_t | y]`.
pub fn state_smoother(series: &[f64], model: &StateSpaceModel) -> Result<SmootherOutput> {
    check_series(series)?;
    model.validate()?;
    let cov = CovarianceRecursion::new(model, series.len())?;
    let (a1, _) = model.initial_moments();
    let (pred, innov) = cov.mean_pass(series, a1);
    let means = cov.smooth_means(&pred, &innov);

    let n = series.len();
    let mut covs = vec![StateMatrix::zeros(); n];
    let mut big_n = StateMatrix::zeros();
    for i in (0..n).rev() {
        let l = cov.t - cov.k[i] * cov.z.transpose();
        big_n = cov.z * cov.z.transpose() / cov.f[i] + l.transpose() * big_n * l;
        let p = &cov.p[i];
        let mut v = p - p * big_n * p;
        v = (v + v.transpose()) * 0.5;
        covs[i] = v;
    }
    Ok(SmootherOutput { means, covs })
}

/// Draws whole state paths from `p(alpha | y)` by mean correction: simulate
/// `(alpha+, y+)` from the model, then shift by the smoothed mean of `y - y+`.
#[derive(Debug, Clone)]
pub struct SimulationSmoother {
    model: StateSpaceModel,
    cov: CovarianceRecursion,
}

impl SimulationSmoother {
    pub fn new(model: &StateSpaceModel, len: usize) -> Result<Self> {
        model.validate()?;
        Ok(SimulationSmoother {
            model: *model,
            cov: CovarianceRecursion::new(model, len)?,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, series: &[f64], rng: &mut R) -> Result<Vec<StateVector>> {
        if series.len() != self.cov.len() {
            return Err(invalid(format!(
                "simulation smoother built for {} steps, got {}",
                self.cov.len(),
                series.len()
            )));
        }
        let model = &self.model;
        let (a1, p1) = model.initial_moments();
        let sd_obs = model.variances.obs.sqrt();
        let sd_level = model.variances.level.sqrt();
        let sd_seasonal = if model.has_seasonal() {
            model.variances.seasonal.sqrt()
        } else {
            0.0
        };

        let mut alpha = StateVector::zeros();
        for j in 0..alpha.len() {
            let e: f64 = rng.sample(StandardNormal);
            alpha[j] = a1[j] + p1[(j, j)].sqrt() * e;
        }
        let n = series.len();
        let mut sim_states = Vec::with_capacity(n);
        let mut y_star = Vec::with_capacity(n);
        for &y in series {
            let eps: f64 = rng.sample(StandardNormal);
            let y_plus = self.cov.z.dot(&alpha) + sd_obs * eps;
            y_star.push(y - y_plus);
            sim_states.push(alpha);
            let eta: f64 = rng.sample(StandardNormal);
            let omega: f64 = rng.sample(StandardNormal);
            alpha = self.cov.t * alpha;
            alpha[0] += sd_level * eta;
            alpha[1] += sd_seasonal * omega;
        }
        let (pred, innov) = self.cov.mean_pass(&y_star, StateVector::zeros());
        let correction = self.cov.smooth_means(&pred, &innov);
        Ok(sim_states
            .into_iter()
            .zip(correction)
            .map(|(s, c)| s + c)
            .collect())
    }
}

/// One joint draw of all states given the data, seeded.
pub fn simulation_smoother(series: &[f64], model: &StateSpaceModel, seed: u64) -> Result<Vec<StateVector>> {
    check_series(series)?;
    let mut rng = crate::rng::seeded(seed);
    SimulationSmoother::new(model, series.len())?.draw(series, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsts::model::{InitialState, Seasonality, Variances};

    #[test]
    fn constant_series_static_level() {
        let c = 4.5;
        let m = StateSpaceModel::local_level(1.0, 1e-12, InitialState::Diffuse);
        let out = kalman_filter(&[c, c, c], &m).unwrap();
        for (i, lvl) in out.filtered_level().iter().enumerate() {
            assert!((lvl - c).abs() < 1e-5, "step {i}: {lvl}");
        }
        for v in &out.innovations[1..] {
            assert!(v.abs() < 1e-5);
        }
        assert!(out.filtered_level_variance().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_series_zero_level() {
        let m = StateSpaceModel {
            seasonality: Seasonality::Weekly,
            variances: Variances {
                obs: 0.7,
                level: 0.2,
                seasonal: 0.05,
            },
            initial: InitialState::Diffuse,
        };
        let out = kalman_filter(&[0.0; 30], &m).unwrap();
        assert!(out.filtered_level().iter().all(|l| *l == 0.0));
        let s = state_smoother(&[0.0; 30], &m).unwrap();
        assert!(s.level().iter().all(|l| *l == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let m = StateSpaceModel::local_level(1.0, 0.1, InitialState::Diffuse);
        assert!(kalman_filter(&[], &m).is_err());
        assert!(kalman_filter(&[1.0, f64::NAN], &m).is_err());
        assert!(kalman_filter(&[1.0, f64::INFINITY], &m).is_err());
    }

    #[test]
    fn smoother_ends_at_filter() {
        let m = StateSpaceModel::local_level(
            0.5,
            0.3,
            InitialState::Proper {
                level_mean: 0.0,
                level_var: 2.0,
                seasonal_var: 0.0,
            },
        );
        let y = [1.0, 0.3, -0.4, 2.2, 1.9];
        let f = kalman_filter(&y, &m).unwrap();
        let s = state_smoother(&y, &m).unwrap();
        let n = y.len() - 1;
        assert!((f.filtered_means[n][0] - s.means[n][0]).abs() < 1e-12);
        assert!((f.filtered_covs[n][(0, 0)] - s.covs[n][(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn seeded_draw_is_reproducible() {
        let m = StateSpaceModel::local_level(1.0, 0.1, InitialState::Diffuse);
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        let a = simulation_smoother(&y, &m, 99).unwrap();
        let b = simulation_smoother(&y, &m, 99).unwrap();
        let c = simulation_smoother(&y, &m, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
