use crimpact_core::bsts::{InitialState, Seasonality, StateSpaceModel, Variances};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Exact log-density of the series under the model, built from the dense
/// joint covariance of (y_1..y_n). State layout is rebuilt here by hand.
pub fn dense_loglik(series: &[f64], model: &StateSpaceModel) -> f64 {
    let weekly = model.seasonality == Seasonality::Weekly;
    let m = if weekly { 7 } else { 1 };
    let mut t = DMatrix::<f64>::zeros(m, m);
    t[(0, 0)] = 1.0;
    if weekly {
        for j in 1..7 {
            t[(1, j)] = -1.0;
        }
        for j in 2..7 {
            t[(j, j - 1)] = 1.0;
        }
    }
    let mut z = DVector::<f64>::zeros(m);
    z[0] = 1.0;
    if weekly {
        z[1] = 1.0;
    }
    let mut q = DMatrix::<f64>::zeros(m, m);
    q[(0, 0)] = model.variances.level;
    if weekly {
        q[(1, 1)] = model.variances.seasonal;
    }
    let InitialState::Proper {
        level_mean,
        level_var,
        seasonal_var,
    } = model.initial
    else {
        panic!("oracle needs a proper prior");
    };
    let mut a = DVector::<f64>::zeros(m);
    a[0] = level_mean;
    let mut p = DMatrix::<f64>::from_diagonal_element(m, m, seasonal_var);
    p[(0, 0)] = level_var;

    let n = series.len();
    let mut means = Vec::with_capacity(n);
    let mut vars = Vec::with_capacity(n);
    for _ in 0..n {
        means.push(a.clone());
        vars.push(p.clone());
        a = &t * &a;
        p = &t * &p * t.transpose() + &q;
    }
    let mut mu = DVector::<f64>::zeros(n);
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        mu[s] = z.dot(&means[s]);
        let mut cross = vars[s].clone();
        for u in s..n {
            // Cov(alpha_u, alpha_s) = T^(u-s) Var(alpha_s)
            let c = z.dot(&(&cross * &z));
            cov[(s, u)] = c;
            cov[(u, s)] = c;
            cross = &t * cross;
        }
        cov[(s, s)] += model.variances.obs;
    }
    let chol = cov.cholesky().expect("covariance is positive definite");
    let resid = DVector::from_column_slice(series) - mu;
    let white = chol.l().solve_lower_triangular(&resid).unwrap();
    let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + white.norm_squared())
}

pub fn random_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, StateSpaceModel) {
    let n = rng.random_range(1..=8);
    let seasonality = if rng.random_bool(0.5) { Seasonality::Weekly } else { Seasonality::None };
    let model = StateSpaceModel {
        seasonality,
        variances: Variances {
            obs: rng.random_range(0.05..4.0),
            level: rng.random_range(0.01..2.0),
            seasonal: rng.random_range(0.01..2.0),
        },
        initial: InitialState::Proper {
            level_mean: rng.random_range(-5.0..5.0),
            level_var: rng.random_range(0.1..10.0),
            seasonal_var: rng.random_range(0.1..10.0),
        },
    };
    let series = (0..n).map(|_| rng.random_range(-6.0..6.0)).collect();
    (series, model)
}
