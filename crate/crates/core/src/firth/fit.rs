use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use crate::error::{invalid, Error, Result};
use crate::stats::{chi2_sf, normal_two_sided_p};

/// Condition number of the (column-equilibrated) information matrix above
/// which the design is treated as collinear.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceControl {
    pub max_iterations: usize,
    /// On the largest absolute modified score component.
    pub tol_score: f64,
    /// On the largest absolute coefficient change.
    pub tol_beta: f64,
    pub max_step_halvings: usize,
}

impl Default for ConvergenceControl {
    fn default() -> Self {
        ConvergenceControl {
            max_iterations: 100,
            tol_score: 1e-8,
            tol_beta: 1e-8,
            max_step_halvings: 25,
        }
    }
}

impl ConvergenceControl {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || self.max_step_halvings == 0
            || !(self.tol_score > 0.0)
            || !(self.tol_beta > 0.0)
        {
            return Err(invalid("convergence controls must all be positive"));
        }
        Ok(())
    }
}

/// Result of a Firth penalized-likelihood logistic fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirthFit {
    pub column_names: Vec<String>,
    pub n: usize,
    pub beta: Vec<f64>,
    /// Square roots of the diagonal of the inverse information at `beta`.
    pub se: Vec<f64>,
    pub odds_ratios: Vec<f64>,
    /// Delta-method standard errors of the odds ratios, `exp(b) * se(b)`.
    pub or_se: Vec<f64>,
    pub wald_z: Vec<f64>,
    pub wald_p: Vec<f64>,
    /// `l(beta) + 0.5 log det I(beta)` at the estimate.
    pub penalized_loglik: f64,
    /// Penalized log-likelihood of the intercept-only restriction (same
    /// penalty, all slopes fixed at zero).
    pub null_penalized_loglik: f64,
    pub model_chi2: f64,
    pub model_df: usize,
    pub model_p: f64,
    pub converged: bool,
    pub iterations_used: usize,
    /// Penalized log-likelihood after each accepted Newton step, starting at
    /// `beta = 0`.
    pub loglik_trace: Vec<f64>,
}

impl FirthFit {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn coefficient(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Everything the Newton iteration needs at one coefficient vector.
struct Evaluation {
    pll: f64,
    /// Modified score `X'(y - pi + h (1/2 - pi))`.
    score: DVector<f64>,
    info: DMatrix<f64>,
    /// Negated Hessian of the penalized log-likelihood, i.e. the Jacobian
    /// of minus the modified score.
    neg_hessian: DMatrix<f64>,
}

fn evaluate(data: &DesignMatrix, beta: &DVector<f64>) -> Option<Evaluation> {
    let x = data.x();
    let y = data.y();
    let eta = x * beta;
    let n = data.n();
    let mut pi = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    let mut loglik = 0.0;
    for i in 0..n {
        let p = logistic(eta[i]);
        pi[i] = p;
        w[i] = p * (1.0 - p);
        loglik -= if y[i] == 1.0 { softplus(-eta[i]) } else { softplus(eta[i]) };
    }
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= w[i].sqrt();
    }
    let info = xw.tr_mul(&xw);
    let chol = info.clone().cholesky()?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    // Q = X I^{-1} X' = G'G with G = L^{-1} X'; h_i = w_i Q_ii.
    let g = chol.l().solve_lower_triangular(&x.transpose())?;
    let q = g.tr_mul(&g);
    let mut resid = DVector::zeros(n);
    // dw/deta = w (1 - 2 pi), d^2w/deta^2 = w (1 - 6 w).
    let mut curv = x.clone();
    let mut a = x.clone();
    for i in 0..n {
        let h = w[i] * q[(i, i)];
        resid[i] = y[i] - pi[i] + h * (0.5 - pi[i]);
        let d1 = w[i] * (1.0 - 2.0 * pi[i]);
        let d2 = w[i] * (1.0 - 6.0 * w[i]);
        curv.row_mut(i).scale_mut(0.5 * q[(i, i)] * d2);
        a.row_mut(i).scale_mut(d1);
    }
    let q2 = q.map(|v| v * v);
    let hessian = -&info + x.tr_mul(&curv) - 0.5 * a.tr_mul(&(q2 * &a));
    Some(Evaluation {
        pll: loglik + 0.5 * logdet,
        score: x.tr_mul(&resid),
        info,
        neg_hessian: -hessian,
    })
}

/// Check for (near-)collinear columns on the column-equilibrated design.
fn check_collinearity(data: &DesignMatrix) -> Result<()> {
    let mut x = data.x().clone();
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let names = data.column_names();
    let svd = x.svd(false, true);
    let s = &svd.singular_values;
    let (imin, smin) = s.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| {
        if v < acc.1 {
            (i, v)
        } else {
            acc
        }
    });
    let smax = s.max();
    let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if condition > CONDITION_LIMIT {
        let v_t = svd.v_t.expect("requested V^T");
        let null = v_t.row(imin);
        let peak = null.amax();
        let columns = (0..data.p())
            .filter(|&j| null[j].abs() > 0.01 * peak)
            .map(|j| names[j].clone())
            .collect();
        return Err(Error::Collinear { columns, condition });
    }
    Ok(())
}

struct RawFit {
    beta: DVector<f64>,
    eval: Evaluation,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
}

/// Modified-score Newton iteration with step-halving on the penalized
/// log-likelihood. Coefficients outside `free` stay at zero while the
/// penalty keeps using the full design.
fn newton(data: &DesignMatrix, free: &[usize], control: &ConvergenceControl) -> Result<RawFit> {
    let p = data.p();
    let mut beta = DVector::zeros(p);
    let mut eval = evaluate(data, &beta)
        .ok_or_else(|| Error::Numerical("information matrix is singular at beta = 0".into()))?;
    let mut trace = vec![eval.pll];
    let mut last_step = f64::INFINITY;

    let max_free = |e: &Evaluation| free.iter().map(|&j| e.score[j].abs()).fold(0.0, f64::max);

    for iteration in 0..=control.max_iterations {
        let k = free.len();
        let info_ff = DMatrix::from_fn(k, k, |a, b| eval.info[(free[a], free[b])]);
        let score_f = DVector::from_fn(k, |a, _| eval.score[free[a]]);
        // Newton on the modified score where the penalized surface is
        // locally concave, Fisher scoring otherwise.
        let hess_ff = DMatrix::from_fn(k, k, |a, b| eval.neg_hessian[(free[a], free[b])]);
        let delta_f = match hess_ff.cholesky() {
            Some(c) => c.solve(&score_f),
            None => info_ff
                .cholesky()
                .ok_or_else(|| {
                    Error::Numerical(format!("information matrix not positive definite at iteration {iteration}"))
                })?
                .solve(&score_f),
        };
        let max_score = max_free(&eval);
        if delta_f.amax() < control.tol_beta && max_score < control.tol_score {
            // Take the final sub-tolerance step, as the iteration would.
            let mut candidate = beta.clone();
            for (a, &j) in free.iter().enumerate() {
                candidate[j] += delta_f[a];
            }
            if let Some(e) = evaluate(data, &candidate) {
                if e.pll >= eval.pll - 1e-13 * eval.pll.abs().max(1.0) {
                    beta = candidate;
                    eval = e;
                }
            }
            return Ok(RawFit {
                beta,
                eval,
                converged: true,
                iterations: iteration,
                trace,
            });
        }
        if iteration == control.max_iterations {
            break;
        }

        // A step must raise the penalized log-likelihood, or, where it is
        // flat to rounding, shrink the score.
        let slack = 1e-13 * eval.pll.abs().max(1.0);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=control.max_step_halvings {
            let mut candidate = beta.clone();
            for (a, &j) in free.iter().enumerate() {
                candidate[j] += scale * delta_f[a];
            }
            if let Some(e) = evaluate(data, &candidate) {
                let gain = e.pll - eval.pll;
                if gain > slack || (gain >= -slack && max_free(&e) < max_score) {
                    accepted = Some((candidate, e));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((candidate, next)) = accepted else {
            return Err(Error::NonConvergence {
                iterations: iteration,
                max_score,
                last_step,
            });
        };
        last_step = scale * delta_f.amax();
        beta = candidate;
        eval = next;
        trace.push(eval.pll);
    }
    Ok(RawFit {
        beta,
        eval,
        converged: false,
        iterations: control.max_iterations,
        trace,
    })
}

/// Fit by maximizing `l(beta) + 0.5 log det(X'WX)`.
pub fn fit(data: &DesignMatrix, control: &ConvergenceControl) -> Result<FirthFit> {
    control.validate()?;
    check_collinearity(data)?;
    let p = data.p();
    let all: Vec<usize> = (0..p).collect();
    let full = newton(data, &all, control)?;
    let null = newton(data, &[data.intercept_index()], control)?;

    let cov = full
        .eval
        .info
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("information matrix singular at the estimate".into()))?
        .inverse();
    let beta: Vec<f64> = full.beta.iter().copied().collect();
    let se: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    let wald_z: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let wald_p = wald_z.iter().map(|&z| normal_two_sided_p(z)).collect();
    let model_df = p - 1;
    let (model_chi2, model_p) = lr_statistic(full.eval.pll, null.eval.pll, model_df)?;

    Ok(FirthFit {
        column_names: data.column_names().to_vec(),
        n: data.n(),
        odds_ratios: beta.iter().map(|b| b.exp()).collect(),
        or_se: beta.iter().zip(&se).map(|(b, s)| b.exp() * s).collect(),
        beta,
        se,
        wald_z,
        wald_p,
        penalized_loglik: full.eval.pll,
        null_penalized_loglik: null.eval.pll,
        model_chi2,
        model_df,
        model_p,
        converged: full.converged && null.converged,
        iterations_used: full.iterations,
        loglik_trace: full.trace,
    })
}

/// Slack allowed on a negative likelihood-ratio statistic before it is
/// treated as an optimizer failure.
pub const LR_SLACK: f64 = 1e-8;

fn lr_statistic(full: f64, null: f64, df: usize) -> Result<(f64, f64)> {
    let chi2 = 2.0 * (full - null);
    if chi2 < -LR_SLACK {
        return Err(Error::Numerical(format!(
            "negative likelihood-ratio statistic {chi2:.3e}: the restricted fit beat the full fit"
        )));
    }
    let chi2 = chi2.max(0.0);
    Ok((chi2, chi2_sf(chi2, df)))
}

/// Penalized likelihood-ratio test of `full` against its intercept-only
/// restriction `null`.
pub fn penalized_lr_test(full: &FirthFit, null: &FirthFit, df: usize) -> Result<(f64, f64)> {
    lr_statistic(full.penalized_loglik, null.penalized_loglik, df)
}

/// Per-coefficient Wald `(z, p)`.
pub fn wald_stats(fit: &FirthFit) -> Result<Vec<(f64, f64)>> {
    fit.beta
        .iter()
        .zip(&fit.se)
        .zip(&fit.column_names)
        .map(|((b, s), name)| {
            if !(*s > 0.0) {
                return Err(invalid(format!("standard error of '{name}' is zero")));
            }
            let z = b / s;
            Ok((z, normal_two_sided_p(z)))
        })
        .collect()
}

/// Significance marks at the 90/95/99/99.9% levels.
pub fn significance_stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "****",
        p if p < 0.01 => "***",
        p if p < 0.05 => "**",
        p if p < 0.1 => "*",
        _ => "",
    }
}

/// Fitted probabilities for new rows.
pub fn predict(fit: &FirthFit, x_new: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x_new.ncols() != fit.p() {
        return Err(invalid(format!(
            "new data has {} columns, model has {}",
            x_new.ncols(),
            fit.p()
        )));
    }
    Ok(x_new
        .row_iter()
        .map(|row| logistic(row.iter().zip(&fit.beta).map(|(x, b)| x * b).sum()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectKind {
    Continuous,
    /// Discrete change from 0 to 1.
    Binary,
}

impl EffectKind {
    /// Binary when every value is 0 or 1.
    pub fn detect(values: &[f64]) -> Self {
        if values.iter().all(|&v| v == 0.0 || v == 1.0) {
            EffectKind::Binary
        } else {
            EffectKind::Continuous
        }
    }
}

/// Average marginal effect of column `j` on the probability scale.
pub fn average_marginal_effect(fit: &FirthFit, data: &DesignMatrix, j: usize, kind: EffectKind) -> Result<f64> {
    if j >= data.p() || data.p() != fit.p() {
        return Err(invalid(format!("column {j} not in a {}-column model", fit.p())));
    }
    if j == data.intercept_index() {
        return Err(invalid("marginal effect of the intercept is undefined"));
    }
    let x = data.x();
    let n = data.n() as f64;
    let eta = |i: usize, value: Option<f64>| -> f64 {
        (0..fit.p())
            .map(|k| {
                let xv = if k == j { value.unwrap_or(x[(i, k)]) } else { x[(i, k)] };
                xv * fit.beta[k]
            })
            .sum()
    };
    let total: f64 = (0..data.n())
        .map(|i| match kind {
            EffectKind::Continuous => {
                let p = logistic(eta(i, None));
                fit.beta[j] * p * (1.0 - p)
            }
            EffectKind::Binary => logistic(eta(i, Some(1.0))) - logistic(eta(i, Some(0.0))),
        })
        .sum();
    Ok(total / n)
}
