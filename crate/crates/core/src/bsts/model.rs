use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const SEASON_PERIOD: usize = 7;

/// Level plus `SEASON_PERIOD - 1` seasonal lags. Without a seasonal
/// component the seasonal block stays pinned at zero.
pub const STATE_DIM: usize = SEASON_PERIOD;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Prior variance given to each active state when `InitialState::Diffuse`.
pub const DIFFUSE_VARIANCE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Seasonality {
    None,
    #[default]
    Weekly,
}

impl std::str::FromStr for Seasonality {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Seasonality::None),
            "weekly" => Ok(Seasonality::Weekly),
            other => Err(invalid(format!("seasonal must be 'none' or 'weekly', got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variances {
    pub obs: f64,
    pub level: f64,
    /// Ignored when the model has no seasonal component.
    pub seasonal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// Large-variance approximation to a diffuse prior; the first
    /// `active_states()` one-step densities are left out of the likelihood.
    Diffuse,
    /// Independent normals: level ~ N(level_mean, level_var), each seasonal
    /// lag ~ N(0, seasonal_var).
    Proper {
        level_mean: f64,
        level_var: f64,
        seasonal_var: f64,
    },
}

/// Local level model with an optional period-7 dummy seasonal:
///
/// `y_t = mu_t + gamma_t + eps_t`
/// `mu_{t+1} = mu_t + eta_t`
/// `gamma_{t+1} = -(gamma_t + ... + gamma_{t-5}) + omega_t`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceModel {
    pub seasonality: Seasonality,
    pub variances: Variances,
    pub initial: InitialState,
}

impl StateSpaceModel {
    pub fn local_level(obs: f64, level: f64, initial: InitialState) -> Self {
        StateSpaceModel {
            seasonality: Seasonality::None,
            variances: Variances {
                obs,
                level,
                seasonal: 0.0,
            },
            initial,
        }
    }

    pub fn has_seasonal(&self) -> bool {
        self.seasonality == Seasonality::Weekly
    }

    pub fn active_states(&self) -> usize {
        if self.has_seasonal() {
            STATE_DIM
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.variances;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(v.obs) || !positive(v.level) {
            return Err(invalid(format!(
                "observation and level variances must be positive, got {} and {}",
                v.obs, v.level
            )));
        }
        if self.has_seasonal() && !positive(v.seasonal) {
            return Err(invalid(format!("seasonal variance must be positive, got {}", v.seasonal)));
        }
        if let InitialState::Proper {
            level_mean,
            level_var,
            seasonal_var,
        } = self.initial
        {
            if !level_mean.is_finite() || !positive(level_var) {
                return Err(invalid("initial level prior must be finite with positive variance"));
            }
            if self.has_seasonal() && !positive(seasonal_var) {
                return Err(invalid("initial seasonal prior variance must be positive"));
            }
        }
        Ok(())
    }

    pub fn transition(&self) -> StateMatrix {
        let mut t = StateMatrix::zeros();
        t[(0, 0)] = 1.0;
        if self.has_seasonal() {
            for j in 1..STATE_DIM {
                t[(1, j)] = -1.0;
            }
            for i in 2..STATE_DIM {
                t[(i, i - 1)] = 1.0;
            }
        }
        t
    }

    pub fn observation(&self) -> StateVector {
        let mut z = StateVector::zeros();
        z[0] = 1.0;
        if self.has_seasonal() {
            z[1] = 1.0;
        }
        z
    }

    /// State disturbance covariance `R Q R'`.
    pub fn state_noise(&self) -> StateMatrix {
        let mut q = StateMatrix::zeros();
        q[(0, 0)] = self.variances.level;
        if self.has_seasonal() {
            q[(1, 1)] = self.variances.seasonal;
        }
        q
    }

    /// Mean and (diagonal) covariance of the first state.
    pub fn initial_moments(&self) -> (StateVector, StateMatrix) {
        let mut a = StateVector::zeros();
        let mut p = StateMatrix::zeros();
        let (level_mean, level_var, seasonal_var) = match self.initial {
            InitialState::Diffuse => (0.0, DIFFUSE_VARIANCE, DIFFUSE_VARIANCE),
            InitialState::Proper {
                level_mean,
                level_var,
                seasonal_var,
            } => (level_mean, level_var, seasonal_var),
        };
        a[0] = level_mean;
        p[(0, 0)] = level_var;
        if self.has_seasonal() {
            for j in 1..STATE_DIM {
                p[(j, j)] = seasonal_var;
            }
        }
        (a, p)
    }

    /// Number of leading one-step densities excluded from the likelihood.
    pub fn diffuse_steps(&self) -> usize {
        match self.initial {
            InitialState::Diffuse => self.active_states(),
            InitialState::Proper { .. } => 0,
        }
    }
}
