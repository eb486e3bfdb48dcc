use std::io::Read;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const INTERCEPT: &str = "Intercept";

/// Binary-outcome regression data: an `n x p` design containing exactly one
/// column of ones, and 0/1 outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    y: Vec<f64>,
    column_names: Vec<String>,
    /// Free-form provenance notes (transforms applied, offsets used).
    pub notes: Vec<String>,
}

impl DesignMatrix {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(invalid("design matrix needs at least one row and one column"));
        }
        if y.len() != n {
            return Err(invalid(format!("{} outcomes for {n} design rows", y.len())));
        }
        if column_names.len() != p {
            return Err(invalid(format!("{} column names for {p} columns", column_names.len())));
        }
        if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(invalid(format!("outcomes must be 0 or 1, found {v}")));
        }
        if let Some((i, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite value in column '{}', row {}",
                column_names[i / n],
                i % n + 1
            )));
        }
        let ones = (0..p)
            .filter(|&j| x.column(j).iter().all(|&v| v == 1.0))
            .count();
        if ones != 1 {
            return Err(invalid(format!(
                "design must contain exactly one intercept column of ones, found {ones}"
            )));
        }
        Ok(DesignMatrix {
            x,
            y,
            column_names,
            notes: Vec::new(),
        })
    }

    /// Prepend an intercept to `predictors` (`n x k`, column-major by name).
    pub fn with_intercept(predictors: &[Vec<f64>], names: &[String], y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if predictors.len() != names.len() {
            return Err(invalid("one name per predictor column required"));
        }
        if let Some((j, _)) = predictors.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(invalid(format!("predictor '{}' has the wrong length", names[j])));
        }
        let p = predictors.len() + 1;
        let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { predictors[j - 1][i] });
        let mut column_names = vec![INTERCEPT.to_string()];
        column_names.extend(names.iter().cloned());
        Self::new(x, y, column_names)
    }

    /// CSV with a header; first column is the 0/1 outcome, the rest are
    /// predictors. An intercept is prepended.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(invalid("design CSV needs an outcome column and at least one predictor"));
        }
        let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let mut y = Vec::new();
        let mut cols = vec![Vec::new(); names.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                let cell = rec.get(j).unwrap_or("").trim();
                cell.parse::<f64>()
                    .map_err(|_| invalid(format!("row {}: '{}' is not numeric in column '{}'", row + 1, cell, &headers[j])))
            };
            y.push(parse(0)?);
            for (j, col) in cols.iter_mut().enumerate() {
                col.push(parse(j + 1)?);
            }
        }
        Self::with_intercept(&cols, &names, y)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn intercept_index(&self) -> usize {
        (0..self.p())
            .find(|&j| self.x.column(j).iter().all(|&v| v == 1.0))
            .expect("validated on construction")
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }

    /// Same data with rows reordered by `perm`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        let x = DMatrix::from_fn(self.n(), self.p(), |i, j| self.x[(perm[i], j)]);
        let y = perm.iter().map(|&i| self.y[i]).collect();
        Self::new(x, y, self.column_names.clone())
    }

    /// Same data with column `j` multiplied by `factor`.
    pub fn scale_column(&self, j: usize, factor: f64) -> Result<Self> {
        let mut x = self.x.clone();
        x.column_mut(j).scale_mut(factor);
        Self::new(x, self.y.clone(), self.column_names.clone())
    }
}
