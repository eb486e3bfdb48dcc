use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crime_data::{CrimeCategory, NUM_COMMUNITIES};
use crate::error::{invalid, Error, Result};

/// One community's row of the covariate table. Field names are the CSV
/// header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityCovariates {
    pub community_id: u8,
    /// Events per 10k inhabitants in 2019.
    pub burglary_rate_2019: f64,
    pub assault_rate_2019: f64,
    pub narcotics_rate_2019: f64,
    pub robbery_rate_2019: f64,
    /// Weighted percent of adults who feel safe in their neighborhood.
    pub neighborhood_safety: f64,
    /// 1 when any overlapping ZIP code hosts a police station.
    pub has_police: u8,
    /// Inhabitants / 1000.
    pub population_k: f64,
    /// Source-defined index, taken as is.
    pub income_diversity: f64,
    pub crowded_housing_pct: f64,
    pub vacant_housing_pct: f64,
    pub poverty_rate: f64,
    pub pct_over_65: f64,
    pub pct_under_18: f64,
    pub overall_health: f64,
    /// Cases per 10k inhabitants.
    pub covid_case_rate_10k: f64,
}

impl CommunityCovariates {
    pub fn crime_rate(&self, crime: CrimeCategory) -> f64 {
        match crime {
            CrimeCategory::Burglary => self.burglary_rate_2019,
            CrimeCategory::Assault => self.assault_rate_2019,
            CrimeCategory::Narcotics => self.narcotics_rate_2019,
            CrimeCategory::Robbery => self.robbery_rate_2019,
        }
    }

    fn percentages(&self) -> [(&'static str, f64); 7] {
        [
            ("neighborhood_safety", self.neighborhood_safety),
            ("crowded_housing_pct", self.crowded_housing_pct),
            ("vacant_housing_pct", self.vacant_housing_pct),
            ("poverty_rate", self.poverty_rate),
            ("pct_over_65", self.pct_over_65),
            ("pct_under_18", self.pct_under_18),
            ("overall_health", self.overall_health),
        ]
    }

    fn rates(&self) -> [(&'static str, f64); 5] {
        [
            ("burglary_rate_2019", self.burglary_rate_2019),
            ("assault_rate_2019", self.assault_rate_2019),
            ("narcotics_rate_2019", self.narcotics_rate_2019),
            ("robbery_rate_2019", self.robbery_rate_2019),
            ("covid_case_rate_10k", self.covid_case_rate_10k),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.community_id;
        if id == 0 || id as usize > NUM_COMMUNITIES {
            return Err(invalid(format!("community_id {id} outside 1..={NUM_COMMUNITIES}")));
        }
        let bad = |name: &str, v: f64, rule: &str| invalid(format!("community {id}: {name} = {v} {rule}"));
        for (name, v) in self.percentages() {
            if !(0.0..=100.0).contains(&v) {
                return Err(bad(name, v, "is not a percentage in [0, 100]"));
            }
        }
        for (name, v) in self.rates() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(name, v, "must be a finite rate >= 0"));
            }
        }
        if !(self.population_k > 0.0 && self.population_k.is_finite()) {
            return Err(bad("population_k", self.population_k, "must be > 0"));
        }
        if !self.income_diversity.is_finite() {
            return Err(bad("income_diversity", self.income_diversity, "must be finite"));
        }
        if self.has_police > 1 {
            return Err(bad("has_police", self.has_police as f64, "must be 0 or 1"));
        }
        Ok(())
    }
}

/// Checks each row and that every community appears exactly once.
/// Returns the rows sorted by community.
pub fn validate_covariates(mut rows: Vec<CommunityCovariates>) -> Result<Vec<CommunityCovariates>> {
    let mut seen = BTreeSet::new();
    for row in &rows {
        row.validate()?;
        if !seen.insert(row.community_id) {
            return Err(invalid(format!("duplicate community_id {}", row.community_id)));
        }
    }
    if rows.len() != NUM_COMMUNITIES {
        let missing: Vec<String> = (1..=NUM_COMMUNITIES as u8)
            .filter(|id| !seen.contains(id))
            .map(|id| id.to_string())
            .collect();
        return Err(invalid(format!(
            "covariate table has {} communities, expected {NUM_COMMUNITIES} (missing: {})",
            rows.len(),
            missing.join(", ")
        )));
    }
    rows.sort_by_key(|r| r.community_id);
    Ok(rows)
}

pub fn read_covariates<R: Read>(reader: R) -> Result<Vec<CommunityCovariates>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<CommunityCovariates>().enumerate() {
        rows.push(rec.map_err(|e| invalid(format!("covariate row {}: {e}", i + 1)))?);
    }
    validate_covariates(rows)
}

pub fn load_covariates(path: &Path) -> Result<Vec<CommunityCovariates>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_covariates(file).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// 77 x 4 CR indicators, rows by community (1..=77), columns in
/// `CrimeCategory::ALL` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrMatrix {
    rows: Vec<[bool; 4]>,
}

impl Default for CrMatrix {
    fn default() -> Self {
        CrMatrix {
            rows: vec![[false; 4]; NUM_COMMUNITIES],
        }
    }
}

impl CrMatrix {
    pub fn get(&self, community_id: u8, crime: CrimeCategory) -> bool {
        self.rows[community_id as usize - 1][crime.index()]
    }

    pub fn set(&mut self, community_id: u8, crime: CrimeCategory, value: bool) {
        self.rows[community_id as usize - 1][crime.index()] = value;
    }

    /// Column for one crime as 0/1 values, community order.
    pub fn column(&self, crime: CrimeCategory) -> Vec<f64> {
        self.rows.iter().map(|r| r[crime.index()] as u8 as f64).collect()
    }

    pub fn count(&self, crime: CrimeCategory) -> usize {
        self.rows.iter().filter(|r| r[crime.index()]).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["community_id".to_string()];
        header.extend(CrimeCategory::ALL.iter().map(|c| c.name().to_string()));
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(row.iter().map(|&b| (b as u8).to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Validation(format!("writing CR matrix: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| invalid(format!("CR matrix is missing column '{name}'")))
        };
        let id_col = col("community_id")?;
        let crime_cols = CrimeCategory::ALL.map(|c| col(c.name()));
        let crime_cols: Vec<usize> = crime_cols.into_iter().collect::<Result<_>>()?;
        let mut out = CrMatrix::default();
        let mut seen = BTreeSet::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let id: u8 = rec
                .get(id_col)
                .and_then(|v| v.parse().ok())
                .filter(|&v| (1..=NUM_COMMUNITIES as u8).contains(&v))
                .ok_or_else(|| invalid(format!("CR matrix row {}: bad community_id", i + 1)))?;
            if !seen.insert(id) {
                return Err(invalid(format!("CR matrix: duplicate community_id {id}")));
            }
            for (crime, &j) in CrimeCategory::ALL.iter().zip(&crime_cols) {
                let v = match rec.get(j) {
                    Some("0") => false,
                    Some("1") => true,
                    other => {
                        return Err(invalid(format!(
                            "CR matrix community {id}, {crime}: expected 0 or 1, got {:?}",
                            other.unwrap_or("")
                        )))
                    }
                };
                out.set(id, *crime, v);
            }
        }
        if seen.len() != NUM_COMMUNITIES {
            return Err(invalid(format!(
                "CR matrix has {} communities, expected {NUM_COMMUNITIES}",
                seen.len()
            )));
        }
        Ok(out)
    }
}
