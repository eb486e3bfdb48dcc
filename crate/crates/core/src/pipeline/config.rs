use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::bsts::{ImpactConfig, Seasonality, DEFAULT_ALPHA};
use crate::crime_data::{CsvSchema, StudyWindow};
use crate::error::{invalid, Error, Result};

/// Everything a run needs. Serialized as a flat TOML table; every key is
/// optional in the file and falls back to the default below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pre_start: NaiveDate,
    pub pre_end: NaiveDate,
    pub post_start: NaiveDate,
    pub post_end: NaiveDate,

    pub iterations: usize,
    pub burn_in: usize,
    pub seed_base: u64,
    pub alpha: f64,
    pub seasonal: Seasonality,
    pub standardize: bool,

    pub crime_csv: Option<PathBuf>,
    pub covariates_csv: Option<PathBuf>,
    pub boundaries: Option<PathBuf>,
    pub output_dir: PathBuf,

    pub date_column: String,
    pub iucr_column: String,
    pub community_column: String,
    /// Empty string disables de-duplication by record id.
    pub id_column: String,
    /// Feature property holding the community number in the boundaries file.
    pub boundary_id_property: String,

    pub workers: usize,
    pub histogram_bin_width: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = StudyWindow::default();
        let schema = CsvSchema::default();
        let impact = ImpactConfig::default();
        RunConfig {
            pre_start: w.pre_start,
            pre_end: w.pre_end,
            post_start: w.post_start,
            post_end: w.post_end,
            iterations: impact.iterations,
            burn_in: impact.burn_in,
            seed_base: 20200316,
            alpha: DEFAULT_ALPHA,
            seasonal: Seasonality::Weekly,
            standardize: impact.standardize,
            crime_csv: None,
            covariates_csv: None,
            boundaries: None,
            output_dir: PathBuf::from("out"),
            date_column: schema.date,
            iucr_column: schema.iucr,
            community_column: schema.community,
            id_column: schema.id.unwrap_or_default(),
            boundary_id_property: "area_numbe".into(),
            workers: 1,
            histogram_bin_width: 0.1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for p in [&mut self.crime_csv, &mut self.covariates_csv, &mut self.boundaries]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn window(&self) -> Result<StudyWindow> {
        StudyWindow::new(self.pre_start, self.pre_end, self.post_start, self.post_end)
    }

    pub fn impact(&self) -> ImpactConfig {
        ImpactConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            alpha: self.alpha,
            seasonality: self.seasonal,
            standardize: self.standardize,
        }
    }

    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            date: self.date_column.clone(),
            iucr: self.iucr_column.clone(),
            community: self.community_column.clone(),
            id: (!self.id_column.is_empty()).then(|| self.id_column.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.window()?;
        self.impact().validate()?;
        if self.workers == 0 {
            return Err(invalid("workers must be at least 1"));
        }
        if !(self.histogram_bin_width > 0.0 && self.histogram_bin_width.is_finite()) {
            return Err(invalid(format!(
                "histogram_bin_width must be positive, got {}",
                self.histogram_bin_width
            )));
        }
        if self.boundary_id_property.is_empty() {
            return Err(invalid("boundary_id_property must not be empty"));
        }
        Ok(())
    }

    pub fn require_crime_csv(&self) -> Result<&Path> {
        self.crime_csv
            .as_deref()
            .ok_or_else(|| invalid("no crime CSV given (set crime_csv or pass --crime-csv)"))
    }

    pub fn require_covariates(&self) -> Result<&Path> {
        self.covariates_csv
            .as_deref()
            .ok_or_else(|| invalid("no covariate table given (set covariates_csv or pass --covariates)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.window().unwrap().post_len(), 63);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = RunConfig {
            crime_csv: Some("crimes.csv".into()),
            workers: 4,
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);

        let partial = RunConfig::from_toml("alpha = 0.1\nseasonal = \"none\"\npost_end = \"2020-04-30\"\n").unwrap();
        assert_eq!(partial.alpha, 0.1);
        assert_eq!(partial.seasonal, Seasonality::None);
        assert_eq!(partial.iterations, 1000);
        assert_eq!(partial.window().unwrap().post_len(), 46);
    }

    #[test]
    fn bad_files() {
        assert!(matches!(RunConfig::from_toml("alpah = 0.1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("workers = \"four\""), Err(Error::Config(_))));
        let cfg = RunConfig::from_toml("alpha = 1.5").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::from_toml("workers = 0").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "crime_csv = \"data/c.csv\"\noutput_dir = \"/abs/out\"\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.crime_csv.unwrap(), dir.path().join("data/c.csv"));
        assert_eq!(cfg.output_dir, PathBuf::from("/abs/out"));
    }
}
