use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::table::{CommunityCovariates, CrMatrix};
use crate::crime_data::{CrimeCategory, NUM_COMMUNITIES};
use crate::error::{invalid, Error, Result};
use crate::firth::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    CrimeRelated,
    SocioEconomic,
    HealthDemographic,
    JointReduction,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::CrimeRelated,
        Dimension::SocioEconomic,
        Dimension::HealthDemographic,
        Dimension::JointReduction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::CrimeRelated => "crime_related",
            Dimension::SocioEconomic => "socio_economic",
            Dimension::HealthDemographic => "health_demographic",
            Dimension::JointReduction => "joint_reduction",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Dimension::CrimeRelated => "Crime-Related Variables",
            Dimension::SocioEconomic => "Socio-Economic Variables",
            Dimension::HealthDemographic => "Health and Demographic Variables",
            Dimension::JointReduction => "Joint Crime Reduction",
        }
    }

    /// Predictors for a model of `crime`, in column order. The crime's own
    /// 2019 rate always comes last as a control.
    pub fn predictors(self, crime: CrimeCategory) -> Vec<Predictor> {
        use Predictor::*;
        let mut out = match self {
            Dimension::CrimeRelated => vec![NeighborhoodSafety, HasPolice],
            Dimension::SocioEconomic => vec![CrowdedHousing, VacantHousing, IncomeDiversity, PovertyRate, Population],
            Dimension::HealthDemographic => vec![PctOver65, PctUnder18, OverallHealth, LnCovidRate],
            Dimension::JointReduction => [
                CrimeCategory::Assault,
                CrimeCategory::Narcotics,
                CrimeCategory::Robbery,
                CrimeCategory::Burglary,
            ]
            .into_iter()
            .filter(|&c| c != crime)
            .map(Reduction)
            .collect(),
        };
        out.push(CrimeRate(crime));
        out
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Dimension::ALL
            .into_iter()
            .find(|d| d.name().replace('_', "") == key)
            .ok_or_else(|| invalid(format!("unknown dimension '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predictor {
    NeighborhoodSafety,
    HasPolice,
    CrowdedHousing,
    VacantHousing,
    IncomeDiversity,
    PovertyRate,
    Population,
    PctOver65,
    PctUnder18,
    OverallHealth,
    LnCovidRate,
    CrimeRate(CrimeCategory),
    /// Stage-one CR indicator of another crime.
    Reduction(CrimeCategory),
}

impl Predictor {
    pub fn label(self) -> String {
        match self {
            Predictor::NeighborhoodSafety => "Neighborhood Safety".into(),
            Predictor::HasPolice => "Police Station".into(),
            Predictor::CrowdedHousing => "Crowded Housing".into(),
            Predictor::VacantHousing => "Vacant Housing".into(),
            Predictor::IncomeDiversity => "Income Diversity".into(),
            Predictor::PovertyRate => "Poverty Rate".into(),
            Predictor::Population => "Population (k)".into(),
            Predictor::PctOver65 => "Population Over 65".into(),
            Predictor::PctUnder18 => "Population Under 18".into(),
            Predictor::OverallHealth => "Overall Health".into(),
            Predictor::LnCovidRate => "ln(Covid Cases Rate)".into(),
            Predictor::CrimeRate(c) => format!("{} Rate 2019", title_case(c.name())),
            Predictor::Reduction(c) => format!("Sig. Reduction {}", title_case(c.name())),
        }
    }

    fn raw(self, row: &CommunityCovariates, cr: &CrMatrix) -> f64 {
        match self {
            Predictor::NeighborhoodSafety => row.neighborhood_safety,
            Predictor::HasPolice => row.has_police as f64,
            Predictor::CrowdedHousing => row.crowded_housing_pct,
            Predictor::VacantHousing => row.vacant_housing_pct,
            Predictor::IncomeDiversity => row.income_diversity,
            Predictor::PovertyRate => row.poverty_rate,
            Predictor::Population => row.population_k,
            Predictor::PctOver65 => row.pct_over_65,
            Predictor::PctUnder18 => row.pct_under_18,
            Predictor::OverallHealth => row.overall_health,
            Predictor::LnCovidRate => row.covid_case_rate_10k,
            Predictor::CrimeRate(c) => row.crime_rate(c),
            Predictor::Reduction(c) => cr.get(row.community_id, c) as u8 as f64,
        }
    }
}

fn title_case(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Offset added before taking logs of COVID rates: half the smallest
/// positive rate when some rate is zero, otherwise 0.
pub fn covid_offset(covs: &[CommunityCovariates]) -> f64 {
    if covs.iter().all(|r| r.covid_case_rate_10k > 0.0) {
        return 0.0;
    }
    covs.iter()
        .map(|r| r.covid_case_rate_10k)
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min)
        / 2.0
}

/// Regression data for one (dimension, crime) model: outcome is the CR
/// column for `crime`, rows in community order.
pub fn build_design(
    covs: &[CommunityCovariates],
    cr: &CrMatrix,
    dimension: Dimension,
    crime: CrimeCategory,
) -> Result<DesignMatrix> {
    if covs.len() != NUM_COMMUNITIES || covs.iter().enumerate().any(|(i, r)| r.community_id as usize != i + 1) {
        return Err(invalid("covariates must hold communities 1..=77 in order"));
    }
    let y = cr.column(crime);
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(invalid(format!(
            "{crime}: CR outcome is {} for all {} communities, model undefined",
            if positives == 0 { 0 } else { 1 },
            y.len()
        )));
    }
    let predictors = dimension.predictors(crime);
    let mut notes = Vec::new();
    let mut columns = Vec::with_capacity(predictors.len());
    for &p in &predictors {
        let mut col: Vec<f64> = covs.iter().map(|r| p.raw(r, cr)).collect();
        if p == Predictor::LnCovidRate {
            let eps = covid_offset(covs);
            if eps > 0.0 {
                notes.push(format!("ln(covid_case_rate_10k + {eps}) used: some rates are zero"));
            }
            for v in &mut col {
                *v = (*v + eps).ln();
            }
        }
        if col.iter().all(|&v| v == col[0]) {
            return Err(invalid(format!(
                "{crime}: predictor '{}' is constant ({}) across communities",
                p.label(),
                col[0]
            )));
        }
        columns.push(col);
    }
    let names: Vec<String> = predictors.iter().map(|p| p.label()).collect();
    let mut design = DesignMatrix::with_intercept(&columns, &names, y)?;
    design.notes = notes;
    Ok(design)
}
