use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};

/// The four offense groups analysed per community.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrimeCategory {
    Burglary,
    Assault,
    Narcotics,
    Robbery,
}

const BURGLARY: &[&str] = &["0610", "0650", "0620", "0630"];

const ASSAULT: &[&str] = &[
    "0560", "0520", "0558", "051A", "0530", "0554", "0545", "0555", "0550", "0553", "0557", "051B",
    "0552", "0551", "0556",
];

const NARCOTICS: &[&str] = &[
    "2022", "2027", "2093", "2024", "2028", "1811", "1812", "1821", "2014", "2034", "1822", "2092",
    "2017", "2026", "2013", "2021", "2023", "2090", "2031", "2170", "2091", "2016", "2012", "2018",
    "2110", "2020", "2025", "2070", "2011", "2015", "2029", "2032", "2033", "1840", "1850", "2160",
    "2050", "2094", "2019", "2030", "2095", "2040", "2010", "2080",
];

const ROBBERY: &[&str] = &[
    "0325", "0320", "0312", "0330", "031A", "033A", "0326", "0334", "0331", "0340", "0313", "031B",
    "0337", "033B",
];

impl CrimeCategory {
    /// Fixed column order used by every matrix in the crate.
    pub const ALL: [CrimeCategory; 4] = [
        CrimeCategory::Burglary,
        CrimeCategory::Assault,
        CrimeCategory::Narcotics,
        CrimeCategory::Robbery,
    ];

    pub fn index(self) -> usize {
        match self {
            CrimeCategory::Burglary => 0,
            CrimeCategory::Assault => 1,
            CrimeCategory::Narcotics => 2,
            CrimeCategory::Robbery => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CrimeCategory::Burglary => "burglary",
            CrimeCategory::Assault => "assault",
            CrimeCategory::Narcotics => "narcotics",
            CrimeCategory::Robbery => "robbery",
        }
    }

    pub fn iucr_codes(self) -> &'static [&'static str] {
        match self {
            CrimeCategory::Burglary => BURGLARY,
            CrimeCategory::Assault => ASSAULT,
            CrimeCategory::Narcotics => NARCOTICS,
            CrimeCategory::Robbery => ROBBERY,
        }
    }
}

impl fmt::Display for CrimeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CrimeCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "burglary" => Ok(CrimeCategory::Burglary),
            "assault" => Ok(CrimeCategory::Assault),
            "narcotics" => Ok(CrimeCategory::Narcotics),
            "robbery" => Ok(CrimeCategory::Robbery),
            other => Err(invalid(format!("unknown crime category '{other}'"))),
        }
    }
}

/// Map an IUCR offense code to its study category.
///
/// Matching is exact after trimming and upper-casing, so `" 031a"` is robbery.
pub fn classify_iucr(code: &str) -> Option<CrimeCategory> {
    let code = code.trim().to_ascii_uppercase();
    CrimeCategory::ALL
        .into_iter()
        .find(|cat| cat.iucr_codes().contains(&code.as_str()))
}

/// Panics if any code appears in two category lists.
pub fn assert_disjoint_code_sets() {
    let mut seen = std::collections::HashMap::new();
    for cat in CrimeCategory::ALL {
        for code in cat.iucr_codes() {
            if let Some(prev) = seen.insert(*code, cat) {
                panic!("IUCR code {code} listed under both {prev} and {cat}");
            }
        }
    }
}
