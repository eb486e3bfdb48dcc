use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bsts::ImpactResult;
use crate::crime_data::{CrimeCategory, NUM_COMMUNITIES};
use crate::error::{invalid, Error, Result};

use super::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub crime: CrimeCategory,
    pub significant: bool,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

fn tidy(v: f64) -> f64 {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// RCE histogram per crime, split by significance (`cr`). Bins are
/// `[k w, (k+1) w)`; only non-empty bins are returned, degenerate models
/// are left out.
pub fn rce_histograms(results: &[ImpactResult], width: f64) -> Result<Vec<HistogramBin>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(invalid(format!("bin width must be positive, got {width}")));
    }
    let mut counts: BTreeMap<(usize, bool, i64), usize> = BTreeMap::new();
    for r in results {
        let Some(rce) = r.summary.rce else { continue };
        if !rce.is_finite() {
            continue;
        }
        let k = (rce / width + 1e-9).floor() as i64;
        *counts.entry((r.category.index(), r.summary.cr, k)).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|((c, significant, k), count)| HistogramBin {
            crime: CrimeCategory::ALL[c],
            significant,
            lower: tidy(k as f64 * width),
            upper: tidy((k + 1) as f64 * width),
            count,
        })
        .collect())
}

pub fn write_histograms_csv<W: Write>(bins: &[HistogramBin], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["crime", "significant", "bin_lower", "bin_upper", "count"])?;
    for b in bins {
        w.write_record([
            b.crime.name().to_string(),
            (b.significant as u8).to_string(),
            b.lower.to_string(),
            b.upper.to_string(),
            b.count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Validation(format!("writing histogram CSV: {e}")))?;
    Ok(())
}

fn feature_id(feature: &Value, property: &str) -> Option<u8> {
    let v = feature.get("properties")?.get(property)?;
    let n = match v {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) => s.trim().parse::<f64>().ok()?,
        _ => return None,
    };
    (n.fract() == 0.0 && n >= 1.0 && n <= NUM_COMMUNITIES as f64).then_some(n as u8)
}

/// Copy `boundaries` (a FeatureCollection) adding `<crime>_rce`,
/// `<crime>_p_value`, `<crime>_cr` and `<crime>_degenerate` to every
/// feature's properties.
pub fn join_geojson<R: Read>(boundaries: R, id_property: &str, results: &[ImpactResult]) -> Result<Value> {
    let mut doc: Value = serde_json::from_reader(boundaries)?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(invalid("boundaries file is not a GeoJSON FeatureCollection"));
    }
    let by_key: HashMap<(u8, CrimeCategory), &ImpactResult> =
        results.iter().map(|r| ((r.community_id, r.category), r)).collect();
    let features = doc
        .get_mut("features")
        .and_then(Value::as_array_mut)
        .ok_or_else(|| invalid("boundaries FeatureCollection has no features array"))?;
    let missing: Vec<String> = features
        .iter()
        .enumerate()
        .filter(|(_, f)| feature_id(f, id_property).is_none())
        .map(|(i, f)| match f.get("id") {
            Some(id) => format!("#{i} (id {id})"),
            None => format!("#{i}"),
        })
        .collect();
    if !missing.is_empty() {
        return Err(invalid(format!(
            "{} boundary feature(s) lack a valid '{id_property}' community id: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    for f in features.iter_mut() {
        let id = feature_id(f, id_property).expect("checked above");
        let props = f
            .get_mut("properties")
            .and_then(Value::as_object_mut)
            .expect("checked above");
        for crime in CrimeCategory::ALL {
            let name = crime.name();
            let r = by_key.get(&(id, crime));
            let num = |v: Option<f64>| v.filter(|x| x.is_finite()).map(Value::from).unwrap_or(Value::Null);
            props.insert(format!("{name}_rce"), num(r.and_then(|r| r.summary.rce)));
            props.insert(format!("{name}_p_value"), num(r.map(|r| r.summary.p_value)));
            props.insert(format!("{name}_cr"), r.map(|r| Value::from(r.summary.cr as u8)).unwrap_or(Value::Null));
            props.insert(
                format!("{name}_degenerate"),
                r.map(|r| Value::from(r.summary.degenerate)).unwrap_or(Value::Null),
            );
        }
    }
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSeed {
    pub crime: CrimeCategory,
    pub community_id: u8,
    pub seed: u64,
}

/// Provenance record for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: BTreeMap<String, FileDigest>,
    pub seeds: Vec<ModelSeed>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(config: &RunConfig, started_at: chrono::DateTime<chrono::Utc>) -> Self {
        RunManifest {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: started_at.to_rfc3339(),
            finished_at: String::new(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seeds: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn record_seeds(&mut self, results: &[ImpactResult]) {
        self.seeds = results
            .iter()
            .map(|r| ModelSeed {
                crime: r.category,
                community_id: r.community_id,
                seed: r.seed,
            })
            .collect();
    }

    /// True when `other` used the same inputs, configuration and seeds, and
    /// produced the same outputs. Timestamps are ignored.
    pub fn reproduces(&self, other: &RunManifest) -> bool {
        let digests = |m: &BTreeMap<String, FileDigest>| -> Vec<(String, String)> {
            m.iter().map(|(k, d)| (k.clone(), d.sha256.clone())).collect()
        };
        let mut a = self.config.clone();
        let mut b = other.config.clone();
        a.output_dir = PathBuf::new();
        b.output_dir = PathBuf::new();
        a == b
            && digests(&self.inputs) == digests(&other.inputs)
            && digests(&self.outputs) == digests(&other.outputs)
            && self.seeds == other.seeds
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub(crate) fn geojson_to_string(doc: &Value) -> Result<String> {
    let mut s = serde_json::to_string(doc)?;
    s.push('\n');
    Ok(s)
}
