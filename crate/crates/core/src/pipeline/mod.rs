//! End-to-end orchestration: ingestion, the impact batch, regressions and
//! report files, plus the synthetic validation harness.

mod batch;
mod config;
mod io;
mod report;
mod simulate;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub use batch::{
    is_significant_increase, model_seed, run_impact_batch, run_regressions, BatchOutput, ModelFailure,
    RegressionModel,
};
pub use config::RunConfig;
pub use io::{
    format_regression_tables, read_impact_csv, read_regressions_json, write_impact_csv, write_regressions_csv,
    write_regressions_json,
};
pub use report::{
    join_geojson, rce_histograms, sha256_file, write_histograms_csv, FileDigest, HistogramBin, ModelSeed,
    RunManifest,
};
pub use simulate::{
    simulate, synthetic_covariates, write_covariates_csv, write_synthetic_crimes, ReplicateOutcome,
    SimulationReport, SyntheticSpec,
};

use crate::bsts::ImpactResult;
use crate::covariates::{load_covariates, CrMatrix, Dimension};
use crate::crime_data::{aggregate_daily, parse_csv, IngestReport, SeriesMatrix};
use crate::error::{Error, Result};
use crate::firth::ConvergenceControl;

pub const SERIES_FILE: &str = "daily_series.csv";
pub const INGEST_REPORT_FILE: &str = "ingest_report.json";
pub const IMPACT_FILE: &str = "impact_results.csv";
pub const CR_FILE: &str = "cr_matrix.csv";
pub const REGRESSION_CSV_FILE: &str = "regressions.csv";
pub const REGRESSION_JSON_FILE: &str = "regressions.json";
pub const REGRESSION_TABLE_FILE: &str = "regressions.txt";
pub const HISTOGRAM_FILE: &str = "rce_histograms.csv";
pub const GEOJSON_FILE: &str = "impact_map.geojson";
pub const MANIFEST_FILE: &str = "manifest.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Parse the crime export named in `cfg` and aggregate it over the window.
pub fn ingest(cfg: &RunConfig) -> Result<(SeriesMatrix, IngestReport)> {
    let window = cfg.window()?;
    let (records, report) = parse_csv(cfg.require_crime_csv()?, &cfg.schema())?;
    Ok((aggregate_daily(&records, &window), report))
}

pub fn write_series(matrix: &SeriesMatrix, report: &IngestReport, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let series = dir.join(SERIES_FILE);
    matrix.write_csv(create(&series)?)?;
    let rep = dir.join(INGEST_REPORT_FILE);
    serde_json::to_writer_pretty(create(&rep)?, report)?;
    Ok(vec![series, rep])
}

pub fn write_batch(batch: &BatchOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let impact = dir.join(IMPACT_FILE);
    write_impact_csv(&batch.results, create(&impact)?)?;
    let cr = dir.join(CR_FILE);
    batch.cr.write_csv(create(&cr)?)?;
    Ok(vec![impact, cr])
}

pub fn read_cr_matrix(path: &Path) -> Result<CrMatrix> {
    CrMatrix::read_csv(open(path)?)
}

pub fn read_impact_results(path: &Path) -> Result<Vec<ImpactResult>> {
    read_impact_csv(open(path)?)
}

pub fn write_regressions(models: &[RegressionModel], dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let csv = dir.join(REGRESSION_CSV_FILE);
    write_regressions_csv(models, create(&csv)?)?;
    let json = dir.join(REGRESSION_JSON_FILE);
    write_regressions_json(models, create(&json)?)?;
    let txt = dir.join(REGRESSION_TABLE_FILE);
    std::fs::write(&txt, format_regression_tables(models)).map_err(|e| Error::io(&txt, e))?;
    Ok(vec![csv, json, txt])
}

/// Histogram data always; the joined map only when `boundaries` is given.
pub fn emit_report(
    results: &[ImpactResult],
    boundaries: Option<(&Path, &str)>,
    bin_width: f64,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let hist = dir.join(HISTOGRAM_FILE);
    write_histograms_csv(&rce_histograms(results, bin_width)?, create(&hist)?)?;
    let mut written = vec![hist];
    if let Some((path, property)) = boundaries {
        let doc = join_geojson(open(path)?, property, results)
            .map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
                Error::Json(j) => Error::Validation(format!("{}: {j}", path.display())),
                other => other,
            })?;
        let geo = dir.join(GEOJSON_FILE);
        let text = report::geojson_to_string(&doc)?;
        std::fs::write(&geo, text).map_err(|e| Error::io(&geo, e))?;
        written.push(geo);
    }
    Ok(written)
}

/// Digests of `paths` keyed by file name.
pub fn digest_files(paths: &[PathBuf]) -> Result<BTreeMap<String, FileDigest>> {
    paths
        .iter()
        .map(|p| {
            let key = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((key, sha256_file(p)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub ingest: IngestReport,
    pub batch: BatchOutput,
    pub regressions: Vec<RegressionModel>,
    pub outputs: Vec<PathBuf>,
    pub manifest: RunManifest,
}

/// Every stage in order, writing all outputs into `cfg.output_dir`.
/// Regressions run only when a covariate table is configured.
pub fn run_all(cfg: &RunConfig) -> Result<RunSummary> {
    let started = chrono::Utc::now();
    cfg.validate()?;
    let crime_csv = cfg.require_crime_csv()?.to_path_buf();
    if !crime_csv.is_file() {
        return Err(Error::io(&crime_csv, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let covs = cfg.covariates_csv.as_deref().map(load_covariates).transpose()?;
    let dir = &cfg.output_dir;

    let (matrix, ingest_report) = ingest(cfg)?;
    let mut outputs = write_series(&matrix, &ingest_report, dir)?;
    let batch = run_impact_batch(&matrix, &cfg.impact(), cfg.seed_base, cfg.workers)?;
    outputs.extend(write_batch(&batch, dir)?);

    let mut notes: Vec<String> = batch
        .failures
        .iter()
        .map(|f| format!("{} community {} failed: {}", f.category, f.community_id, f.message))
        .collect();
    let regressions = match &covs {
        Some(covs) => {
            let models = run_regressions(&batch.cr, covs, &Dimension::ALL, &ConvergenceControl::default())?;
            outputs.extend(write_regressions(&models, dir)?);
            notes.extend(models.iter().filter_map(|m| {
                m.skipped.as_ref().map(|r| format!("{} / {} skipped: {r}", m.dimension, m.crime))
            }));
            models
        }
        None => {
            notes.push("no covariate table configured; regressions not run".into());
            Vec::new()
        }
    };
    let boundaries = cfg.boundaries.as_deref().map(|p| (p, cfg.boundary_id_property.as_str()));
    outputs.extend(emit_report(&batch.results, boundaries, cfg.histogram_bin_width, dir)?);

    let mut manifest = RunManifest::new(cfg, started);
    let mut inputs = vec![crime_csv];
    inputs.extend(cfg.covariates_csv.clone());
    inputs.extend(cfg.boundaries.clone());
    manifest.inputs = digest_files(&inputs)?;
    manifest.outputs = digest_files(&outputs)?;
    manifest.record_seeds(&batch.results);
    manifest.notes = notes;
    manifest.finished_at = chrono::Utc::now().to_rfc3339();
    let manifest_path = dir.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;
    outputs.push(manifest_path);

    Ok(RunSummary {
        ingest: ingest_report,
        batch,
        regressions,
        outputs,
        manifest,
    })
}
