//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line.
//!
//! Criteria 1, 6 and 7 need the frozen portal extract: `crimes.csv` and
//! `covariates.csv` in `$CRIMPACT_DATA_DIR` (default: `<workspace>/data`).

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use crimpact_core::bsts::{kalman_filter, ImpactConfig};
use crimpact_core::covariates::{load_covariates, Dimension, Predictor};
use crimpact_core::crime_data::{aggregate_daily, descriptive_stats, parse_csv, CrimeCategory, CsvSchema, StudyWindow};
use crimpact_core::firth::{fit, ConvergenceControl, DesignMatrix};
use crimpact_core::pipeline::{
    run_impact_batch, run_regressions, simulate, synthetic_covariates, write_covariates_csv, write_synthetic_crimes,
    BatchOutput, RunConfig, SyntheticSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    let tag = if pass { "PASS" } else { "FAIL" };
    // Written straight to the process stderr so the line shows even when
    // test output is captured.
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[{tag}] criterion {id} {name}: {detail} ({:.1}s)", elapsed.as_secs_f64());
}

fn check(id: u32, name: &str, limit: Duration, body: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(d) if elapsed > limit => Err(format!("{d}; runtime over the {}s limit", limit.as_secs())),
        other => other,
    };
    match outcome {
        Ok(detail) => report(id, name, true, &detail, elapsed),
        Err(detail) => {
            report(id, name, false, &detail, elapsed);
            panic!("criterion {id} failed: {detail}");
        }
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("CRIMPACT_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn snapshot_file(name: &str) -> Result<PathBuf, String> {
    let path = data_dir().join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(format!(
            "data snapshot file {} not found (set CRIMPACT_DATA_DIR); see data/README.md",
            path.display()
        ))
    }
}

#[test]
fn criterion_1_ingestion_fidelity() {
    check(1, "ingestion fidelity", Duration::from_secs(30), || {
        let path = snapshot_file("crimes.csv")?;
        let window = StudyWindow::default();
        let (records, _) = parse_csv(&path, &CsvSchema::default()).map_err(|e| e.to_string())?;
        let stats = descriptive_stats(&aggregate_daily(&records, &window));
        let expected = [
            (24_068u64, 312.57, 249.0),
            (47_197, 612.95, 410.0),
            (31_044, 403.16, 127.0),
            (20_216, 262.54, 180.0),
        ];
        let mut problems = Vec::new();
        for (s, (total, mean, median)) in stats.iter().zip(expected) {
            let mean2 = format!("{:.2}", s.mean);
            if s.total != total || mean2 != format!("{mean:.2}") || s.median != median {
                problems.push(format!(
                    "{}: total {} mean {} median {} (want {} / {:.2} / {})",
                    s.category, s.total, mean2, s.median, total, mean, median
                ));
            }
        }
        if problems.is_empty() {
            Ok("totals, means and medians match for all four crimes".into())
        } else {
            Err(problems.join("; "))
        }
    });
}

#[test]
fn criterion_2_firth_closed_form() {
    check(2, "Firth closed-form oracle", Duration::from_secs(5), || {
        let control = ConvergenceControl::default();
        let two = DesignMatrix::with_intercept(&[vec![0.0, 0.0, 1.0, 1.0]], &["x".into()], vec![0.0, 0.0, 1.0, 1.0])
            .map_err(|e| e.to_string())?;
        let f = fit(&two, &control).map_err(|e| e.to_string())?;
        if !f.converged {
            return Err("2x2 fit did not converge".into());
        }
        // add-1/2 cell correction: cells (0.5, 2.5 / 2.5, 0.5)
        let slope = (2.5f64 * 2.5 / 0.25).ln();
        let intercept = (0.5f64 / 2.5).ln();
        if (f.beta[1] - slope).abs() > 1e-6 || (f.beta[0] - intercept).abs() > 1e-6 {
            return Err(format!("2x2 fit {:?}, want [{intercept}, {slope}]", f.beta));
        }
        let mut worst = 0.0f64;
        for n in 1..=20usize {
            for k in 0..=n {
                let y: Vec<f64> = (0..n).map(|i| (i < k) as u8 as f64).collect();
                let d = DesignMatrix::with_intercept(&[], &[], y).map_err(|e| e.to_string())?;
                let f = fit(&d, &control).map_err(|e| format!("n={n} k={k}: {e}"))?;
                if !f.converged {
                    return Err(format!("intercept-only n={n} k={k} did not converge"));
                }
                let p = 1.0 / (1.0 + (-f.beta[0]).exp());
                let want = (k as f64 + 0.5) / (n as f64 + 1.0);
                worst = worst.max((p - want).abs());
            }
        }
        if worst > 1e-9 {
            return Err(format!("intercept-only max deviation {worst:.2e}"));
        }
        Ok(format!(
            "slope {:.4}, intercept {:.4}; intercept-only max deviation {worst:.1e}",
            f.beta[1], f.beta[0]
        ))
    });
}

#[test]
fn criterion_3_firth_numerical_oracle() {
    check(3, "Firth numerical oracle", Duration::from_secs(120), || {
        let control = ConvergenceControl::default();
        let mut worst = 0.0f64;
        let mut nonconverged = 0;
        for case in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
            let n = rng.random_range(8..=50usize);
            let k = rng.random_range(0..=2usize);
            let cols: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let truth: Vec<f64> = (0..=k).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let eta = truth[0] + (0..k).map(|j| truth[j + 1] * cols[j][i]).sum::<f64>();
                    rng.random_bool(1.0 / (1.0 + (-eta).exp())) as u8 as f64
                })
                .collect();
            let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
            let data = DesignMatrix::with_intercept(&cols, &names, y.clone()).map_err(|e| e.to_string())?;
            let f = match fit(&data, &control) {
                Ok(f) if f.converged => f,
                Ok(_) | Err(_) => {
                    nonconverged += 1;
                    continue;
                }
            };
            let rows: Vec<Vec<f64>> = (0..n).map(|i| data.x().row(i).iter().copied().collect()).collect();
            let oracle = support::firth::nelder_mead_max(|b| support::firth::penalized_loglik(&rows, &y, b), f.beta.iter().map(|_| 0.0).collect());
            for (a, b) in f.beta.iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
        }
        if nonconverged > 0 || worst > 1e-4 {
            Err(format!("{nonconverged} non-convergences, max coordinate gap {worst:.2e}"))
        } else {
            Ok(format!("200 datasets, max coordinate gap {worst:.2e}, no non-convergence"))
        }
    });
}

#[test]
fn criterion_4_kalman_oracle() {
    check(4, "Kalman oracle", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let (series, model) = support::kalman::random_case(&mut rng);
            let got = kalman_filter(&series, &model).map_err(|e| e.to_string())?.log_likelihood;
            worst = worst.max((got - support::kalman::dense_loglik(&series, &model)).abs());
        }
        if worst > 1e-8 {
            Err(format!("max log-likelihood gap {worst:.2e}"))
        } else {
            Ok(format!("50 models, max log-likelihood gap {worst:.1e}"))
        }
    });
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[test]
fn criterion_5_detector_size_and_power() {
    check(5, "detector size and power", Duration::from_secs(600), || {
        let config = ImpactConfig::default();
        let spec = |post_rate, seed| SyntheticSpec {
            pre_rate: 20.0,
            post_rate,
            window: StudyWindow::default(),
            n_replicates: 100,
            seed,
        };
        let null = simulate(&spec(20.0, 501), &config, workers()).map_err(|e| e.to_string())?;
        let alt = simulate(&spec(10.0, 502), &config, workers()).map_err(|e| e.to_string())?;
        let detail = format!(
            "null cr rate {:.2}; 20->10 cr rate {:.2}, mean rce {:.3}",
            null.cr_rate, alt.cr_rate, alt.mean_rce
        );
        let ok = (0.01..=0.10).contains(&null.cr_rate)
            && alt.cr_rate >= 0.90
            && (-0.6..=-0.4).contains(&alt.mean_rce);
        if ok {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

/// Default-config batch over the snapshot, shared by criteria 6 and 7.
fn snapshot_batch() -> &'static Result<(BatchOutput, Duration), String> {
    static BATCH: OnceLock<Result<(BatchOutput, Duration), String>> = OnceLock::new();
    BATCH.get_or_init(|| {
        let start = Instant::now();
        let path = snapshot_file("crimes.csv")?;
        let cfg = RunConfig {
            crime_csv: Some(path),
            workers: 4,
            ..RunConfig::default()
        };
        let (matrix, _) = crimpact_core::pipeline::ingest(&cfg).map_err(|e| e.to_string())?;
        let batch = run_impact_batch(&matrix, &cfg.impact(), cfg.seed_base, cfg.workers).map_err(|e| e.to_string())?;
        Ok((batch, start.elapsed()))
    })
}

#[test]
fn criterion_6_city_scale_counts() {
    check(6, "city-scale replication", Duration::from_secs(1800), || {
        let (batch, _) = snapshot_batch().as_ref().map_err(Clone::clone)?;
        let bands = [(10usize, 3usize), (18, 4), (35, 5), (10, 3)];
        let alpha = RunConfig::default().alpha;
        let mut ok = true;
        let mut parts = Vec::new();
        for (crime, (centre, tol)) in CrimeCategory::ALL.into_iter().zip(bands) {
            let cr = batch.cr.count(crime);
            let up = batch.increase_count(crime, alpha);
            ok &= cr.abs_diff(centre) <= tol && up <= 3;
            parts.push(format!("{crime} cr={cr} (want {centre}+-{tol}) increases={up}"));
        }
        if ok {
            Ok(parts.join(", "))
        } else {
            Err(parts.join(", "))
        }
    });
}

#[test]
fn criterion_7_regression_pattern() {
    let batch = snapshot_batch();
    let batch_time = batch.as_ref().map(|b| b.1).unwrap_or_default();
    check(7, "regression pattern", Duration::from_secs(10) + batch_time, || {
        let (batch, _) = batch.as_ref().map_err(Clone::clone)?;
        let covs = load_covariates(&snapshot_file("covariates.csv")?).map_err(|e| e.to_string())?;
        let models = run_regressions(&batch.cr, &covs, &Dimension::ALL, &ConvergenceControl::default())
            .map_err(|e| e.to_string())?;
        let or_of = |dim: Dimension, crime: CrimeCategory, term: Predictor| -> Result<f64, String> {
            let m = models
                .iter()
                .find(|m| m.dimension == dim && m.crime == crime)
                .ok_or("model missing")?;
            let f = m.fit.as_ref().ok_or_else(|| format!("{dim}/{crime} skipped: {:?}", m.skipped))?;
            let j = f.coefficient(&term.label()).ok_or("term missing")?;
            Ok(f.odds_ratios[j])
        };
        let mut parts = Vec::new();
        let mut ok = true;
        for crime in CrimeCategory::ALL {
            let or = or_of(Dimension::SocioEconomic, crime, Predictor::Population)?;
            ok &= or > 1.0;
            parts.push(format!("population OR {crime} {or:.3}"));
        }
        let b_r = or_of(Dimension::JointReduction, CrimeCategory::Burglary, Predictor::Reduction(CrimeCategory::Robbery))?;
        let r_b = or_of(Dimension::JointReduction, CrimeCategory::Robbery, Predictor::Reduction(CrimeCategory::Burglary))?;
        ok &= b_r > 1.0 && r_b > 1.0;
        parts.push(format!("burglary<-robbery OR {b_r:.3}, robbery<-burglary OR {r_b:.3}"));
        if ok {
            Ok(parts.join(", "))
        } else {
            Err(parts.join(", "))
        }
    });
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_crimpact"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("crimpact {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

#[test]
fn criterion_8_determinism() {
    check(8, "determinism", Duration::from_secs(1800), || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let window = StudyWindow::default();
        let crimes = dir.path().join("crimes.csv");
        let file = std::fs::File::create(&crimes).map_err(|e| e.to_string())?;
        write_synthetic_crimes(&window, 8, std::io::BufWriter::new(file)).map_err(|e| e.to_string())?;
        let covs = dir.path().join("covariates.csv");
        let file = std::fs::File::create(&covs).map_err(|e| e.to_string())?;
        write_covariates_csv(&synthetic_covariates(8), file).map_err(|e| e.to_string())?;
        let cfg = RunConfig {
            crime_csv: Some(crimes),
            covariates_csv: Some(covs),
            ..RunConfig::default()
        };
        let cfg_path = dir.path().join("run.toml");
        std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| e.to_string())?;

        let mut outputs = Vec::new();
        for (tag, workers) in [("a", "4"), ("b", "4"), ("c", "1")] {
            let out = dir.path().join(tag);
            run_cli(&[
                "run-all",
                "--config",
                cfg_path.to_str().unwrap(),
                "--seed",
                "7",
                "--workers",
                workers,
                "--output-dir",
                out.to_str().unwrap(),
            ])?;
            outputs.push(out);
        }
        let names = ["daily_series.csv", "impact_results.csv", "cr_matrix.csv", "regressions.csv", "rce_histograms.csv"];
        let mut diffs = Vec::new();
        for name in names {
            let a = std::fs::read(outputs[0].join(name)).map_err(|e| format!("{name}: {e}"))?;
            for other in &outputs[1..] {
                let b = std::fs::read(other.join(name)).map_err(|e| format!("{name}: {e}"))?;
                if a != b {
                    diffs.push(format!("{name} differs in {}", other.file_name().unwrap().to_string_lossy()));
                }
            }
        }
        if diffs.is_empty() {
            Ok(format!("{} CSV outputs byte-identical across 2 repeats and workers 1 vs 4", names.len()))
        } else {
            Err(diffs.join("; "))
        }
    });
}
