use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{Duration, NaiveDate};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crimpact_core::bsts::Seasonality;
use crimpact_core::covariates::{load_covariates, Dimension};
use crimpact_core::crime_data::{descriptive_stats, CrimeCategory, SeriesMatrix};
use crimpact_core::firth::ConvergenceControl;
use crimpact_core::pipeline::{
    self, digest_files, emit_report, format_regression_tables, run_all, run_impact_batch, run_regressions,
    simulate, synthetic_covariates, write_batch, write_covariates_csv, write_regressions, write_series,
    write_synthetic_crimes, RunConfig, RunManifest, SyntheticSpec,
};
use crimpact_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "crimpact", version, about = "Community-level crime impact analysis")]
struct Cli {
    /// Flat TOML config file; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the crime export and write per-community daily series.
    Ingest {
        #[command(flatten)]
        input: CrimeInput,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Fit all impact models and write results plus the CR matrix.
    Impact {
        /// Daily series written by `ingest` (default: parse --crime-csv).
        #[arg(long)]
        series: Option<PathBuf>,
        #[command(flatten)]
        input: CrimeInput,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Fit the Firth regressions on a CR matrix.
    Regress {
        /// Default: <output-dir>/cr_matrix.csv
        #[arg(long)]
        cr_matrix: Option<PathBuf>,
        #[arg(long)]
        covariates: Option<PathBuf>,
    },
    /// Histogram data, the joined map and a manifest from impact results.
    Report {
        /// Default: <output-dir>/impact_results.csv
        #[arg(long)]
        impact: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Size and power of the detector on synthetic Poisson series.
    Simulate {
        #[arg(long, default_value_t = 20.0)]
        pre_rate: f64,
        #[arg(long, default_value_t = 20.0)]
        post_rate: f64,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        /// Instead of a size/power run, write a synthetic crime export and
        /// covariate table into this directory.
        #[arg(long)]
        write_city: Option<PathBuf>,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Every stage end to end.
    RunAll {
        #[command(flatten)]
        input: CrimeInput,
        #[arg(long)]
        covariates: Option<PathBuf>,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Args, Debug)]
struct CrimeInput {
    #[arg(long)]
    crime_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WindowArgs {
    #[arg(long)]
    pre_start: Option<NaiveDate>,
    #[arg(long)]
    pre_end: Option<NaiveDate>,
    /// Also moves the end of the pre-period to the day before, unless
    /// --pre-end is given.
    #[arg(long)]
    post_start: Option<NaiveDate>,
    #[arg(long)]
    post_end: Option<NaiveDate>,
}

#[derive(Args, Debug)]
struct EngineArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// none | weekly
    #[arg(long)]
    seasonal: Option<Seasonality>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    boundaries: Option<PathBuf>,
    #[arg(long)]
    boundary_id_property: Option<String>,
    #[arg(long)]
    bin_width: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl WindowArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.pre_start, self.pre_start);
        set(&mut cfg.post_start, self.post_start);
        set(&mut cfg.post_end, self.post_end);
        match (self.pre_end, self.post_start) {
            (Some(d), _) => cfg.pre_end = d,
            (None, Some(ps)) => cfg.pre_end = ps - Duration::days(1),
            (None, None) => {}
        }
    }
}

impl EngineArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.iterations, self.iterations);
        set(&mut cfg.burn_in, self.burn_in);
        set(&mut cfg.alpha, self.alpha);
        set(&mut cfg.seasonal, self.seasonal);
    }
}

impl ReportArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.boundaries.is_some() {
            cfg.boundaries = self.boundaries.clone();
        }
        set(&mut cfg.boundary_id_property, self.boundary_id_property.clone());
        set(&mut cfg.histogram_bin_width, self.bin_width);
    }
}

fn set_path(slot: &mut Option<PathBuf>, v: &Option<PathBuf>) {
    if v.is_some() {
        *slot = v.clone();
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed_base, cli.seed);
    set(&mut cfg.workers, cli.workers);
    set(&mut cfg.output_dir, cli.output_dir.clone());
    match &cli.command {
        Command::Ingest { input, window } => {
            set_path(&mut cfg.crime_csv, &input.crime_csv);
            window.apply(&mut cfg);
        }
        Command::Impact {
            input, window, engine, ..
        } => {
            set_path(&mut cfg.crime_csv, &input.crime_csv);
            window.apply(&mut cfg);
            engine.apply(&mut cfg);
        }
        Command::Regress { covariates, .. } => set_path(&mut cfg.covariates_csv, covariates),
        Command::Report { report, .. } => report.apply(&mut cfg),
        Command::Simulate { window, engine, .. } => {
            window.apply(&mut cfg);
            engine.apply(&mut cfg);
        }
        Command::RunAll {
            input,
            covariates,
            window,
            engine,
            report,
        } => {
            set_path(&mut cfg.crime_csv, &input.crime_csv);
            set_path(&mut cfg.covariates_csv, covariates);
            window.apply(&mut cfg);
            engine.apply(&mut cfg);
            report.apply(&mut cfg);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("input file not found: {}", path.display())))
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn print_stats(matrix: &SeriesMatrix) {
    println!("{:<10} {:>8} {:>6} {:>6} {:>8} {:>7} {:>8}", "crime", "total", "min", "max", "mean", "median", "stdev");
    for s in descriptive_stats(matrix) {
        println!(
            "{:<10} {:>8} {:>6} {:>6} {:>8.2} {:>7} {:>8.2}",
            s.category.name(),
            s.total,
            s.min,
            s.max,
            s.mean,
            s.median,
            s.stdev
        );
    }
}

fn load_series(cfg: &RunConfig, series: &Option<PathBuf>) -> Result<SeriesMatrix> {
    let window = cfg.window()?;
    match series {
        Some(path) => {
            require_file(path)?;
            let file = std::fs::File::open(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
            SeriesMatrix::read_csv(file, window)
        }
        None => {
            require_file(cfg.require_crime_csv()?)?;
            Ok(pipeline::ingest(cfg)?.0)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Ingest { .. } => {
            require_file(cfg.require_crime_csv()?)?;
            let (matrix, report) = pipeline::ingest(&cfg)?;
            println!(
                "read {} rows: {} records kept, {} rejected",
                report.rows_read,
                report.records,
                report.rejected_total()
            );
            for (reason, n) in &report.rejected {
                println!("  rejected {reason:?}: {n}");
            }
            print_stats(&matrix);
            print_written(&write_series(&matrix, &report, &out)?);
        }
        Command::Impact { series, .. } => {
            let matrix = load_series(&cfg, series)?;
            let batch = run_impact_batch(&matrix, &cfg.impact(), cfg.seed_base, cfg.workers)?;
            for crime in CrimeCategory::ALL {
                println!(
                    "{:<10} significant reductions {:>3}, significant increases {:>3}",
                    crime.name(),
                    batch.cr.count(crime),
                    batch.increase_count(crime, cfg.alpha)
                );
            }
            for f in &batch.failures {
                eprintln!("warning: {} community {}: {}", f.category, f.community_id, f.message);
            }
            print_written(&write_batch(&batch, &out)?);
        }
        Command::Regress { cr_matrix, .. } => {
            let cr_path = cr_matrix.clone().unwrap_or_else(|| out.join(pipeline::CR_FILE));
            require_file(&cr_path)?;
            let cov_path = cfg.require_covariates()?;
            require_file(cov_path)?;
            let cr = pipeline::read_cr_matrix(&cr_path)?;
            let covs = load_covariates(cov_path)?;
            let models = run_regressions(&cr, &covs, &Dimension::ALL, &ConvergenceControl::default())?;
            print!("{}", format_regression_tables(&models));
            print_written(&write_regressions(&models, &out)?);
        }
        Command::Report { impact, .. } => {
            let started = chrono::Utc::now();
            let impact_path = impact.clone().unwrap_or_else(|| out.join(pipeline::IMPACT_FILE));
            require_file(&impact_path)?;
            if let Some(b) = &cfg.boundaries {
                require_file(b)?;
            }
            let results = pipeline::read_impact_results(&impact_path)?;
            let boundaries = cfg.boundaries.as_deref().map(|p| (p, cfg.boundary_id_property.as_str()));
            let written = emit_report(&results, boundaries, cfg.histogram_bin_width, &out)?;
            let mut manifest = RunManifest::new(&cfg, started);
            let mut inputs = vec![impact_path];
            inputs.extend(cfg.boundaries.clone());
            manifest.inputs = digest_files(&inputs)?;
            manifest.outputs = digest_files(&written)?;
            manifest.record_seeds(&results);
            manifest.finished_at = chrono::Utc::now().to_rfc3339();
            let mpath = out.join(pipeline::MANIFEST_FILE);
            manifest.write(&mpath)?;
            print_written(&written);
            print_written(&[mpath]);
        }
        Command::Simulate {
            pre_rate,
            post_rate,
            replicates,
            write_city,
            ..
        } => {
            let window = cfg.window()?;
            if let Some(dir) = write_city {
                pipeline::ensure_dir(dir)?;
                let crimes = dir.join("crimes.csv");
                let f = std::fs::File::create(&crimes).map_err(|e| Error::Validation(format!("{}: {e}", crimes.display())))?;
                let n = write_synthetic_crimes(&window, cfg.seed_base, std::io::BufWriter::new(f))?;
                let covs = dir.join("covariates.csv");
                let f = std::fs::File::create(&covs).map_err(|e| Error::Validation(format!("{}: {e}", covs.display())))?;
                write_covariates_csv(&synthetic_covariates(cfg.seed_base), f)?;
                println!("wrote {} ({n} events)", crimes.display());
                println!("wrote {}", covs.display());
                return Ok(());
            }
            let spec = SyntheticSpec {
                pre_rate: *pre_rate,
                post_rate: *post_rate,
                window,
                n_replicates: *replicates,
                seed: cfg.seed_base,
            };
            let report = simulate(&spec, &cfg.impact(), cfg.workers)?;
            println!(
                "replicates {}  cr rate {:.3}  mean rce {:.4}  mean p {:.4}  degenerate {}",
                spec.n_replicates, report.cr_rate, report.mean_rce, report.mean_p, report.degenerate
            );
            pipeline::ensure_dir(&out)?;
            let path = out.join("simulation.json");
            let text = serde_json::to_string_pretty(&report)?;
            std::fs::write(&path, text + "\n").map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
            print_written(&[path]);
        }
        Command::RunAll { .. } => {
            require_file(cfg.require_crime_csv()?)?;
            for p in [&cfg.covariates_csv, &cfg.boundaries].into_iter().flatten() {
                require_file(p)?;
            }
            let summary = run_all(&cfg)?;
            for crime in CrimeCategory::ALL {
                println!(
                    "{:<10} cr=1 in {:>2} communities, significant increases {:>2}",
                    crime.name(),
                    summary.batch.cr.count(crime),
                    summary.batch.increase_count(crime, cfg.alpha)
                );
            }
            for note in &summary.manifest.notes {
                eprintln!("note: {note}");
            }
            print_written(&summary.outputs);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
