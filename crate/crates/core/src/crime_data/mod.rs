//! Crime-event ingestion: IUCR classification, study windows and
//! per-community daily aggregation.

mod ingest;
mod iucr;
mod series;
mod stats;
mod window;

pub use ingest::{parse_csv, parse_event_date, parse_reader, CrimeRecord, CsvSchema, IngestReport, RejectReason};
pub use iucr::{assert_disjoint_code_sets, classify_iucr, CrimeCategory};
pub use series::{aggregate_daily, DailyCountSeries, SeriesMatrix};
pub use stats::{descriptive_stats, CategoryStats};
pub use window::StudyWindow;

/// Chicago community areas are numbered 1..=77.
pub const NUM_COMMUNITIES: usize = 77;
