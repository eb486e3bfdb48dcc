use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::iucr::{classify_iucr, CrimeCategory};
use super::NUM_COMMUNITIES;
use crate::error::{Error, Result};

/// One offense event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrimeRecord {
    /// Date the offense was committed, in local civil time.
    pub event_date: NaiveDate,
    pub iucr_code: String,
    pub community_id: u8,
    pub raw_id: String,
}

impl CrimeRecord {
    pub fn category(&self) -> Option<CrimeCategory> {
        classify_iucr(&self.iucr_code)
    }
}

/// Column names of the logical fields in the input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub date: String,
    pub iucr: String,
    pub community: String,
    /// Optional record identifier column used for duplicate detection.
    pub id: Option<String>,
}

impl Default for CsvSchema {
    /// Column names of the Chicago Data Portal crimes export.
    fn default() -> Self {
        CsvSchema {
            date: "Date".into(),
            iucr: "IUCR".into(),
            community: "Community Area".into(),
            id: Some("ID".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MissingCommunity,
    InvalidCommunity,
    InvalidDate,
    MissingIucr,
    UnknownIucr,
    DuplicateId,
    MalformedRow,
}

/// Row accounting for one ingestion run. Merging is associative, so
/// chunks parsed independently can be combined in any grouping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub records: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
    pub records_by_category: BTreeMap<CrimeCategory, usize>,
}

impl IngestReport {
    fn reject(&mut self, reason: RejectReason) {
        *self.rejected.entry(reason).or_default() += 1;
    }

    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }

    pub fn count(&self, reason: RejectReason) -> usize {
        self.rejected.get(&reason).copied().unwrap_or(0)
    }

    pub fn merge(mut self, other: &IngestReport) -> IngestReport {
        self.rows_read += other.rows_read;
        self.records += other.records;
        for (k, v) in &other.rejected {
            *self.rejected.entry(*k).or_default() += v;
        }
        for (k, v) in &other.records_by_category {
            *self.records_by_category.entry(*k).or_default() += v;
        }
        self
    }
}

/// Parse a crime export. Rows that fail validation are counted in the
/// report and skipped; only an unreadable file or a header missing one of
/// the schema columns is fatal.
pub fn parse_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Vec<CrimeRecord>, IngestReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(file, schema).map_err(|e| match e {
        Error::Header { message, .. } => Error::Header {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<(Vec<CrimeRecord>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.byte_headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| String::from_utf8_lossy(h).trim() == name)
            .ok_or_else(|| Error::Header {
                path: "<input>".into(),
                message: format!("missing required column '{name}'"),
            })
    };
    let date_col = find(&schema.date)?;
    let iucr_col = find(&schema.iucr)?;
    let comm_col = find(&schema.community)?;
    let id_col = schema.id.as_deref().map(find).transpose()?;
    let needed = [Some(date_col), Some(iucr_col), Some(comm_col), id_col]
        .into_iter()
        .flatten()
        .max()
        .unwrap_or(0);

    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut row = csv::ByteRecord::new();
    let mut row_number = 0usize;

    loop {
        match rdr.read_byte_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
            Err(_) => {
                report.rows_read += 1;
                report.reject(RejectReason::MalformedRow);
                continue;
            }
        }
        row_number += 1;
        report.rows_read += 1;
        if row.len() <= needed {
            report.reject(RejectReason::MalformedRow);
            continue;
        }
        let field = |i: usize| String::from_utf8_lossy(&row[i]).trim().to_string();

        let community = field(comm_col);
        let community_id = match parse_community(&community) {
            Ok(c) => c,
            Err(reason) => {
                report.reject(reason);
                continue;
            }
        };
        let Some(event_date) = parse_event_date(&field(date_col)) else {
            report.reject(RejectReason::InvalidDate);
            continue;
        };
        let iucr_code = field(iucr_col).to_ascii_uppercase();
        if iucr_code.is_empty() {
            report.reject(RejectReason::MissingIucr);
            continue;
        }
        let Some(category) = classify_iucr(&iucr_code) else {
            report.reject(RejectReason::UnknownIucr);
            continue;
        };
        let raw_id = match id_col.map(field) {
            Some(id) if !id.is_empty() => {
                if !seen_ids.insert(id.clone()) {
                    report.reject(RejectReason::DuplicateId);
                    continue;
                }
                id
            }
            _ => format!("row:{row_number}"),
        };

        report.records += 1;
        *report.records_by_category.entry(category).or_default() += 1;
        records.push(CrimeRecord {
            event_date,
            iucr_code,
            community_id,
            raw_id,
        });
    }
    Ok((records, report))
}

fn parse_community(s: &str) -> std::result::Result<u8, RejectReason> {
    if s.is_empty() {
        return Err(RejectReason::MissingCommunity);
    }
    // Some exports write the area number as a float ("32.0").
    let value: f64 = s.parse().map_err(|_| RejectReason::InvalidCommunity)?;
    if value.fract() != 0.0 || value < 1.0 || value > NUM_COMMUNITIES as f64 {
        return Err(RejectReason::InvalidCommunity);
    }
    Ok(value as u8)
}

const DATETIME_FORMATS: &[&str] = &[
    "%m/%d/%Y %I:%M:%S %p",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %I:%M %p",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
];

/// Calendar date of an event timestamp. Portal timestamps
/// (`03/16/2020 10:00:00 PM`) and ISO-8601 dates or datetimes are accepted;
/// no timezone conversion is applied.
pub fn parse_event_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    for fmt in DATETIME_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.date());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "ID,Case Number,Date,Block,IUCR,Primary Type,Community Area\n";

    fn parse(body: &str) -> (Vec<CrimeRecord>, IngestReport) {
        let text = format!("{HEADER}{body}");
        parse_reader(text.as_bytes(), &CsvSchema::default()).unwrap()
    }

    #[test]
    fn maps_portal_row_to_record() {
        let (recs, report) = parse("11,JA1,03/16/2020 10:00:00 PM,001XX W MAIN,0610,BURGLARY,32\n");
        assert_eq!(report.records, 1);
        assert_eq!(
            recs[0],
            CrimeRecord {
                event_date: NaiveDate::from_ymd_opt(2020, 3, 16).unwrap(),
                iucr_code: "0610".into(),
                community_id: 32,
                raw_id: "11".into(),
            }
        );
    }

    #[test]
    fn late_evening_timestamp_keeps_local_date() {
        let (recs, _) = parse("1,X,12/31/2019 11:59:59 PM,B,0320,ROBBERY,5\n");
        assert_eq!(recs[0].event_date, NaiveDate::from_ymd_opt(2019, 12, 31).unwrap());
    }

    #[test]
    fn community_zero_is_rejected() {
        let (recs, report) = parse("1,X,03/16/2020 10:00:00 PM,B,0610,BURGLARY,0\n");
        assert!(recs.is_empty());
        assert_eq!(report.count(RejectReason::InvalidCommunity), 1);
    }

    #[test]
    fn counts_each_rejection_reason() {
        let body = "\
1,X,03/16/2020 10:00:00 PM,B,0610,BURGLARY,
2,X,03/16/2020 10:00:00 PM,B,0610,BURGLARY,78
3,X,not a date,B,0610,BURGLARY,3
4,X,2020-03-16,B,0486,BATTERY,3
5,X,2020-03-16,B,,BATTERY,3
6,X,2020-03-16T08:00:00.000,B,0560,ASSAULT,3
6,X,2020-03-16T08:00:00.000,B,0560,ASSAULT,3
7,X,2020-03-16
8,X,2020-03-17,B,2022,NARCOTICS,12.0
";
        let (recs, report) = parse(body);
        assert_eq!(report.rows_read, 9);
        assert_eq!(recs.len(), 2);
        assert_eq!(report.count(RejectReason::MissingCommunity), 1);
        assert_eq!(report.count(RejectReason::InvalidCommunity), 1);
        assert_eq!(report.count(RejectReason::InvalidDate), 1);
        assert_eq!(report.count(RejectReason::UnknownIucr), 1);
        assert_eq!(report.count(RejectReason::MissingIucr), 1);
        assert_eq!(report.count(RejectReason::DuplicateId), 1);
        assert_eq!(report.count(RejectReason::MalformedRow), 1);
        assert_eq!(report.records + report.rejected_total(), report.rows_read);
        assert_eq!(recs[1].community_id, 12);
    }

    #[test]
    fn missing_header_column_is_fatal() {
        let text = "ID,Date,IUCR\n1,2020-01-01,0610\n";
        let err = parse_reader(text.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Header { .. }));
    }

    #[test]
    fn remapped_schema() {
        let schema = CsvSchema {
            date: "when".into(),
            iucr: "code".into(),
            community: "area".into(),
            id: None,
        };
        let text = "area,code,when\n7,031a,2019-07-04\n7,031A,2019-07-04\n";
        let (recs, report) = parse_reader(text.as_bytes(), &schema).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(report.count(RejectReason::DuplicateId), 0);
        assert_eq!(recs[0].iucr_code, "031A");
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = parse_csv("/nonexistent/crimes.csv", &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn date_formats() {
        let d = NaiveDate::from_ymd_opt(2020, 3, 16).unwrap();
        for s in [
            "03/16/2020 10:00:00 PM",
            "03/16/2020 12:00:00 AM",
            "2020-03-16",
            "2020-03-16T23:59:00",
            "2020-03-16 01:02:03",
        ] {
            assert_eq!(parse_event_date(s), Some(d), "{s}");
        }
        assert_eq!(parse_event_date("02/30/2020 10:00:00 PM"), None);
        assert_eq!(parse_event_date(""), None);
    }

    #[test]
    fn report_merge_is_associative() {
        let (_, a) = parse("1,X,2020-03-16,B,0610,BURGLARY,1\n");
        let (_, b) = parse("2,X,bad,B,0610,BURGLARY,1\n");
        let (_, c) = parse("3,X,2020-03-16,B,0320,ROBBERY,99\n");
        let left = a.clone().merge(&b).merge(&c);
        let right = a.merge(&b.merge(&c));
        assert_eq!(left, right);
        assert_eq!(left.rows_read, 3);
    }
}
