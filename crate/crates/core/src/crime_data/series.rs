use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ingest::CrimeRecord;
use super::iucr::CrimeCategory;
use super::window::StudyWindow;
use super::NUM_COMMUNITIES;
use crate::error::{invalid, Result};

/// Gap-free daily counts for one (community, category) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyCountSeries {
    pub community_id: u8,
    pub category: CrimeCategory,
    pub start_date: NaiveDate,
    pub counts: Vec<u32>,
}

impl DailyCountSeries {
    pub fn zeros(community_id: u8, category: CrimeCategory, start_date: NaiveDate, len: usize) -> Self {
        DailyCountSeries {
            community_id,
            category,
            start_date,
            counts: vec![0; len],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Split into the pre- and post-period slices of `window`.
    pub fn split(&self, window: &StudyWindow) -> Result<(&[u32], &[u32])> {
        if self.start_date != window.start() || self.counts.len() != window.len() {
            return Err(invalid(format!(
                "series for community {} / {} starts {} with {} days; window needs {} from {}",
                self.community_id,
                self.category,
                self.start_date,
                self.counts.len(),
                window.len(),
                window.start()
            )));
        }
        Ok(self.counts.split_at(window.pre_len()))
    }
}

/// Every (category, community) series over one window, ordered by category
/// then community id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMatrix {
    pub window: StudyWindow,
    series: Vec<DailyCountSeries>,
}

fn slot(community_id: u8, category: CrimeCategory) -> usize {
    category.index() * NUM_COMMUNITIES + (community_id as usize - 1)
}

impl SeriesMatrix {
    pub fn zeros(window: StudyWindow) -> Self {
        let series = CrimeCategory::ALL
            .into_iter()
            .flat_map(|cat| {
                (1..=NUM_COMMUNITIES as u8)
                    .map(move |c| DailyCountSeries::zeros(c, cat, window.start(), window.len()))
            })
            .collect();
        SeriesMatrix { window, series }
    }

    pub fn get(&self, community_id: u8, category: CrimeCategory) -> &DailyCountSeries {
        &self.series[slot(community_id, category)]
    }

    pub fn get_mut(&mut self, community_id: u8, category: CrimeCategory) -> &mut DailyCountSeries {
        &mut self.series[slot(community_id, category)]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DailyCountSeries> {
        self.series.iter()
    }

    pub fn category(&self, category: CrimeCategory) -> &[DailyCountSeries] {
        let start = category.index() * NUM_COMMUNITIES;
        &self.series[start..start + NUM_COMMUNITIES]
    }

    pub fn total(&self) -> u64 {
        self.series.iter().map(DailyCountSeries::total).sum()
    }

    /// Re-slice to a window contained in this one.
    pub fn restrict(&self, window: StudyWindow) -> Result<SeriesMatrix> {
        let offset = self.window.day_index(window.start()).ok_or_else(|| {
            invalid(format!("window start {} is outside the series range", window.start()))
        })?;
        if self.window.day_index(window.end()).is_none() {
            return Err(invalid(format!(
                "window end {} is outside the series range ending {}",
                window.end(),
                self.window.end()
            )));
        }
        let series = self
            .series
            .iter()
            .map(|s| DailyCountSeries {
                community_id: s.community_id,
                category: s.category,
                start_date: window.start(),
                counts: s.counts[offset..offset + window.len()].to_vec(),
            })
            .collect();
        Ok(SeriesMatrix { window, series })
    }

    /// Columnar CSV: `community_id,category,date,count`, one row per day.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["community_id", "category", "date", "count"])?;
        for s in &self.series {
            for (i, c) in s.counts.iter().enumerate() {
                w.write_record([
                    s.community_id.to_string(),
                    s.category.name().to_string(),
                    self.window.date_at(i).to_string(),
                    c.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Read the columnar CSV back for `window`. Rows outside the window are
    /// ignored; missing (community, category, date) cells count as zero,
    /// but the file's date range must cover the window.
    pub fn read_csv<R: Read>(reader: R, window: StudyWindow) -> Result<SeriesMatrix> {
        #[derive(Deserialize)]
        struct Row {
            community_id: u8,
            category: String,
            date: NaiveDate,
            count: u32,
        }
        let mut out = SeriesMatrix::zeros(window);
        let mut lo: Option<NaiveDate> = None;
        let mut hi: Option<NaiveDate> = None;
        let mut categories: HashMap<String, CrimeCategory> = HashMap::new();
        for row in csv::Reader::from_reader(reader).deserialize::<Row>() {
            let row = row?;
            if row.community_id == 0 || row.community_id as usize > NUM_COMMUNITIES {
                return Err(invalid(format!("community_id {} out of range", row.community_id)));
            }
            let category = match categories.get(&row.category) {
                Some(c) => *c,
                None => {
                    let c: CrimeCategory = row.category.parse()?;
                    categories.insert(row.category.clone(), c);
                    c
                }
            };
            lo = Some(lo.map_or(row.date, |d| d.min(row.date)));
            hi = Some(hi.map_or(row.date, |d| d.max(row.date)));
            if let Some(i) = window.day_index(row.date) {
                out.get_mut(row.community_id, category).counts[i] += row.count;
            }
        }
        match (lo, hi) {
            (Some(lo), Some(hi)) if lo <= window.start() && hi >= window.end() => Ok(out),
            _ => Err(invalid(format!(
                "series file covers {lo:?}..{hi:?}, which does not span {}..{}",
                window.start(),
                window.end()
            ))),
        }
    }
}

/// Count classified in-window records per (community, category) per day.
/// Records with unknown codes or dates outside the window are skipped.
pub fn aggregate_daily(records: &[CrimeRecord], window: &StudyWindow) -> SeriesMatrix {
    let mut matrix = SeriesMatrix::zeros(*window);
    for rec in records {
        let (Some(cat), Some(day)) = (rec.category(), window.day_index(rec.event_date)) else {
            continue;
        };
        if rec.community_id == 0 || rec.community_id as usize > NUM_COMMUNITIES {
            continue;
        }
        matrix.get_mut(rec.community_id, cat).counts[day] += 1;
    }
    matrix
}
