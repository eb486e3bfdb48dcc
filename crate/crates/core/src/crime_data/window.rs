use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Pre/post intervention date ranges, all bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub pre_start: NaiveDate,
    pub pre_end: NaiveDate,
    pub post_start: NaiveDate,
    pub post_end: NaiveDate,
}

impl Default for StudyWindow {
    /// 2018-01-01..2020-03-15 before, 2020-03-16..2020-05-17 after.
    fn default() -> Self {
        StudyWindow {
            pre_start: NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(),
            pre_end: NaiveDate::from_ymd_opt(2020, 3, 15).unwrap(),
            post_start: NaiveDate::from_ymd_opt(2020, 3, 16).unwrap(),
            post_end: NaiveDate::from_ymd_opt(2020, 5, 17).unwrap(),
        }
    }
}

impl StudyWindow {
    pub fn new(
        pre_start: NaiveDate,
        pre_end: NaiveDate,
        post_start: NaiveDate,
        post_end: NaiveDate,
    ) -> Result<Self> {
        let w = StudyWindow {
            pre_start,
            pre_end,
            post_start,
            post_end,
        };
        w.validate()?;
        Ok(w)
    }

    /// Build a window from its pre start and the post range; the pre period
    /// ends the day before `post_start`.
    pub fn from_post(pre_start: NaiveDate, post_start: NaiveDate, post_end: NaiveDate) -> Result<Self> {
        let pre_end = post_start
            .checked_sub_days(Days::new(1))
            .ok_or_else(|| invalid("post_start has no predecessor"))?;
        Self::new(pre_start, pre_end, post_start, post_end)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pre_start >= self.pre_end {
            return Err(invalid(format!(
                "pre_start {} must precede pre_end {}",
                self.pre_start, self.pre_end
            )));
        }
        if self.post_start > self.post_end {
            return Err(invalid(format!(
                "post_start {} is after post_end {}",
                self.post_start, self.post_end
            )));
        }
        if self.pre_end.succ_opt() != Some(self.post_start) {
            return Err(invalid(format!(
                "post_start {} must be the day after pre_end {}",
                self.post_start, self.pre_end
            )));
        }
        Ok(())
    }

    pub fn start(&self) -> NaiveDate {
        self.pre_start
    }

    pub fn end(&self) -> NaiveDate {
        self.post_end
    }

    pub fn pre_len(&self) -> usize {
        days_between(self.pre_start, self.pre_end)
    }

    pub fn post_len(&self) -> usize {
        days_between(self.post_start, self.post_end)
    }

    pub fn len(&self) -> usize {
        days_between(self.pre_start, self.post_end)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.pre_start && date <= self.post_end
    }

    /// Zero-based position of `date` in the window, if inside it.
    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        self.contains(date)
            .then(|| (date - self.pre_start).num_days() as usize)
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.pre_start + Days::new(index as u64)
    }
}

/// Inclusive day count.
fn days_between(a: NaiveDate, b: NaiveDate) -> usize {
    ((b - a).num_days() + 1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn default_window_lengths() {
        let w = StudyWindow::default();
        w.validate().unwrap();
        assert_eq!(w.post_len(), 63);
        assert_eq!(w.pre_len(), 805);
        assert_eq!(w.len(), 868);
        assert_eq!(w.pre_len() + w.post_len(), w.len());
    }

    #[test]
    fn day_index_round_trip() {
        let w = StudyWindow::default();
        assert_eq!(w.day_index(d(2018, 1, 1)), Some(0));
        assert_eq!(w.day_index(d(2020, 3, 16)), Some(w.pre_len()));
        assert_eq!(w.day_index(d(2020, 5, 18)), None);
        assert_eq!(w.day_index(d(2017, 12, 31)), None);
        assert_eq!(w.date_at(w.len() - 1), d(2020, 5, 17));
    }

    #[test]
    fn rejects_gap_between_periods() {
        let err = StudyWindow::new(d(2018, 1, 1), d(2020, 3, 14), d(2020, 3, 16), d(2020, 5, 17));
        assert!(err.is_err());
        assert!(StudyWindow::new(d(2020, 1, 1), d(2020, 1, 1), d(2020, 1, 2), d(2020, 1, 3)).is_err());
    }

    #[test]
    fn from_post_derives_pre_end() {
        let w = StudyWindow::from_post(d(2018, 1, 1), d(2020, 3, 16), d(2020, 5, 17)).unwrap();
        assert_eq!(w, StudyWindow::default());
    }
}
