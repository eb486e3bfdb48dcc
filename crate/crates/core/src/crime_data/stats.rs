use serde::{Deserialize, Serialize};

use super::iucr::CrimeCategory;
use super::series::SeriesMatrix;

/// Summary of the per-community totals for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: CrimeCategory,
    pub total: u64,
    pub min: u64,
    pub max: u64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stdev: f64,
}

pub fn descriptive_stats(matrix: &SeriesMatrix) -> Vec<CategoryStats> {
    CrimeCategory::ALL
        .into_iter()
        .map(|cat| {
            let totals: Vec<u64> = matrix.category(cat).iter().map(|s| s.total()).collect();
            summarize(cat, &totals)
        })
        .collect()
}

pub(crate) fn summarize(category: CrimeCategory, totals: &[u64]) -> CategoryStats {
    let n = totals.len();
    let mut sorted = totals.to_vec();
    sorted.sort_unstable();
    let total: u64 = sorted.iter().sum();
    let mean = total as f64 / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    };
    let stdev = if n > 1 {
        let ss: f64 = sorted.iter().map(|&x| (x as f64 - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    CategoryStats {
        category,
        total,
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        median,
        stdev,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crime_data::StudyWindow;

    #[test]
    fn all_zero_matrix() {
        let m = SeriesMatrix::zeros(StudyWindow::default());
        for s in descriptive_stats(&m) {
            assert_eq!((s.total, s.min, s.max), (0, 0, 0));
            assert_eq!((s.mean, s.median, s.stdev), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn integer_sequence_totals() {
        let totals: Vec<u64> = (1..=77).collect();
        let s = summarize(CrimeCategory::Assault, &totals);
        assert_eq!(s.total, 3003);
        assert_eq!(s.mean, 39.0);
        assert_eq!(s.median, 39.0);
        assert_eq!((s.min, s.max), (1, 77));
        // var of 1..n with n-1 denominator is n(n+1)/12
        assert!((s.stdev - (77.0f64 * 78.0 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stats_use_matrix_totals() {
        let w = StudyWindow::default();
        let mut m = SeriesMatrix::zeros(w);
        for c in 1..=77u8 {
            m.get_mut(c, CrimeCategory::Robbery).counts[c as usize] = c as u32;
        }
        let s = &descriptive_stats(&m)[CrimeCategory::Robbery.index()];
        assert_eq!(s.total, 3003);
        assert_eq!(s.median, 39.0);
    }
}
