//! Grading a mined policy against the original matrix.
//!
//! Degenerate denominators follow fixed conventions: precision is 1 when
//! neither matrix has a single permit and 0 when only the reconstruction
//! has none; recall is 1 when the original has no permits; F1 is 0 when
//! precision and recall are both 0.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::engine::{self, Semantics};
use crate::error::{Error, Result};
use crate::model::{AccessMatrix, PolicySet, Scenario};

pub type Fraction = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> Fraction {
        Ratio::new(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Fraction {
        match (self.tp + self.fp, self.tp + self.fn_) {
            (0, 0) => Ratio::from_integer(1),
            (0, _) => Ratio::from_integer(0),
            (predicted, _) => Ratio::new(self.tp, predicted),
        }
    }

    pub fn recall(&self) -> Fraction {
        match self.tp + self.fn_ {
            0 => Ratio::from_integer(1),
            actual => Ratio::new(self.tp, actual),
        }
    }

    pub fn f1(&self) -> Fraction {
        let (p, r) = (self.precision(), self.recall());
        let sum = p + r;
        if sum == Ratio::from_integer(0) {
            Ratio::from_integer(0)
        } else {
            Ratio::from_integer(2) * p * r / sum
        }
    }
}

/// Cell-by-cell comparison of the original against a reconstruction.
pub fn confusion(original: &AccessMatrix, reconstructed: &AccessMatrix) -> Result<ConfusionCounts> {
    if original.dims() != reconstructed.dims() {
        return Err(Error::DimensionMismatch {
            left: original.dims(),
            right: reconstructed.dims(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&o, &r) in original.cells().iter().zip(reconstructed.cells()) {
        match (o, r) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub size_ratio: f64,
    pub mined_size: usize,
    pub ground_truth_size: usize,
}

fn to_f64(r: Fraction) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl MetricsReport {
    /// Exact mined/ground-truth ratio.
    pub fn size_ratio_exact(&self) -> Fraction {
        Ratio::new(self.mined_size as u64, self.ground_truth_size as u64)
    }

    /// Ratio rounded to one decimal, as printed in result tables.
    pub fn size_ratio_rounded(&self) -> f64 {
        (self.size_ratio * 10.0).round() / 10.0
    }
}

pub fn score(counts: ConfusionCounts, mined_size: usize, ground_truth_size: usize) -> Result<MetricsReport> {
    if counts.total() == 0 {
        return Err(Error::InvalidCounts("no decisions counted".into()));
    }
    if ground_truth_size == 0 {
        return Err(Error::InvalidCounts("ground-truth size must be at least 1".into()));
    }
    Ok(MetricsReport {
        counts,
        accuracy: to_f64(counts.accuracy()),
        precision: to_f64(counts.precision()),
        recall: to_f64(counts.recall()),
        f1: to_f64(counts.f1()),
        size_ratio: mined_size as f64 / ground_truth_size as f64,
        mined_size,
        ground_truth_size,
    })
}

/// Rebuilds the matrix from `policy` under `sem` and scores it against the
/// scenario's own matrix and ground-truth size.
pub fn grade(scenario: &Scenario, policy: &PolicySet, sem: Semantics) -> Result<MetricsReport> {
    let rebuilt = engine::reconstruct_acm(policy, &scenario.subjects, &scenario.objects, sem)?;
    let counts = confusion(&scenario.acm, &rebuilt)?;
    score(counts, policy.len(), scenario.ground_truth.len())
}

/// Columns of the results CSV.
pub const CSV_HEADER: [&str; 11] = [
    "scenario_id",
    "strategy",
    "provider",
    "density",
    "mined_size",
    "ratio",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "failed_flag",
];

/// One results-CSV row. Failed runs carry no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub strategy: String,
    pub provider: String,
    pub density: f64,
    pub mined_size: Option<usize>,
    pub ratio: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub failed_flag: u8,
}

impl ResultRow {
    pub fn new(
        scenario_id: &str,
        strategy: &str,
        provider: &str,
        density: f64,
        report: Option<&MetricsReport>,
    ) -> Self {
        ResultRow {
            scenario_id: scenario_id.to_string(),
            strategy: strategy.to_string(),
            provider: provider.to_string(),
            density,
            mined_size: report.map(|r| r.mined_size),
            ratio: report.map(|r| r.size_ratio),
            accuracy: report.map(|r| r.accuracy),
            precision: report.map(|r| r.precision),
            recall: report.map(|r| r.recall),
            f1: report.map(|r| r.f1),
            failed_flag: u8::from(report.is_none()),
        }
    }

    pub fn failed(&self) -> bool {
        self.failed_flag != 0
    }

    pub fn key(&self) -> (String, String, String) {
        (
            self.scenario_id.clone(),
            self.strategy.clone(),
            self.provider.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    fn matrix_with_ones(n: usize, m: usize, ones: &[(usize, usize)]) -> AccessMatrix {
        let mut cells = vec![false; n * m];
        for &(i, j) in ones {
            cells[i * m + j] = true;
        }
        AccessMatrix::new(n, m, cells).unwrap()
    }

    #[test]
    fn identical_tc1_matrices() {
        let ones: Vec<_> = (0..29).map(|k| (k / 15, k % 15)).collect();
        let m = matrix_with_ones(15, 15, &ones);
        assert_eq!(confusion(&m, &m).unwrap(), counts(29, 196, 0, 0));
        assert_eq!(confusion(&m, &m.complement()).unwrap(), counts(0, 0, 196, 29));
    }

    #[test]
    fn three_by_three_hand_count() {
        let original = matrix_with_ones(3, 3, &[(0, 0), (1, 1), (2, 2)]);
        let rebuilt = matrix_with_ones(3, 3, &[(0, 0), (0, 1)]);
        assert_eq!(confusion(&original, &rebuilt).unwrap(), counts(1, 5, 1, 2));
    }

    #[test]
    fn dimension_mismatch() {
        let a = AccessMatrix::zeros(2, 3).unwrap();
        let b = AccessMatrix::zeros(3, 2).unwrap();
        assert!(matches!(confusion(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn perfect_small_policy() {
        let r = score(counts(29, 196, 0, 0), 2, 10).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.size_ratio_rounded(), 0.2);
        assert_eq!(r.size_ratio_exact(), Ratio::new(1, 5));
    }

    #[test]
    fn no_true_positives_scores_zero() {
        let r = score(counts(0, 196, 0, 29), 3, 10).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = score(counts(0, 150, 46, 29), 3, 10).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn vacuous_all_deny() {
        let r = score(counts(0, 225, 0, 0), 0, 10).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn invalid_counts() {
        assert!(matches!(score(counts(0, 0, 0, 0), 1, 1), Err(Error::InvalidCounts(_))));
        assert!(matches!(score(counts(1, 0, 0, 0), 1, 0), Err(Error::InvalidCounts(_))));
    }

    #[test]
    fn one_percent_of_ten_thousand_is_one_hundred_cells() {
        let c = counts(900, 9000, 60, 40);
        assert_eq!(c.accuracy(), Ratio::new(99, 100));
        assert_eq!(c.fp + c.fn_, 100);
    }

    #[test]
    fn failed_rows_have_no_metrics() {
        let row = ResultRow::new("TC1-s0", "prompt1", "stub", 0.1288, None);
        assert!(row.failed());
        assert_eq!(row.accuracy, None);
    }
}
