//! Tabular data model, node statistics and training configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::split::SplitCriterion;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dataset has no feature columns")]
    NoColumns,
    #[error("dataset has no rows")]
    NoRows,
    #[error("length mismatch: {what} has {found} rows, expected {expected}")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: String, row: usize },
    #[error("response outside [0,1] at row {row}: {value}")]
    ResponseOutOfRange { row: usize, value: f64 },
    #[error("eta_true outside [0,1] at row {row}: {value}")]
    EtaOutOfRange { row: usize, value: f64 },
    #[error("response is not binary at row {row}: {value}")]
    NotBinary { row: usize, value: f64 },
}

/// Column-major feature matrix with a response in [0,1].
///
/// Immutable once built. Each feature column carries a precomputed ascending
/// sort permutation (ties broken by row index) so split scans are one ordered
/// pass over the rows of a node.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    response: Vec<f64>,
    eta_true: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        columns: Vec<(String, Vec<f64>)>,
        response: Vec<f64>,
        eta_true: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        if columns.is_empty() {
            return Err(DataError::NoColumns);
        }
        let n = columns[0].1.len();
        if n == 0 {
            return Err(DataError::NoRows);
        }
        for (name, col) in &columns {
            if col.len() != n {
                return Err(DataError::LengthMismatch {
                    what: format!("column '{name}'"),
                    expected: n,
                    found: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    what: format!("column '{name}'"),
                    row,
                });
            }
        }
        if response.len() != n {
            return Err(DataError::LengthMismatch {
                what: "response".into(),
                expected: n,
                found: response.len(),
            });
        }
        check_unit_interval(&response, "response", |row, value| {
            DataError::ResponseOutOfRange { row, value }
        })?;
        if let Some(eta) = &eta_true {
            if eta.len() != n {
                return Err(DataError::LengthMismatch {
                    what: "eta_true".into(),
                    expected: n,
                    found: eta.len(),
                });
            }
            check_unit_interval(eta, "eta_true", |row, value| DataError::EtaOutOfRange {
                row,
                value,
            })?;
        }

        let (names, columns): (Vec<_>, Vec<_>) = columns.into_iter().unzip();
        let order = columns.iter().map(|col| sort_permutation(col)).collect();
        Ok(Self {
            names,
            columns,
            order,
            response,
            eta_true,
        })
    }

    /// Builds a dataset from unnamed columns, naming them `x1..xp`.
    pub fn from_columns(
        columns: Vec<Vec<f64>>,
        response: Vec<f64>,
        eta_true: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let named = columns
            .into_iter()
            .enumerate()
            .map(|(j, c)| (format!("x{}", j + 1), c))
            .collect();
        Self::new(named, response, eta_true)
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Row indices sorted ascending by feature `j`.
    pub fn sorted_order(&self, j: usize) -> &[u32] {
        &self.order[j]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn eta_true(&self) -> Option<&[f64]> {
        self.eta_true.as_deref()
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn is_binary(&self) -> bool {
        self.response.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    pub fn require_binary(&self) -> Result<(), DataError> {
        match self
            .response
            .iter()
            .position(|&y| y != 0.0 && y != 1.0)
        {
            Some(row) => Err(DataError::NotBinary {
                row,
                value: self.response[row],
            }),
            None => Ok(()),
        }
    }

    /// Same features, different response (e.g. teacher probabilities).
    pub fn with_response(&self, response: Vec<f64>) -> Result<Self, DataError> {
        if response.len() != self.n_rows() {
            return Err(DataError::LengthMismatch {
                what: "response".into(),
                expected: self.n_rows(),
                found: response.len(),
            });
        }
        check_unit_interval(&response, "response", |row, value| {
            DataError::ResponseOutOfRange { row, value }
        })?;
        Ok(Self {
            response,
            ..self.clone()
        })
    }
}

fn check_unit_interval(
    values: &[f64],
    what: &str,
    err: impl Fn(usize, f64) -> DataError,
) -> Result<(), DataError> {
    for (row, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(DataError::NonFinite {
                what: what.to_string(),
                row,
            });
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(err(row, v));
        }
    }
    Ok(())
}

fn sort_permutation(col: &[f64]) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..col.len() as u32).collect();
    // stable sort keeps equal values in row order
    idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
    idx
}

/// Count, mean and population variance of a set of responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

pub fn node_stats(responses: &[f64]) -> NodeStats {
    let count = responses.len();
    if count == 0 {
        return NodeStats {
            count: 0,
            mean: 0.0,
            variance: 0.0,
        };
    }
    let mean = responses.iter().sum::<f64>() / count as f64;
    let variance = if count <= 1 {
        0.0
    } else {
        responses.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / count as f64
    };
    NodeStats {
        count,
        mean,
        variance,
    }
}

/// Which response a tree is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum KdFinalResponse {
    /// Final PFS/MDFS thresholds use the observed labels, wEFS the teacher
    /// probabilities.
    #[default]
    Labels,
    /// Every final criterion uses the teacher probabilities.
    Teacher,
}

/// Configuration for growing one depth-limited tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_depth: usize,
    pub min_leaf_fraction: f64,
    pub criterion: SplitCriterion,
    pub seed: u64,
    pub kd_final_response: KdFinalResponse,
}

impl TrainConfig {
    pub fn new(max_depth: usize, min_leaf_fraction: f64, criterion: SplitCriterion) -> Self {
        Self {
            max_depth,
            min_leaf_fraction,
            criterion,
            seed: 0,
            kd_final_response: KdFinalResponse::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_depth == 0 || self.max_depth > 32 {
            return Err(format!("max_depth must be in 1..=32, got {}", self.max_depth));
        }
        if !(self.min_leaf_fraction > 0.0 && self.min_leaf_fraction < 1.0) {
            return Err(format!(
                "min_leaf_fraction must be in (0,1), got {}",
                self.min_leaf_fraction
            ));
        }
        self.criterion.validate()
    }

    /// Minimum leaf size in samples, `ceil(rho * n)` and at least one.
    pub fn min_leaf_size(&self, n: usize) -> usize {
        ((self.min_leaf_fraction * n as f64).ceil() as usize).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_cols() -> Vec<(String, Vec<f64>)> {
        vec![
            ("a".into(), vec![1.0, 2.0, 3.0, 4.0]),
            ("b".into(), vec![0.5, 0.5, 0.1, 0.2]),
        ]
    }

    #[test]
    fn well_formed_dataset() {
        let ds = Dataset::new(two_cols(), vec![0.0, 1.0, 0.0, 1.0], None).unwrap();
        assert_eq!(ds.n_rows(), 4);
        assert_eq!(ds.n_features(), 2);
        assert!(ds.is_binary());
        assert_eq!(ds.sorted_order(1), &[2, 3, 0, 1]);
    }

    #[test]
    fn response_out_of_range() {
        let err = Dataset::new(two_cols(), vec![0.0, 1.5, 0.0, 1.0], None).unwrap_err();
        assert!(err.to_string().contains("response outside [0,1]"));
    }

    #[test]
    fn length_mismatch() {
        let cols = vec![
            ("a".into(), vec![1.0, 2.0, 3.0]),
            ("b".into(), vec![1.0, 2.0, 3.0, 4.0]),
        ];
        let err = Dataset::new(cols, vec![0.0; 3], None).unwrap_err();
        assert!(err.to_string().contains("length mismatch"));
    }

    #[test]
    fn non_finite_rejected() {
        let cols = vec![("a".into(), vec![1.0, f64::NAN])];
        assert!(matches!(
            Dataset::new(cols, vec![0.0, 1.0], None),
            Err(DataError::NonFinite { row: 1, .. })
        ));
    }

    #[test]
    fn eta_checked() {
        let err = Dataset::new(two_cols(), vec![0.0; 4], Some(vec![0.1, 0.2, 1.2, 0.3]));
        assert!(matches!(err, Err(DataError::EtaOutOfRange { row: 2, .. })));
        let err = Dataset::new(two_cols(), vec![0.0; 4], Some(vec![0.1]));
        assert!(matches!(err, Err(DataError::LengthMismatch { .. })));
    }

    #[test]
    fn probabilities_are_not_binary() {
        let ds = Dataset::new(two_cols(), vec![0.0, 0.3, 0.0, 1.0], None).unwrap();
        assert!(!ds.is_binary());
        assert!(matches!(ds.require_binary(), Err(DataError::NotBinary { row: 1, .. })));
    }

    #[test]
    fn node_stats_examples() {
        assert_eq!(
            node_stats(&[0.0, 0.0, 1.0, 1.0]),
            NodeStats { count: 4, mean: 0.5, variance: 0.25 }
        );
        assert_eq!(
            node_stats(&[1.0, 1.0, 1.0]),
            NodeStats { count: 3, mean: 1.0, variance: 0.0 }
        );
        assert_eq!(
            node_stats(&[]),
            NodeStats { count: 0, mean: 0.0, variance: 0.0 }
        );
    }

    #[test]
    fn min_leaf_size_rounds_up() {
        let cfg = TrainConfig::new(3, 0.01, SplitCriterion::cart());
        assert_eq!(cfg.min_leaf_size(768), 8);
        assert_eq!(cfg.min_leaf_size(5000), 50);
        assert_eq!(cfg.min_leaf_size(10), 1);
    }

    proptest! {
        #[test]
        fn binary_variance_closed_form(ys in proptest::collection::vec(0u8..=1, 1..200)) {
            let ys: Vec<f64> = ys.into_iter().map(f64::from).collect();
            let s = node_stats(&ys);
            prop_assert!((s.variance - s.mean * (1.0 - s.mean)).abs() < 1e-12);
        }

        #[test]
        fn recombined_means(ys in proptest::collection::vec(0.0f64..=1.0, 2..200), cut in 0usize..200) {
            let cut = cut % (ys.len() + 1);
            let (l, r) = ys.split_at(cut);
            let (sl, sr, sp) = (node_stats(l), node_stats(r), node_stats(&ys));
            let recombined = (sl.mean * sl.count as f64 + sr.mean * sr.count as f64) / ys.len() as f64;
            prop_assert!((recombined - sp.mean).abs() < 1e-12);
        }
    }
}
