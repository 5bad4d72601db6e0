use serde::{Deserialize, Serialize};

use crate::stability::select_from_frequencies;

/// Selection accuracy at one frequency threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScore {
    pub threshold: f64,
    pub selected: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of `{j : freq_j >= t}` against `true_support` for each `t`.
///
/// An empty selection scores precision 1, recall 0 and F1 0.
pub fn f1_curve(
    frequencies: &[f64],
    true_support: &[usize],
    thresholds: &[f64],
) -> Vec<ThresholdScore> {
    thresholds
        .iter()
        .map(|&t| {
            let selected = select_from_frequencies(frequencies, t);
            let hits = selected.iter().filter(|j| true_support.contains(j)).count() as f64;
            let precision = if selected.is_empty() {
                1.0
            } else {
                hits / selected.len() as f64
            };
            let recall = if true_support.is_empty() {
                1.0
            } else {
                hits / true_support.len() as f64
            };
            let f1 = if precision + recall > 0.0 && hits > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ThresholdScore {
                threshold: t,
                selected: selected.len(),
                precision,
                recall,
                f1,
            }
        })
        .collect()
}

/// `0.1, 0.2, ..., 0.9`.
pub fn default_thresholds() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn quartiles(values: &[f64]) -> Quartiles {
    Quartiles {
        q1: quantile(values, 0.25),
        median: quantile(values, 0.5),
        q3: quantile(values, 0.75),
    }
}
