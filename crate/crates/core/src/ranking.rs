//! Correlation-adjusted predictor ranking (Ridge-HOLP and its data-adaptive variant) and the
//! rank-to-penalty-weight map.
//!
//! The Ridge-HOLP statistic is `|X' (XX' + rI)^-1 Y|`. Only the `n x n` Gram matrix is ever
//! factored, so the cost is `O(n^2 p + n^3)` and stays cheap when `p >> n`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Ridge penalty used by [`ridge_holp`] when the caller has no preference.
pub const DEFAULT_RIDGE_PENALTY: f64 = 10.0;

/// Maximum Air-HOLP iterations used throughout the simulations.
pub const DEFAULT_AIR_HOLP_MAX_ITER: usize = 10;

/// Condition estimate above which the ridge system is reported singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Multipliers of the Air-HOLP penalty grid, applied to `(n/p) * trace(XX')/n`.
pub const AIR_HOLP_GRID: [f64; 7] = [1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// 1-based ranks; rank 1 is the most relevant predictor.
    pub ranks: Vec<usize>,
    pub scores: Vec<f64>,
    pub ridge_penalty: f64,
    pub iterations_used: usize,
}

impl Ranking {
    /// Orders variables by descending score, ties by ascending index.
    pub fn from_scores(scores: Vec<f64>, ridge_penalty: f64, iterations_used: usize) -> Self {
        let order = order_by_score(&scores);
        let mut ranks = vec![0; scores.len()];
        for (pos, &j) in order.iter().enumerate() {
            ranks[j] = pos + 1;
        }
        Ranking {
            ranks,
            scores,
            ridge_penalty,
            iterations_used,
        }
    }

    pub fn p(&self) -> usize {
        self.ranks.len()
    }

    /// Variable indices ordered from rank 1 downwards.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (j, &r) in self.ranks.iter().enumerate() {
            order[r - 1] = j;
        }
        order
    }

    /// Indices of the `d` best-ranked variables, sorted ascending.
    pub fn top(&self, d: usize) -> Vec<usize> {
        let mut top: Vec<usize> = self.order().into_iter().take(d).collect();
        top.sort_unstable();
        top
    }
}

fn order_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Per-variable penalty factors `w_j = 1 - 1/r_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn ranks_to_weights(ranking: &Ranking) -> WeightVector {
    WeightVector(
        ranking
            .ranks
            .iter()
            .map(|&r| 1.0 - 1.0 / r as f64)
            .collect(),
    )
}

/// Screening threshold `floor(n / ln n)`, at least 1.
pub fn default_threshold(n: usize) -> usize {
    let n = n as f64;
    ((n / n.ln()).floor() as usize).max(1)
}

/// Ridge-HOLP ranking of a standardized dataset.
pub fn ridge_holp(data: &Dataset, ridge_penalty: f64) -> Result<Ranking> {
    ridge_holp_xy(data.x(), data.y(), ridge_penalty)
}

/// Ridge-HOLP on arbitrary `x`, `y` (no standardization requirement).
pub fn ridge_holp_xy(x: &DMatrix<f64>, y: &DVector<f64>, ridge_penalty: f64) -> Result<Ranking> {
    check_xy(x, y)?;
    if !(ridge_penalty > 0.0) || !ridge_penalty.is_finite() {
        return Err(Error::InvalidInput(format!(
            "ridge penalty must be positive, got {ridge_penalty}"
        )));
    }
    let gram = x * x.transpose();
    let scores = holp_scores(x, y, &gram, ridge_penalty)?;
    Ok(Ranking::from_scores(scores, ridge_penalty, 1))
}

fn check_xy(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} rows but y has length {}",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// `|X' (G + rI)^-1 y|` with `G = XX'` precomputed.
fn holp_scores(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    gram: &DMatrix<f64>,
    r: f64,
) -> Result<Vec<f64>> {
    let n = gram.nrows();
    let mut system = gram.clone();
    for i in 0..n {
        system[(i, i)] += r;
    }
    let chol = system.cholesky().ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let diag = chol.l_dirty().diagonal();
    let (dmax, dmin) = diag.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &d| {
        (hi.max(d), lo.min(d))
    });
    let condition = (dmax / dmin).powi(2);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let alpha = chol.solve(y);
    Ok(x.tr_mul(&alpha).iter().map(|v| v.abs()).collect())
}

/// Generalized cross-validation score of the kernel ridge smoother `K (K + rI)^-1`,
/// evaluated from the eigendecomposition of `K`.
fn gcv_score(eigenvalues: &[f64], projected_y_sq: &[f64], r: f64) -> f64 {
    let n = eigenvalues.len() as f64;
    let mut rss = 0.0;
    let mut df = 0.0;
    for (&e, &z2) in eigenvalues.iter().zip(projected_y_sq) {
        let e = e.max(0.0);
        let shrink = r / (e + r);
        rss += shrink * shrink * z2;
        df += e / (e + r);
    }
    let denom = 1.0 - df / n;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (rss / n) / (denom * denom)
}

/// Picks the grid penalty minimizing GCV for the kernel `gram`.
fn select_penalty_gcv(gram: &DMatrix<f64>, y: &DVector<f64>, grid: &[f64]) -> f64 {
    let eig = SymmetricEigen::new(gram.clone());
    let proj = eig.eigenvectors.tr_mul(y);
    let proj_sq: Vec<f64> = proj.iter().map(|v| v * v).collect();
    let eigenvalues = eig.eigenvalues.as_slice();
    let mut best = (f64::INFINITY, grid[0]);
    for &r in grid {
        let score = gcv_score(eigenvalues, &proj_sq, r);
        if score < best.0 {
            best = (score, r);
        }
    }
    best.1
}

/// Air-HOLP ranking of a standardized dataset.
pub fn air_holp(data: &Dataset, threshold_d: usize, max_iter: usize) -> Result<Ranking> {
    air_holp_xy(data.x(), data.y(), threshold_d, max_iter)
}

/// Data-adaptive Ridge-HOLP.
///
/// Each iteration picks the ridge penalty from a fixed log-spaced grid by GCV of the kernel
/// ridge fit on the current candidate set (all variables in the first iteration, the
/// previous top-`threshold_d` set afterwards), then re-ranks all `p` variables with the full
/// Gram matrix. Stops once the top-`threshold_d` set repeats or after `max_iter` rounds.
pub fn air_holp_xy(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    threshold_d: usize,
    max_iter: usize,
) -> Result<Ranking> {
    check_xy(x, y)?;
    let (n, p) = x.shape();
    if threshold_d < 1 || threshold_d > n.min(p) {
        return Err(Error::InvalidInput(format!(
            "screening threshold must lie in [1, min(n, p)] = [1, {}], got {threshold_d}",
            n.min(p)
        )));
    }
    if max_iter < 1 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }

    let gram = x * x.transpose();
    let scale = (n as f64 / p as f64) * gram.trace() / n as f64;
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(
            "design matrix is identically zero".into(),
        ));
    }
    let grid: Vec<f64> = AIR_HOLP_GRID.iter().map(|m| m * scale).collect();

    let mut candidate_gram = gram.clone();
    let mut previous_top: Option<Vec<usize>> = None;
    let mut ranking = None;
    for iteration in 1..=max_iter {
        let r = select_penalty_gcv(&candidate_gram, y, &grid);
        let scores = holp_scores(x, y, &gram, r)?;
        let current = Ranking::from_scores(scores, r, iteration);
        let top = current.top(threshold_d);
        let settled = previous_top.as_ref() == Some(&top);
        ranking = Some(current);
        if settled {
            break;
        }
        let screened = x.select_columns(&top);
        candidate_gram = &screened * screened.transpose();
        previous_top = Some(top);
    }
    Ok(ranking.expect("at least one iteration runs"))
}
