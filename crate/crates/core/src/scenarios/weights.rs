//! Penalty-factor schemes compared in the simulations.

use std::str::FromStr;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{rng_stream, Dataset, SeedSpec};
use crate::error::{Error, Result};
use crate::ranking::{air_holp, default_threshold, ranks_to_weights, DEFAULT_AIR_HOLP_MAX_ITER};
use crate::solver::{fit_path, lambda_path, CdOptions, PenaltySpec};

/// Exponent applied to the initial estimates of the adaptive schemes.
pub const ADAPTIVE_GAMMA: f64 = 1.0;
/// Added to `|beta_init|` before inversion.
pub const ADAPTIVE_EPS: f64 = 1e-6;
pub const RANDOMIZED_ALPHA: f64 = 0.2;
pub const RANDOMIZED_PROB: f64 = 0.5;
pub const CV_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    /// `1 - 1/rank` from Air-HOLP; `threshold` defaults to `floor(n / ln n)`.
    Stable {
        threshold: Option<usize>,
        max_iter: usize,
    },
    Uniform,
    /// Adaptive weights from the Lasso at the CV-error-minimizing penalty.
    AdaptiveLassoInit {
        folds: usize,
    },
    /// Adaptive weights from marginal slopes on standardized columns.
    AdaptiveUnivariate,
    AdaptiveOls,
    /// Adaptive weights from the true coefficients.
    AdaptiveOracle,
    /// `1/alpha` with probability `prob`, else 1; drawn once.
    Randomized {
        alpha: f64,
        prob: f64,
    },
}

impl WeightScheme {
    pub fn stable() -> Self {
        WeightScheme::Stable {
            threshold: None,
            max_iter: DEFAULT_AIR_HOLP_MAX_ITER,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Stable { .. } => "stable",
            WeightScheme::Uniform => "uniform",
            WeightScheme::AdaptiveLassoInit { .. } => "adaptive_lasso_init",
            WeightScheme::AdaptiveUnivariate => "adaptive_univariate",
            WeightScheme::AdaptiveOls => "adaptive_ols",
            WeightScheme::AdaptiveOracle => "adaptive_oracle",
            WeightScheme::Randomized { .. } => "randomized",
        }
    }

    /// Stable per-kind tag used to derive the scheme's random stream.
    pub(crate) fn stream_tag(&self) -> u64 {
        match self {
            WeightScheme::Stable { .. } => 0,
            WeightScheme::Uniform => 1,
            WeightScheme::AdaptiveLassoInit { .. } => 2,
            WeightScheme::AdaptiveUnivariate => 3,
            WeightScheme::AdaptiveOls => 4,
            WeightScheme::AdaptiveOracle => 5,
            WeightScheme::Randomized { .. } => 6,
        }
    }

    pub fn needs_seed(&self) -> bool {
        matches!(
            self,
            WeightScheme::AdaptiveLassoInit { .. } | WeightScheme::Randomized { .. }
        )
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "stable" => WeightScheme::stable(),
            "uniform" | "lasso" => WeightScheme::Uniform,
            "adaptive_lasso_init" | "adaptive_l" => {
                WeightScheme::AdaptiveLassoInit { folds: CV_FOLDS }
            }
            "adaptive_univariate" | "adaptive_u" => WeightScheme::AdaptiveUnivariate,
            "adaptive_ols" => WeightScheme::AdaptiveOls,
            "adaptive_oracle" | "adaptive_o" => WeightScheme::AdaptiveOracle,
            "randomized" => WeightScheme::Randomized {
                alpha: RANDOMIZED_ALPHA,
                prob: RANDOMIZED_PROB,
            },
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown weight scheme {other:?}"
                )))
            }
        })
    }
}

impl std::fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Penalty factors for `scheme`, computed once on the full data.
pub fn make_weights(
    scheme: &WeightScheme,
    data: &Dataset,
    true_beta: Option<&[f64]>,
    seed: SeedSpec,
) -> Result<Vec<f64>> {
    let p = data.p();
    match *scheme {
        WeightScheme::Stable {
            threshold,
            max_iter,
        } => {
            let d = threshold.unwrap_or_else(|| default_threshold(data.n()).min(p));
            let ranking = air_holp(data, d, max_iter)?;
            Ok(ranks_to_weights(&ranking).into_inner())
        }
        WeightScheme::Uniform => Ok(vec![1.0; p]),
        WeightScheme::AdaptiveLassoInit { folds } => {
            let beta = cv_lasso(data, folds, seed)?.beta;
            Ok(adaptive(&beta))
        }
        WeightScheme::AdaptiveUnivariate => Ok(adaptive(&marginal_slopes(data))),
        WeightScheme::AdaptiveOls => Ok(adaptive(&ols(data)?)),
        WeightScheme::AdaptiveOracle => {
            let beta = true_beta.ok_or(Error::OracleUnavailable)?;
            if beta.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "true coefficients have length {}, expected {p}",
                    beta.len()
                )));
            }
            Ok(adaptive(beta))
        }
        WeightScheme::Randomized { alpha, prob } => {
            if !(alpha > 0.0 && alpha <= 1.0) || !(prob > 0.0 && prob < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "randomized weights need alpha in (0, 1] and prob in (0, 1), got {alpha}, {prob}"
                )));
            }
            let mut rng = rng_stream(seed);
            Ok((0..p)
                .map(|_| {
                    if rng.random_bool(prob) {
                        1.0 / alpha
                    } else {
                        1.0
                    }
                })
                .collect())
        }
    }
}

fn adaptive(beta: &[f64]) -> Vec<f64> {
    beta.iter()
        .map(|b| 1.0 / (b.abs() + ADAPTIVE_EPS).powf(ADAPTIVE_GAMMA))
        .collect()
}

/// `(1/n) x_j'y`, the least-squares slope of each standardized column on its own.
pub fn marginal_slopes(data: &Dataset) -> Vec<f64> {
    let n = data.n() as f64;
    data.x().tr_mul(data.y()).iter().map(|v| v / n).collect()
}

pub fn ols(data: &Dataset) -> Result<Vec<f64>> {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::OlsUnderdetermined { n, p });
    }
    let gram = data.x().tr_mul(data.x());
    let rhs = data.x().tr_mul(data.y());
    let beta: DVector<f64> = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            gram.pseudo_inverse(1e-12)
                .map_err(|e| Error::InvalidInput(format!("OLS solve failed: {e}")))?
                * rhs
        }
    };
    Ok(beta.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvLasso {
    pub lambdas: Vec<f64>,
    pub cv_error: Vec<f64>,
    pub best_index: usize,
    /// Full-data fit at the CV-minimizing penalty.
    pub beta: Vec<f64>,
}

/// K-fold cross-validated Lasso (uniform weights, mean squared prediction error).
///
/// Folds come from a seeded shuffle. Each training fold is re-standardized and
/// predictions map the held-out rows through the training means and scales.
pub fn cv_lasso(data: &Dataset, folds: usize, seed: SeedSpec) -> Result<CvLasso> {
    let (n, p) = (data.n(), data.p());
    if folds < 2 || folds > n {
        return Err(Error::InvalidInput(format!(
            "need 2 <= folds <= n, got {folds}"
        )));
    }
    let weights = vec![1.0; p];
    let min_ratio = if p >= n { 0.01 } else { 1e-4 };
    let lambdas = lambda_path(data, &weights, 100, min_ratio)?.values;
    let template = PenaltySpec::lasso(0.0, weights);
    let opts = CdOptions::default();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_stream(seed));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let mut sse = vec![0.0; lambdas.len()];
    for k in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
        let sub = data.subsample(&train);
        let fits = fit_path(&sub, &template, &lambdas, &opts)?;
        for (l, fit) in fits.iter().enumerate() {
            for &i in &test {
                let mut pred = sub.y_mean();
                for (j, &b) in fit.beta.iter().enumerate() {
                    if b != 0.0 {
                        let s = sub.column_sds()[j];
                        pred += b * (data.x()[(i, j)] - sub.column_means()[j]) / s;
                    }
                }
                let e = data.y()[i] - pred;
                sse[l] += e * e;
            }
        }
    }
    let cv_error: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let best_index = (0..cv_error.len()).fold(0, |best, l| {
        if cv_error[l] < cv_error[best] {
            l
        } else {
            best
        }
    });
    let full = fit_path(data, &template, &lambdas[..=best_index], &opts)?;
    let beta = full.last().expect("non-empty path").beta.clone();
    Ok(CvLasso {
        lambdas,
        cv_error,
        best_index,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::standardize;
    use nalgebra::DMatrix;

    fn toy() -> Dataset {
        let x = DMatrix::from_fn(30, 4, |i, j| {
            (((i * 7 + j * 13) % 11) as f64 - 5.0) + 0.3 * (i * j) as f64
        });
        let y = DVector::from_fn(30, |i, _| {
            2.0 * x[(i, 0)] - x[(i, 2)] + ((i % 3) as f64 - 1.0)
        });
        standardize(&x, &y).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for name in [
            "stable",
            "uniform",
            "adaptive_lasso_init",
            "adaptive_univariate",
            "adaptive_ols",
            "adaptive_oracle",
            "randomized",
        ] {
            assert_eq!(name.parse::<WeightScheme>().unwrap().name(), name);
        }
        assert!("ridge".parse::<WeightScheme>().is_err());
    }

    #[test]
    fn oracle_weights() {
        let d = toy();
        let w = make_weights(
            &WeightScheme::AdaptiveOracle,
            &d,
            Some(&[3.0, 0.0, -1.0, 0.0]),
            SeedSpec::new(0, 0),
        )
        .unwrap();
        assert!((w[0] - 1.0 / (3.0 + 1e-6)).abs() < 1e-12);
        assert!((w[1] - 1e6).abs() < 1e-6);
        assert!(matches!(
            make_weights(&WeightScheme::AdaptiveOracle, &d, None, SeedSpec::new(0, 0)),
            Err(Error::OracleUnavailable)
        ));
    }

    #[test]
    fn randomized_weights_two_values() {
        let d = toy();
        let scheme: WeightScheme = "randomized".parse().unwrap();
        let w = make_weights(&scheme, &d, None, SeedSpec::new(5, 1)).unwrap();
        assert!(w.iter().all(|v| *v == 5.0 || *v == 1.0));
        assert_eq!(
            w,
            make_weights(&scheme, &d, None, SeedSpec::new(5, 1)).unwrap()
        );
    }

    #[test]
    fn ols_needs_more_rows_than_columns() {
        let x = DMatrix::from_fn(3, 4, |i, j| ((i * i + 1) * (j + 1)) as f64 + (i * j) as f64);
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        let d = standardize(&x, &y).unwrap();
        assert!(matches!(
            ols(&d),
            Err(Error::OlsUnderdetermined { n: 3, p: 4 })
        ));
    }

    #[test]
    fn ols_solves_normal_equations() {
        let d = toy();
        let beta = ols(&d).unwrap();
        let r = d.y() - d.x() * DVector::from_vec(beta);
        let grad = d.x().tr_mul(&r);
        assert!(grad.amax() < 1e-8);
    }

    #[test]
    fn univariate_slopes_are_marginal_covariances() {
        let d = toy();
        let s = marginal_slopes(&d);
        let direct: f64 = d.x().column(2).dot(d.y()) / 30.0;
        assert!((s[2] - direct).abs() < 1e-14);
    }

    #[test]
    fn cv_lasso_picks_a_grid_point() {
        let d = toy();
        let cv = cv_lasso(&d, 5, SeedSpec::new(1, 0)).unwrap();
        assert!(cv.best_index < cv.lambdas.len());
        assert!(cv.cv_error.iter().all(|e| *e >= cv.cv_error[cv.best_index]));
        assert!(cv.beta[0] != 0.0);
    }
}
