//! Reference implementations used only by the integration tests. None of them share
//! code with the library's solver or ranking paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use stablasso_core::data::{standardize, Dataset};

/// Standardized Gaussian design with a sparse linear response.
pub fn random_problem(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let mut y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    for (k, j) in [0, p / 3, p / 2, p - 1].into_iter().enumerate() {
        y += x.column(j) * (2.0 - 0.4 * k as f64);
    }
    standardize(&x, &y).unwrap()
}

fn spectral_norm_sq(x: &DMatrix<f64>) -> f64 {
    let small = if x.nrows() <= x.ncols() {
        x * x.transpose()
    } else {
        x.transpose() * x
    };
    small.symmetric_eigenvalues().max()
}

/// Accelerated proximal gradient (FISTA with gradient-based restart) for
/// `(1/(2n)) ||y - X b||^2 + lambda * sum_j w_j |b_j|`.
pub fn fista_lasso(data: &Dataset, lambda: f64, weights: &[f64]) -> Vec<f64> {
    let (x, y) = (data.x(), data.y());
    let n = x.nrows() as f64;
    let p = x.ncols();
    let step = n / spectral_norm_sq(x);
    let prox = |v: f64, t: f64| v.signum() * (v.abs() - t).max(0.0);
    let mut beta = DVector::zeros(p);
    let mut momentum = beta.clone();
    let mut t = 1.0f64;
    for _ in 0..2_000_000 {
        let grad = x.tr_mul(&(x * &momentum - y)) / n;
        let next = DVector::from_fn(p, |j, _| {
            prox(momentum[j] - step * grad[j], step * lambda * weights[j])
        });
        let diff = &next - &beta;
        if diff.amax() < 1e-14 {
            beta = next;
            break;
        }
        // Restart when the momentum direction opposes the proximal step.
        let restart = (&momentum - &next).dot(&diff) > 0.0;
        let t_next = if restart {
            1.0
        } else {
            (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
        };
        momentum = if restart {
            next.clone()
        } else {
            &next + diff * ((t - 1.0) / t_next)
        };
        t = t_next;
        beta = next;
    }
    beta.iter().copied().collect()
}

pub fn scad_penalty(t: f64, lam: f64, a: f64) -> f64 {
    let t = t.abs();
    if t <= lam {
        lam * t
    } else if t <= a * lam {
        (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0))
    } else {
        lam * lam * (a + 1.0) / 2.0
    }
}

pub fn mcp_penalty(t: f64, lam: f64, gamma: f64) -> f64 {
    let t = t.abs();
    if t <= gamma * lam {
        lam * t - t * t / (2.0 * gamma)
    } else {
        gamma * lam * lam / 2.0
    }
}

/// Scalar proximal map of `pen` with unit step, found by minimizing
/// `0.5 (b - v)^2 + pen(b)` over a dense grid and then golden-section refinement.
fn scalar_prox(v: f64, pen: &dyn Fn(f64) -> f64) -> f64 {
    let f = |b: f64| 0.5 * (b - v) * (b - v) + pen(b);
    let (lo, hi) = (v.min(0.0) - 1e-9, v.max(0.0) + 1e-9);
    let steps = 2000;
    let mut best = 0.0f64;
    for k in 0..=steps {
        let b = lo + (hi - lo) * k as f64 / steps as f64;
        if f(b) < f(best) {
            best = b;
        }
    }
    let h = (hi - lo) / steps as f64;
    let (mut a, mut c) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (m1, m2) = (c - g * (c - a), a + g * (c - a));
        if f(m1) < f(m2) {
            c = m2;
        } else {
            a = m1;
        }
    }
    let mid = (a + c) / 2.0;
    if f(0.0) <= f(mid) {
        0.0
    } else {
        mid
    }
}

/// Proximal gradient with unit step on unit-variance columns for a separable nonconvex
/// penalty. Returns a stationary point reached from `init`.
pub fn prox_gradient_nonconvex(
    data: &Dataset,
    init: &[f64],
    pen: &dyn Fn(f64) -> f64,
    iters: usize,
) -> Vec<f64> {
    let (x, y) = (data.x(), data.y());
    let n = x.nrows() as f64;
    let l = spectral_norm_sq(x) / n;
    let mut beta = DVector::from_vec(init.to_vec());
    let scaled = |b: f64| pen(b) / l;
    for _ in 0..iters {
        let grad = x.tr_mul(&(x * &beta - y)) / n;
        let next = DVector::from_fn(beta.len(), |j, _| {
            scalar_prox(beta[j] - grad[j] / l, &scaled)
        });
        let change = (&next - &beta).amax();
        beta = next;
        if change < 1e-12 {
            break;
        }
    }
    beta.iter().copied().collect()
}

/// Ridge-HOLP scores through the `p x p` pseudo-inverse route:
/// `(X'X + r I)^+ X'y`, which equals `X'(XX' + r I)^{-1} y`.
pub fn ridge_holp_pinv(x: &DMatrix<f64>, y: &DVector<f64>, r: f64) -> Vec<f64> {
    let p = x.ncols();
    let a = x.transpose() * x + DMatrix::identity(p, p) * r;
    let inv = a.pseudo_inverse(1e-14).unwrap();
    (inv * x.transpose() * y).iter().map(|v| v.abs()).collect()
}

/// Condition number of a dense covariance matrix through a symmetric eigensolver.
pub fn dense_condition_number(sigma: &DMatrix<f64>) -> f64 {
    let eig = sigma.symmetric_eigenvalues();
    eig.max() / eig.min()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}
