//! Cyclic coordinate descent for weighted Lasso, SCAD and MCP.
//!
//! The objective is
//!
//! ```text
//! (1/(2n)) ||y - X b||^2 + sum_j pen(|b_j|; lambda * w_j)
//! ```
//!
//! where `pen(t; l) = l * t` for the Lasso and the SCAD / MCP penalties with threshold `l`
//! otherwise. Columns are expected to be standardized so that `(1/n) x_j'x_j = 1`; zero
//! columns (constant on a subsample) are skipped and stay at zero. A weight of 0 makes the
//! coordinate an unpenalized least-squares update.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;
pub const DEFAULT_MCP_GAMMA: f64 = 3.0;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
/// Consecutive objective increases tolerated before a nonconvex fit is declared divergent.
pub const DIVERGENCE_WINDOW: usize = 100;
/// Active-set sweeps between Anderson extrapolation attempts.
pub const ANDERSON_DEPTH: usize = 5;
/// Active-set sweeps between sign-fixed Newton steps.
const NEWTON_INTERVAL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Lasso,
    Scad,
    Mcp,
}

impl FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Self::Lasso),
            "scad" => Ok(Self::Scad),
            "mcp" => Ok(Self::Mcp),
            other => Err(Error::InvalidInput(format!(
                "unknown penalty family {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lasso => "lasso",
            Self::Scad => "scad",
            Self::Mcp => "mcp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub scad_a: f64,
    pub mcp_gamma: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, weights: Vec<f64>) -> Self {
        Self {
            family,
            lambda,
            weights,
            scad_a: DEFAULT_SCAD_A,
            mcp_gamma: DEFAULT_MCP_GAMMA,
        }
    }

    pub fn lasso(lambda: f64, weights: Vec<f64>) -> Self {
        Self::new(PenaltyFamily::Lasso, lambda, weights)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.weights.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} penalty weights for {p} predictors",
                self.weights.len()
            )));
        }
        if let Some(w) = self
            .weights
            .iter()
            .find(|w| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "penalty weight {w} is not a finite non-negative number"
            )));
        }
        if !(self.scad_a > 2.0) {
            return Err(Error::InvalidInput(format!(
                "SCAD a must exceed 2, got {}",
                self.scad_a
            )));
        }
        if !(self.mcp_gamma > 1.0) {
            return Err(Error::InvalidInput(format!(
                "MCP gamma must exceed 1, got {}",
                self.mcp_gamma
            )));
        }
        Ok(())
    }

    /// Penalty of a single coefficient under threshold `lam = lambda * w_j`.
    pub fn unit_penalty(&self, beta: f64, lam: f64) -> f64 {
        let t = beta.abs();
        match self.family {
            PenaltyFamily::Lasso => lam * t,
            PenaltyFamily::Scad => {
                let a = self.scad_a;
                if t <= lam {
                    lam * t
                } else if t <= a * lam {
                    (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0))
                } else {
                    lam * lam * (a + 1.0) / 2.0
                }
            }
            PenaltyFamily::Mcp => {
                let g = self.mcp_gamma;
                if t <= g * lam {
                    lam * t - t * t / (2.0 * g)
                } else {
                    g * lam * lam / 2.0
                }
            }
        }
    }

    /// Derivative of [`Self::unit_penalty`] in `t = |beta|` for `t > 0`.
    pub fn unit_penalty_slope(&self, t: f64, lam: f64) -> f64 {
        match self.family {
            PenaltyFamily::Lasso => lam,
            PenaltyFamily::Scad => {
                let a = self.scad_a;
                if t <= lam {
                    lam
                } else if t <= a * lam {
                    (a * lam - t) / (a - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyFamily::Mcp => {
                let g = self.mcp_gamma;
                if t <= g * lam {
                    lam - t / g
                } else {
                    0.0
                }
            }
        }
    }

    fn update(&self, z: f64, lam: f64) -> f64 {
        match self.family {
            PenaltyFamily::Lasso => soft_threshold(z, lam),
            PenaltyFamily::Scad => scad_update(z, lam, self.scad_a),
            PenaltyFamily::Mcp => mcp_update(z, lam, self.mcp_gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Objective after every sweep; only filled when [`CdOptions::record_objective`] is set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    /// Indices of non-zero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxIterExceeded(self.iterations))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub record_objective: bool,
    /// Accelerates active-set sweeps (Lasso family only) with Anderson extrapolation and
    /// occasional sign-fixed Newton steps on the active set. Either step is kept only when
    /// it lowers the objective, so the iteration remains a descent method with the same
    /// fixed points and the same stopping rule.
    pub accelerate: bool,
}

impl Default for CdOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            record_objective: false,
            accelerate: true,
        }
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn scad_update(z: f64, lam: f64, a: f64) -> f64 {
    let az = z.abs();
    if az <= 2.0 * lam {
        soft_threshold(z, lam)
    } else if az <= a * lam {
        soft_threshold(z, a * lam / (a - 1.0)) / (1.0 - 1.0 / (a - 1.0))
    } else {
        z
    }
}

pub fn mcp_update(z: f64, lam: f64, gamma: f64) -> f64 {
    if z.abs() <= gamma * lam {
        soft_threshold(z, lam) / (1.0 - 1.0 / gamma)
    } else {
        z
    }
}

#[inline]
fn column(x: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = x.nrows();
    &x.as_slice()[j * n..(j + 1) * n]
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn residual(data: &Dataset, beta: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = data.y().iter().copied().collect();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (ri, xi) in r.iter_mut().zip(column(data.x(), j)) {
                *ri -= b * xi;
            }
        }
    }
    r
}

/// Objective value at `beta`.
pub fn objective(data: &Dataset, penalty: &PenaltySpec, beta: &[f64]) -> f64 {
    let r = residual(data, beta);
    objective_from_residual(data.n(), penalty, beta, &r)
}

fn objective_from_residual(n: usize, penalty: &PenaltySpec, beta: &[f64], r: &[f64]) -> f64 {
    let loss = dot(r, r) / (2.0 * n as f64);
    let pen: f64 = beta
        .iter()
        .zip(&penalty.weights)
        .filter(|(b, _)| **b != 0.0)
        .map(|(&b, &w)| penalty.unit_penalty(b, penalty.lambda * w))
        .sum();
    loss + pen
}

struct Workspace<'a> {
    data: &'a Dataset,
    penalty: &'a PenaltySpec,
    col_sq: &'a [f64],
    beta: Vec<f64>,
    r: Vec<f64>,
}

impl Workspace<'_> {
    /// Updates coordinate `j` and returns the absolute coefficient change.
    #[inline]
    fn update(&mut self, j: usize) -> f64 {
        let v = self.col_sq[j];
        if v == 0.0 {
            return 0.0;
        }
        let n = self.data.n() as f64;
        let xj = column(self.data.x(), j);
        let old = self.beta[j];
        let lam = self.penalty.lambda * self.penalty.weights[j];
        let grad = dot(xj, &self.r) / n;
        let new = match self.penalty.family {
            PenaltyFamily::Lasso => soft_threshold(grad + v * old, lam) / v,
            _ => self.penalty.update(grad / v + old, lam),
        };
        let delta = new - old;
        if delta != 0.0 {
            for (ri, xi) in self.r.iter_mut().zip(xj) {
                *ri -= delta * xi;
            }
            self.beta[j] = new;
        }
        delta.abs()
    }

    fn objective(&self) -> f64 {
        objective_from_residual(self.data.n(), self.penalty, &self.beta, &self.r)
    }

    /// Anderson extrapolation over consecutive active-set iterates; the extrapolated point
    /// replaces the current one only if it has a lower objective.
    fn extrapolate(&mut self, active: &[usize], history: &[Vec<f64>]) {
        let k = history.len() - 1;
        let diffs = DMatrix::from_fn(active.len(), k, |i, c| history[c + 1][i] - history[c][i]);
        let mut gram = diffs.tr_mul(&diffs);
        let scale = gram.trace();
        if !(scale > 0.0) || !scale.is_finite() {
            return;
        }
        for c in 0..k {
            gram[(c, c)] += 1e-10 * scale;
        }
        let Some(z) = gram.lu().solve(&DVector::from_element(k, 1.0)) else {
            return;
        };
        let total = z.sum();
        if !total.is_finite() || total == 0.0 {
            return;
        }
        let mut beta = self.beta.clone();
        for (i, &j) in active.iter().enumerate() {
            beta[j] = (0..k).map(|c| z[c] / total * history[c + 1][i]).sum();
        }
        self.accept_if_better(beta);
    }

    /// Descent step on the smooth quadratic obtained by fixing the signs of the active
    /// coefficients. The direction is the (slightly ridge-stabilized) Newton direction; the
    /// step length is the exact minimizer along it, cut short where the first penalized
    /// coefficient reaches zero. When the active columns are linearly dependent the
    /// direction runs along their null space and the cut drops a redundant coefficient.
    fn newton_step(&mut self, active: &[usize]) {
        let active: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&j| self.beta[j] != 0.0)
            .collect();
        let k = active.len();
        if k == 0 {
            return;
        }
        let n = self.data.n() as f64;
        let x = self.data.x();
        let cols: Vec<&[f64]> = active.iter().map(|&j| column(x, j)).collect();
        let mut gram = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..=a {
                let v = dot(cols[a], cols[b]) / n;
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        // Gradient of the sign-fixed objective at the current point.
        let grad = DVector::from_fn(k, |a, _| {
            let j = active[a];
            -dot(cols[a], &self.r) / n
                + self.penalty.lambda * self.penalty.weights[j] * self.beta[j].signum()
        });
        let mut shifted = gram.clone();
        let ridge = 1e-9 * (0..k).map(|a| gram[(a, a)]).fold(0.0, f64::max);
        for a in 0..k {
            shifted[(a, a)] += ridge;
        }
        let Some(chol) = shifted.cholesky() else {
            return;
        };
        let dir = -chol.solve(&grad);
        let slope = grad.dot(&dir);
        let curvature = dir.dot(&(&gram * &dir));
        if !(slope < 0.0) || !slope.is_finite() || !curvature.is_finite() {
            return;
        }
        let mut step = if curvature > 0.0 {
            -slope / curvature
        } else {
            f64::INFINITY
        };
        let mut hits_zero = None;
        for (a, &j) in active.iter().enumerate() {
            let (old, d) = (self.beta[j], dir[a]);
            if self.penalty.weights[j] > 0.0 && old * d < 0.0 {
                let t = -old / d;
                if t < step {
                    step = t;
                    hits_zero = Some(j);
                }
            }
        }
        if !step.is_finite() {
            return;
        }
        let mut beta = self.beta.clone();
        for (a, &j) in active.iter().enumerate() {
            beta[j] += step * dir[a];
        }
        if let Some(j) = hits_zero {
            beta[j] = 0.0;
        }
        self.accept_if_better(beta);
    }

    fn accept_if_better(&mut self, beta: Vec<f64>) {
        let r = residual(self.data, &beta);
        if objective_from_residual(self.data.n(), self.penalty, &beta, &r) < self.objective() {
            self.beta = beta;
            self.r = r;
        }
    }
}

fn column_squares(data: &Dataset) -> Vec<f64> {
    let n = data.n() as f64;
    (0..data.p())
        .map(|j| {
            let c = column(data.x(), j);
            dot(c, c) / n
        })
        .collect()
}

/// Fits a single penalty level by cyclic coordinate descent with an active-set strategy.
///
/// A fit that exhausts `max_sweeps` is returned with `converged = false`; use
/// [`FitResult::require_converged`] to turn that into [`Error::MaxIterExceeded`].
pub fn cd_fit(data: &Dataset, penalty: &PenaltySpec, init: Option<&[f64]>) -> Result<FitResult> {
    cd_fit_with(data, penalty, init, &CdOptions::default())
}

pub fn cd_fit_with(
    data: &Dataset,
    penalty: &PenaltySpec,
    init: Option<&[f64]>,
    opts: &CdOptions,
) -> Result<FitResult> {
    penalty.validate(data.p())?;
    let col_sq = column_squares(data);
    cd_fit_inner(data, penalty, init, opts, &col_sq)
}

fn cd_fit_inner(
    data: &Dataset,
    penalty: &PenaltySpec,
    init: Option<&[f64]>,
    opts: &CdOptions,
    col_sq: &[f64],
) -> Result<FitResult> {
    let p = data.p();
    let beta = match init {
        Some(b) if b.len() != p => {
            return Err(Error::DimensionMismatch(format!(
                "initial coefficients have length {}, expected {p}",
                b.len()
            )))
        }
        Some(b) => b.to_vec(),
        None => vec![0.0; p],
    };
    let r = residual(data, &beta);
    let mut ws = Workspace {
        data,
        penalty,
        col_sq,
        beta,
        r,
    };

    let nonconvex = penalty.family != PenaltyFamily::Lasso;
    let accelerate = opts.accelerate && !nonconvex;
    let track = nonconvex || opts.record_objective;
    let mut trace = Vec::new();
    let mut last_obj = if track { ws.objective() } else { f64::NAN };
    let mut increases = 0usize;
    let mut sweeps = 0usize;
    let mut converged = false;
    let mut active: Vec<usize> = Vec::new();

    let mut after_sweep = |ws: &Workspace, sweeps: usize, trace: &mut Vec<f64>| -> Result<()> {
        if !track {
            return Ok(());
        }
        let obj = ws.objective();
        if opts.record_objective {
            trace.push(obj);
        }
        if nonconvex {
            if obj > last_obj {
                increases += 1;
                if increases >= DIVERGENCE_WINDOW {
                    return Err(Error::NonConvexDiverged(sweeps));
                }
            } else {
                increases = 0;
            }
        }
        last_obj = obj;
        Ok(())
    };

    'outer: while sweeps < opts.max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..p {
            max_change = max_change.max(ws.update(j));
        }
        sweeps += 1;
        after_sweep(&ws, sweeps, &mut trace)?;
        if max_change < opts.tol {
            converged = true;
            break;
        }

        active.clear();
        active.extend((0..p).filter(|&j| ws.beta[j] != 0.0));
        let mut history: Vec<Vec<f64>> = Vec::new();
        let mut inner = 0usize;
        while sweeps < opts.max_sweeps {
            let mut max_change = 0.0f64;
            for &j in &active {
                max_change = max_change.max(ws.update(j));
            }
            sweeps += 1;
            inner += 1;
            if accelerate && max_change >= opts.tol {
                if inner % NEWTON_INTERVAL == NEWTON_INTERVAL / 2 {
                    ws.newton_step(&active);
                    history.clear();
                } else {
                    history.push(active.iter().map(|&j| ws.beta[j]).collect());
                    if history.len() == ANDERSON_DEPTH + 1 {
                        ws.extrapolate(&active, &history);
                        history.clear();
                    }
                }
            }
            after_sweep(&ws, sweeps, &mut trace)?;
            if max_change < opts.tol {
                continue 'outer;
            }
        }
    }

    let objective = ws.objective();
    Ok(FitResult {
        beta: ws.beta,
        lambda: penalty.lambda,
        iterations: sweeps,
        converged,
        objective,
        objective_trace: trace,
    })
}

/// Warm-started fits along a sequence of penalty levels on one dataset.
pub struct PathFitter<'a> {
    data: &'a Dataset,
    template: PenaltySpec,
    opts: CdOptions,
    col_sq: Vec<f64>,
    warm: Option<Vec<f64>>,
}

impl<'a> PathFitter<'a> {
    pub fn new(data: &'a Dataset, template: &PenaltySpec, opts: &CdOptions) -> Result<Self> {
        template.validate(data.p())?;
        Ok(Self {
            data,
            template: template.clone(),
            opts: *opts,
            col_sq: column_squares(data),
            warm: None,
        })
    }

    /// Fits `lambda`, starting from the previous solution.
    pub fn fit(&mut self, lambda: f64) -> Result<FitResult> {
        let penalty = self.template.with_lambda(lambda);
        penalty.validate(self.data.p())?;
        let fit = cd_fit_inner(
            self.data,
            &penalty,
            self.warm.as_deref(),
            &self.opts,
            &self.col_sq,
        )?;
        self.warm = Some(fit.beta.clone());
        Ok(fit)
    }
}

/// Fits a decreasing sequence of penalty levels, warm-starting each from the previous one.
pub fn fit_path(
    data: &Dataset,
    template: &PenaltySpec,
    lambdas: &[f64],
    opts: &CdOptions,
) -> Result<Vec<FitResult>> {
    let mut fitter = PathFitter::new(data, template, opts)?;
    lambdas.iter().map(|&l| fitter.fit(l)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub values: Vec<f64>,
    pub min_ratio: f64,
}

impl LambdaPath {
    pub fn num_values(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }
}

/// Least-squares fit on the unpenalized (zero-weight) columns; returns the residual.
fn unpenalized_residual(data: &Dataset, weights: &[f64]) -> DVector<f64> {
    let free: Vec<usize> = (0..data.p()).filter(|&j| weights[j] == 0.0).collect();
    if free.is_empty() {
        return data.y().clone();
    }
    let xf = data.x().select_columns(&free);
    let gram = xf.tr_mul(&xf);
    let rhs = xf.tr_mul(data.y());
    let coef = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .pseudo_inverse(1e-12)
            .map(|pinv| pinv * &rhs)
            .unwrap_or_else(|_| DVector::zeros(free.len())),
    };
    data.y() - xf * coef
}

/// Smallest penalty at which every positively weighted coefficient is zero.
///
/// Zero-weight coordinates are fitted by least squares first and the boundary is taken
/// against that partial residual; with no zero weights this is `max_j |x_j'y/n| / w_j`.
pub fn lambda_max(data: &Dataset, weights: &[f64]) -> Result<f64> {
    if weights.len() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} penalty weights for {} predictors",
            weights.len(),
            data.p()
        )));
    }
    if weights.iter().all(|w| *w <= 0.0) {
        return Err(Error::AllWeightsZero);
    }
    let r = unpenalized_residual(data, weights);
    let n = data.n() as f64;
    let lmax = (0..data.p())
        .filter(|&j| weights[j] > 0.0)
        .map(|j| dot(column(data.x(), j), r.as_slice()).abs() / n / weights[j])
        .fold(0.0f64, f64::max);
    Ok(lmax)
}

/// Log-spaced grid from `lambda_max` down to `min_ratio * lambda_max`.
pub fn lambda_path(
    data: &Dataset,
    weights: &[f64],
    num_values: usize,
    min_ratio: f64,
) -> Result<LambdaPath> {
    if num_values < 1 {
        return Err(Error::InvalidInput(
            "lambda path needs at least one value".into(),
        ));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "min_ratio must lie in (0, 1), got {min_ratio}"
        )));
    }
    let lmax = lambda_max(data, weights)?;
    if !(lmax > 0.0) {
        return Err(Error::InvalidInput(
            "response is orthogonal to every penalized predictor; lambda_max is 0".into(),
        ));
    }
    Ok(LambdaPath {
        values: log_grid(lmax, min_ratio, num_values),
        min_ratio,
    })
}

pub(crate) fn log_grid(top: f64, min_ratio: f64, num: usize) -> Vec<f64> {
    if num == 1 {
        return vec![top];
    }
    let step = min_ratio.ln() / (num - 1) as f64;
    let mut values: Vec<f64> = (0..num).map(|k| top * (step * k as f64).exp()).collect();
    values[num - 1] = min_ratio * top;
    values
}

/// Largest violation of the first-order optimality conditions at `beta`.
///
/// For Lasso this is the exact subgradient residual. For SCAD and MCP the penalty slope at
/// `|beta_j|` replaces `lambda * w_j` on non-zero coordinates, which certifies a stationary
/// point rather than a global minimum.
pub fn kkt_check(data: &Dataset, penalty: &PenaltySpec, beta: &[f64]) -> f64 {
    let r = residual(data, beta);
    let n = data.n() as f64;
    (0..data.p())
        .map(|j| {
            let g = dot(column(data.x(), j), &r) / n;
            let lam = penalty.lambda * penalty.weights[j];
            let b = beta[j];
            if b != 0.0 {
                (g - penalty.unit_penalty_slope(b.abs(), lam) * b.signum()).abs()
            } else {
                (g.abs() - lam).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
