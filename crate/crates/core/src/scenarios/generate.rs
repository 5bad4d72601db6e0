use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{rng_stream, SeedSpec};
use crate::error::{Error, Result};

/// Coefficients of the five relevant variables, one per group in group order.
pub const PRESET_BETA: [f64; 5] = [3.0, 2.5, 2.0, 1.5, 1.0];
pub const MAIN_RHO: [f64; 5] = [0.8, 0.85, 0.9, 0.95, 0.99];
pub const LOWCORR_RHO: [f64; 5] = [0.4, 0.5, 0.6, 0.7, 0.8];

/// Contiguous block `[start, end)` of compound-symmetric predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub start: usize,
    pub end: usize,
    pub rho: f64,
}

impl Group {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub groups: Vec<Group>,
    /// 0-based index to coefficient.
    pub beta_true: BTreeMap<usize, f64>,
    pub noise_sd: f64,
    pub seed: SeedSpec,
}

impl ScenarioSpec {
    /// `p` predictors in 5 equal groups with correlations `rho`; the last variable of each
    /// group is relevant.
    pub fn five_groups(name: &str, n: usize, p: usize, rho: [f64; 5], seed: SeedSpec) -> Self {
        let size = p / 5;
        let groups: Vec<Group> = (0..5)
            .map(|g| Group {
                start: g * size,
                end: if g == 4 { p } else { (g + 1) * size },
                rho: rho[g],
            })
            .collect();
        let beta_true = groups
            .iter()
            .zip(PRESET_BETA)
            .map(|(g, b)| (g.end - 1, b))
            .collect();
        ScenarioSpec {
            name: name.to_string(),
            n,
            p,
            groups,
            beta_true,
            noise_sd: 1.0,
            seed,
        }
    }

    /// n = 100, p = 1000, strong within-group correlation.
    pub fn main(seed: SeedSpec) -> Self {
        Self::five_groups("main", 100, 1000, MAIN_RHO, seed)
    }

    /// Same structure with p = 80.
    pub fn lowdim(seed: SeedSpec) -> Self {
        Self::five_groups("lowdim", 100, 80, MAIN_RHO, seed)
    }

    /// n = 100, p = 1000, moderate within-group correlation.
    pub fn lowcorr(seed: SeedSpec) -> Self {
        Self::five_groups("lowcorr", 100, 1000, LOWCORR_RHO, seed)
    }

    pub fn preset(name: &str, seed: SeedSpec) -> Result<Self> {
        match name {
            "main" => Ok(Self::main(seed)),
            "lowdim" => Ok(Self::lowdim(seed)),
            "lowcorr" => Ok(Self::lowcorr(seed)),
            other => Err(Error::InvalidInput(format!(
                "unknown preset {other:?} (expected main, lowdim or lowcorr)"
            ))),
        }
    }

    pub fn with_seed(&self, seed: SeedSpec) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn true_support(&self) -> Vec<usize> {
        self.beta_true.keys().copied().collect()
    }

    /// Dense length-`p` coefficient vector.
    pub fn beta_dense(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.p];
        for (&j, &b) in &self.beta_true {
            beta[j] = b;
        }
        beta
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.groups.iter().find(|g| !(g.rho >= 0.0 && g.rho < 1.0)) {
            return Err(Error::InvalidRho(g.rho));
        }
        let mut next = 0;
        for g in &self.groups {
            if g.start != next || g.end <= g.start {
                return Err(Error::InvalidInput(format!(
                    "groups must partition 0..{} into consecutive non-empty ranges",
                    self.p
                )));
            }
            next = g.end;
        }
        if next != self.p {
            return Err(Error::InvalidInput(format!(
                "groups cover 0..{next}, expected 0..{}",
                self.p
            )));
        }
        if let Some((&j, _)) = self.beta_true.iter().find(|(&j, _)| j >= self.p) {
            return Err(Error::InvalidInput(format!(
                "coefficient index {j} out of range"
            )));
        }
        if self.n < 2 || !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidInput(
                "need n >= 2 and a non-negative noise sd".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub raw_x: DMatrix<f64>,
    pub raw_y: DVector<f64>,
    pub true_support: Vec<usize>,
}

/// Draws `n` rows from `N(0, Sigma)` with block compound-symmetric `Sigma` and the linear
/// response `y = X beta + eps`.
///
/// Within a group each variable is `sqrt(rho) * shared + sqrt(1 - rho) * own` with
/// independent standard normals, which has unit variance and pairwise correlation `rho`.
pub fn generate(spec: &ScenarioSpec) -> Result<SimulatedData> {
    spec.validate()?;
    let mut rng = rng_stream(spec.seed);
    let mut x = DMatrix::zeros(spec.n, spec.p);
    for i in 0..spec.n {
        for g in &spec.groups {
            let (a, b) = (g.rho.sqrt(), (1.0 - g.rho).sqrt());
            let shared: f64 = StandardNormal.sample(&mut rng);
            for j in g.start..g.end {
                let own: f64 = StandardNormal.sample(&mut rng);
                x[(i, j)] = a * shared + b * own;
            }
        }
    }
    let mut y = DVector::zeros(spec.n);
    for i in 0..spec.n {
        let noise: f64 = StandardNormal.sample(&mut rng);
        y[i] = spec
            .beta_true
            .iter()
            .map(|(&j, &b)| b * x[(i, j)])
            .sum::<f64>()
            + spec.noise_sd * noise;
    }
    Ok(SimulatedData {
        raw_x: x,
        raw_y: y,
        true_support: spec.true_support(),
    })
}

/// Condition number of the block compound-symmetric covariance, from its closed-form
/// eigenvalues: `1 + (m - 1) rho` once and `1 - rho` with multiplicity `m - 1` per block.
pub fn condition_number_diagnostic(spec: &ScenarioSpec) -> Result<f64> {
    spec.validate()?;
    let mut largest = f64::NEG_INFINITY;
    let mut smallest = f64::INFINITY;
    for g in &spec.groups {
        let m = g.len() as f64;
        let top = 1.0 + (m - 1.0) * g.rho;
        largest = largest.max(top);
        smallest = smallest.min(top);
        if g.len() > 1 {
            let rest = 1.0 - g.rho;
            largest = largest.max(rest);
            smallest = smallest.min(rest);
        }
    }
    Ok(largest / smallest)
}
