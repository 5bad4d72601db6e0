use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize, Dataset, SeedSpec};
use crate::error::{Error, Result};
use crate::scenarios::generate::{generate, ScenarioSpec};
use crate::scenarios::metrics::{
    default_thresholds, f1_curve, quartiles, Quartiles, ThresholdScore,
};
use crate::scenarios::weights::{make_weights, WeightScheme};
use crate::solver::{lambda_path, CdOptions, PenaltyFamily};
use crate::stability::{
    make_plan, run_stability_selection, tune_lambda_1sd_with, tune_lambda_with, SdRule,
    StabilityOptions, StabilityProfile, SubsamplePlan, TunedLambda, DEFAULT_B, DEFAULT_N_BOOT,
};

pub const DEFAULT_NUM_LAMBDAS: usize = 100;

/// `0.01` when `p >= n`, `1e-4` otherwise.
pub fn default_min_ratio(n: usize, p: usize) -> f64 {
    if p >= n {
        0.01
    } else {
        1e-4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TunePolicy {
    /// `lambda_stable` if it exists, else `lambda_stable-1sd`.
    Auto,
    /// Always `lambda_stable-1sd`.
    Stable1sd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub b: usize,
    pub n_boot: usize,
    pub num_lambdas: usize,
    /// Defaults to [`default_min_ratio`] when unset.
    pub min_ratio: Option<f64>,
    pub thresholds: Vec<f64>,
    pub tune: TunePolicy,
    pub sd_rule: SdRule,
    pub family: PenaltyFamily,
    #[serde(skip, default)]
    pub cd: CdOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            b: DEFAULT_B,
            n_boot: DEFAULT_N_BOOT,
            num_lambdas: DEFAULT_NUM_LAMBDAS,
            min_ratio: None,
            thresholds: default_thresholds(),
            tune: TunePolicy::Stable1sd,
            sd_rule: SdRule::AcrossGrid,
            family: PenaltyFamily::Lasso,
            cd: CdOptions::default(),
        }
    }
}

/// Random streams used by one replicate, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateSeeds {
    pub data: SeedSpec,
    pub plan: SeedSpec,
    pub bootstrap: SeedSpec,
    weights_root: SeedSpec,
}

impl ReplicateSeeds {
    pub fn new(master: SeedSpec, replicate: usize) -> Self {
        let root = master.child(replicate as u64);
        Self {
            data: root.child(0),
            plan: root.child(1),
            bootstrap: root.child(2),
            weights_root: root.child(3),
        }
    }

    pub fn weights(&self, scheme: &WeightScheme) -> SeedSpec {
        self.weights_root.child(scheme.stream_tag())
    }
}

/// Outcome of one weighting scheme on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub scheme: String,
    pub tuned: TunedLambda,
    /// Stability at the tuned penalty.
    pub stability: f64,
    pub max_stability: f64,
    pub f1: Vec<ThresholdScore>,
    /// Selection frequencies of the true variables at the tuned penalty.
    pub true_frequencies: Vec<f64>,
    pub max_irrelevant_frequency: f64,
    /// Every true variable is selected more often than every irrelevant one.
    pub relevant_prioritized: bool,
    pub fits: usize,
    pub cd_sweeps: usize,
}

/// Weights, λ grid, Stability Selection, tuning and scoring for one scheme.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_scheme(
    data: &Dataset,
    true_support: &[usize],
    true_beta: Option<&[f64]>,
    scheme: &WeightScheme,
    plan: &SubsamplePlan,
    seeds: &ReplicateSeeds,
    config: &ExperimentConfig,
) -> Result<(SchemeRun, StabilityProfile)> {
    let weights = make_weights(scheme, data, true_beta, seeds.weights(scheme))?;
    let min_ratio = config
        .min_ratio
        .unwrap_or_else(|| default_min_ratio(data.n(), data.p()));
    let grid = lambda_path(data, &weights, config.num_lambdas, min_ratio)?;
    let opts = StabilityOptions {
        n_boot: config.n_boot,
        bootstrap_seed: seeds.bootstrap,
        cd: config.cd,
    };
    let profile =
        run_stability_selection(data, plan, config.family, &weights, &grid.values, &opts)?;
    let tuned = match config.tune {
        TunePolicy::Auto => tune_lambda_with(&profile, config.sd_rule)?,
        TunePolicy::Stable1sd => tune_lambda_1sd_with(&profile, config.sd_rule)?,
    };
    let freq = &profile.frequencies[tuned.index];
    let true_frequencies: Vec<f64> = true_support.iter().map(|&j| freq[j]).collect();
    let max_irrelevant_frequency = freq
        .iter()
        .enumerate()
        .filter(|(j, _)| !true_support.contains(j))
        .map(|(_, f)| *f)
        .fold(0.0, f64::max);
    let min_true = true_frequencies
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let run = SchemeRun {
        scheme: scheme.name().to_string(),
        tuned,
        stability: profile.phi[tuned.index],
        max_stability: profile
            .phi
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        f1: f1_curve(freq, true_support, &config.thresholds),
        true_frequencies,
        max_irrelevant_frequency,
        relevant_prioritized: min_true > max_irrelevant_frequency,
        fits: plan.b * grid.values.len(),
        cd_sweeps: profile.cd_sweeps,
    };
    Ok((run, profile))
}

/// Standardized dataset for replicate `replicate` of `scenario`.
pub fn replicate_data(
    scenario: &ScenarioSpec,
    seeds: &ReplicateSeeds,
) -> Result<(Dataset, Vec<usize>)> {
    let sim = generate(&scenario.with_seed(seeds.data))?;
    let data = standardize(&sim.raw_x, &sim.raw_y)?;
    Ok((data, sim.true_support))
}

/// All schemes on one simulated dataset, sharing a single subsample plan.
pub fn run_replicate(
    scenario: &ScenarioSpec,
    schemes: &[WeightScheme],
    replicate: usize,
    config: &ExperimentConfig,
    seed: SeedSpec,
) -> Result<Vec<SchemeRun>> {
    let seeds = ReplicateSeeds::new(seed, replicate);
    let tag = |scheme: &str, e: Error| Error::InReplicate {
        replicate,
        scheme: scheme.to_string(),
        source: Box::new(e),
    };
    let (data, truth) = replicate_data(scenario, &seeds).map_err(|e| tag("data", e))?;
    let plan = make_plan(data.n(), config.b, seeds.plan).map_err(|e| tag("plan", e))?;
    let true_beta = scenario.beta_dense();
    schemes
        .iter()
        .map(|scheme| {
            evaluate_scheme(
                &data,
                &truth,
                Some(&true_beta),
                scheme,
                &plan,
                &seeds,
                config,
            )
            .map(|(run, _)| run)
            .map_err(|e| tag(scheme.name(), e))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub stability: Quartiles,
    pub thresholds: Vec<f64>,
    pub f1_median: Vec<f64>,
    pub f1_mean: Vec<f64>,
    pub f1_q1: Vec<f64>,
    pub f1_q3: Vec<f64>,
    pub relevant_prioritized_fraction: f64,
    pub fits: usize,
    pub cd_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub runs: Vec<SchemeRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: ScenarioSpec,
    pub replicates: usize,
    pub seed: SeedSpec,
    pub config: ExperimentConfig,
    pub summaries: Vec<SchemeSummary>,
    pub records: Vec<ReplicateRecord>,
}

impl EvalReport {
    pub fn summary(&self, scheme: &str) -> Option<&SchemeSummary> {
        self.summaries.iter().find(|s| s.scheme == scheme)
    }
}

/// Monte-Carlo comparison of weighting schemes over independent replicates.
pub fn run_experiment(
    scenario: &ScenarioSpec,
    schemes: &[WeightScheme],
    replicates: usize,
    config: &ExperimentConfig,
    seed: SeedSpec,
) -> Result<EvalReport> {
    if replicates < 1 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    if schemes.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one weighting scheme".into(),
        ));
    }
    let records = (0..replicates)
        .into_par_iter()
        .map(|r| {
            run_replicate(scenario, schemes, r, config, seed)
                .map(|runs| ReplicateRecord { replicate: r, runs })
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = schemes
        .iter()
        .enumerate()
        .map(|(s, scheme)| summarize(scheme.name(), &records, s, &config.thresholds))
        .collect();
    Ok(EvalReport {
        scenario: scenario.clone(),
        replicates,
        seed,
        config: config.clone(),
        summaries,
        records,
    })
}

fn summarize(
    name: &str,
    records: &[ReplicateRecord],
    s: usize,
    thresholds: &[f64],
) -> SchemeSummary {
    let runs: Vec<&SchemeRun> = records.iter().map(|r| &r.runs[s]).collect();
    let stab: Vec<f64> = runs.iter().map(|r| r.stability).collect();
    let per_threshold = |k: usize| -> Vec<f64> { runs.iter().map(|r| r.f1[k].f1).collect() };
    let f1_stats: Vec<(Quartiles, f64)> = (0..thresholds.len())
        .map(|k| {
            let v = per_threshold(k);
            (quartiles(&v), v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    SchemeSummary {
        scheme: name.to_string(),
        stability: quartiles(&stab),
        thresholds: thresholds.to_vec(),
        f1_median: f1_stats.iter().map(|(q, _)| q.median).collect(),
        f1_mean: f1_stats.iter().map(|(_, m)| *m).collect(),
        f1_q1: f1_stats.iter().map(|(q, _)| q.q1).collect(),
        f1_q3: f1_stats.iter().map(|(q, _)| q.q3).collect(),
        relevant_prioritized_fraction: runs.iter().filter(|r| r.relevant_prioritized).count()
            as f64
            / runs.len() as f64,
        fits: runs.iter().map(|r| r.fits).sum(),
        cd_sweeps: runs.iter().map(|r| r.cd_sweeps).sum(),
    }
}
