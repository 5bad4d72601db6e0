//! Stability Selection over half-size subsamples, the Nogueira stability estimate and
//! stability-aware choice of the penalty level.

use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{rng_stream, Dataset, SeedSpec};
use crate::error::{Error, Result};
use crate::solver::{CdOptions, PathFitter, PenaltyFamily, PenaltySpec};

/// Stability level that defines `lambda_stable`.
pub const STABLE_THRESHOLD: f64 = 0.75;
pub const DEFAULT_B: usize = 100;
pub const DEFAULT_N_BOOT: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsamplePlan {
    pub b: usize,
    /// One sorted list of `floor(n/2)` distinct row indices per subsample.
    pub indices: Vec<Vec<usize>>,
    pub seed: SeedSpec,
}

pub fn make_plan(n: usize, b: usize, seed: SeedSpec) -> Result<SubsamplePlan> {
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "subsampling needs n >= 4, got {n}"
        )));
    }
    if b < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 subsamples, got {b}"
        )));
    }
    let mut rng = rng_stream(seed);
    let size = n / 2;
    let indices = (0..b)
        .map(|_| {
            let mut rows = sample(&mut rng, n, size).into_vec();
            rows.sort_unstable();
            rows
        })
        .collect();
    Ok(SubsamplePlan { b, indices, seed })
}

/// `B x p` binary selection outcomes, stored row-wise as sorted selected indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    p: usize,
    rows: Vec<Vec<usize>>,
    pub lambda: f64,
}

impl SelectionMatrix {
    pub fn from_supports(p: usize, mut rows: Vec<Vec<usize>>, lambda: f64) -> Result<Self> {
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            if row.last().is_some_and(|&j| j >= p) {
                return Err(Error::InvalidInput(format!(
                    "selected index out of range for p = {p}"
                )));
            }
        }
        Ok(Self { p, rows, lambda })
    }

    pub fn from_dense(dense: &[Vec<u8>], lambda: f64) -> Result<Self> {
        let p = dense.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(dense.len());
        for row in dense {
            if row.len() != p {
                return Err(Error::DimensionMismatch(
                    "selection rows differ in length".into(),
                ));
            }
            if row.iter().any(|v| *v > 1) {
                return Err(Error::InvalidInput(
                    "selection entries must be 0 or 1".into(),
                ));
            }
            rows.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v == 1)
                    .map(|(j, _)| j)
                    .collect(),
            );
        }
        Ok(Self { p, rows, lambda })
    }

    pub fn b(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, b: usize) -> &[usize] {
        &self.rows[b]
    }

    pub fn get(&self, b: usize, j: usize) -> bool {
        self.rows[b].binary_search(&j).is_ok()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0u8; self.p];
                row.iter().for_each(|&j| dense[j] = 1);
                dense
            })
            .collect()
    }

    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.p];
        self.rows.iter().flatten().for_each(|&j| counts[j] += 1);
        counts
    }

    /// Column means of the matrix.
    pub fn frequencies(&self) -> Vec<f64> {
        let b = self.b() as f64;
        self.column_counts()
            .into_iter()
            .map(|c| c as f64 / b)
            .collect()
    }
}

/// Stability estimate from column selection counts of a `b x p` matrix.
///
/// With `c_f` the count of column `f` and `K = sum c_f`,
/// `phi = 1 - [sum c_f (b - c_f)] b p / [(b - 1) K (b p - K)]`, which is
/// `1 - mean(s_f^2) / ((k/p)(1 - k/p))` written over integers so that a single final
/// division is the only rounding step.
fn stability_from_counts(counts: impl Iterator<Item = usize>, b: usize, p: usize) -> f64 {
    let (b_i, p_i) = (b as i128, p as i128);
    let mut total = 0i128;
    let mut spread = 0i128;
    for c in counts {
        let c = c as i128;
        total += c;
        spread += c * (b_i - c);
    }
    if total == 0 || total == b_i * p_i {
        return 0.0;
    }
    let num = spread * b_i * p_i;
    let den = (b_i - 1) * total * (b_i * p_i - total);
    (den - num) as f64 / den as f64
}

/// Nogueira et al. stability of a selection matrix; 0 when nothing or everything is selected.
pub fn nogueira_stability(m: &SelectionMatrix) -> f64 {
    assert!(m.b() >= 2, "stability needs at least two subsamples");
    stability_from_counts(m.column_counts().into_iter(), m.b(), m.p())
}

/// Row-bootstrap standard deviation of [`nogueira_stability`].
pub fn stability_sd(m: &SelectionMatrix, n_boot: usize, seed: SeedSpec) -> f64 {
    assert!(n_boot >= 2, "bootstrap needs at least two resamples");
    let b = m.b();
    let mut rng = rng_stream(seed);
    let mut counts = vec![0usize; m.p()];
    let mut touched: Vec<usize> = Vec::new();
    let mut values = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        for _ in 0..b {
            let row = m.row(rng.random_range(0..b));
            for &j in row {
                if counts[j] == 0 {
                    touched.push(j);
                }
                counts[j] += 1;
            }
        }
        values.push(stability_from_counts(
            touched.iter().map(|&j| counts[j]),
            b,
            m.p(),
        ));
        for &j in &touched {
            counts[j] = 0;
        }
        touched.clear();
    }
    sample_sd(&values)
}

pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (k - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    pub n_boot: usize,
    /// Root of the bootstrap streams; λ index `l` uses `bootstrap_seed.child(l)`.
    pub bootstrap_seed: SeedSpec,
    pub cd: CdOptions,
}

impl StabilityOptions {
    pub fn new(bootstrap_seed: SeedSpec) -> Self {
        Self {
            n_boot: DEFAULT_N_BOOT,
            bootstrap_seed,
            cd: CdOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityProfile {
    pub lambdas: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_sd: Vec<f64>,
    pub frequencies: Vec<Vec<f64>>,
    /// Coordinate-descent sweeps spent building the profile.
    #[serde(default)]
    pub cd_sweeps: usize,
    #[serde(skip)]
    pub matrices: Vec<SelectionMatrix>,
}

impl StabilityProfile {
    /// Assembles a profile from per-λ selection matrices.
    pub fn from_matrices(
        matrices: Vec<SelectionMatrix>,
        n_boot: usize,
        bootstrap_seed: SeedSpec,
    ) -> Self {
        let stats: Vec<(f64, f64, Vec<f64>)> = matrices
            .par_iter()
            .enumerate()
            .map(|(l, m)| {
                (
                    nogueira_stability(m),
                    stability_sd(m, n_boot, bootstrap_seed.child(l as u64)),
                    m.frequencies(),
                )
            })
            .collect();
        let mut profile = StabilityProfile {
            lambdas: matrices.iter().map(|m| m.lambda).collect(),
            phi: Vec::with_capacity(stats.len()),
            phi_sd: Vec::with_capacity(stats.len()),
            frequencies: Vec::with_capacity(stats.len()),
            cd_sweeps: 0,
            matrices,
        };
        for (phi, sd, freq) in stats {
            profile.phi.push(phi);
            profile.phi_sd.push(sd);
            profile.frequencies.push(freq);
        }
        profile
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Position of `lambda` in the grid (relative tolerance 1e-12).
    pub fn index_of(&self, lambda: f64) -> Result<usize> {
        self.lambdas
            .iter()
            .position(|&l| (l - lambda).abs() <= 1e-12 * l.abs().max(lambda.abs()))
            .ok_or(Error::LambdaNotInProfile(lambda))
    }
}

/// Fits every subsample at every λ and collects the supports.
///
/// Each subsample is re-centered and re-scaled on its own rows; `weights` are used as given
/// for every subsample. Fits run in parallel over subsamples and are reduced in
/// (λ index, subsample index) order.
pub fn run_stability_selection(
    data: &Dataset,
    plan: &SubsamplePlan,
    family: PenaltyFamily,
    weights: &[f64],
    lambdas: &[f64],
    opts: &StabilityOptions,
) -> Result<StabilityProfile> {
    let template = PenaltySpec::new(family, 0.0, weights.to_vec());
    run_stability_selection_with(data, plan, &template, lambdas, opts)
}

/// As [`run_stability_selection`], with SCAD / MCP shape parameters taken from `template`.
pub fn run_stability_selection_with(
    data: &Dataset,
    plan: &SubsamplePlan,
    template: &PenaltySpec,
    lambdas: &[f64],
    opts: &StabilityOptions,
) -> Result<StabilityProfile> {
    if lambdas.is_empty() {
        return Err(Error::EmptyProfile);
    }
    template.validate(data.p())?;
    if plan.indices.iter().flatten().any(|&i| i >= data.n()) {
        return Err(Error::InvalidInput(
            "subsample plan does not match the dataset size".into(),
        ));
    }

    let per_subsample: Vec<(Vec<Vec<usize>>, usize)> = plan
        .indices
        .par_iter()
        .enumerate()
        .map(|(s, rows)| {
            let sub = data.subsample(rows);
            let mut fitter =
                PathFitter::new(&sub, template, &opts.cd).map_err(|e| Error::InSubsample {
                    lambda_index: 0,
                    subsample: s,
                    source: Box::new(e),
                })?;
            let mut sweeps = 0;
            let supports = lambdas
                .iter()
                .enumerate()
                .map(|(l, &lambda)| {
                    let fit = fitter.fit(lambda).map_err(|e| Error::InSubsample {
                        lambda_index: l,
                        subsample: s,
                        source: Box::new(e),
                    })?;
                    sweeps += fit.iterations;
                    Ok(fit.support())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((supports, sweeps))
        })
        .collect::<Result<_>>()?;

    let matrices = lambdas
        .iter()
        .enumerate()
        .map(|(l, &lambda)| {
            let rows = per_subsample
                .iter()
                .map(|(sup, _)| sup[l].clone())
                .collect();
            SelectionMatrix::from_supports(data.p(), rows, lambda)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut profile = StabilityProfile::from_matrices(matrices, opts.n_boot, opts.bootstrap_seed);
    profile.cd_sweeps = per_subsample.iter().map(|(_, sweeps)| sweeps).sum();
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    Stable,
    Stable1sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunedLambda {
    pub mode: TuneMode,
    pub lambda: f64,
    pub index: usize,
}

/// Source of the "one standard deviation" in `lambda_stable-1sd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdRule {
    /// Bootstrap sd of the stability estimate at the maximizing λ (`phi_sd[argmax]`).
    #[default]
    AtMaximum,
    /// Sample sd of the stability estimates across the whole λ grid.
    AcrossGrid,
}

impl FromStr for SdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "at_maximum" | "at_max" => Ok(SdRule::AtMaximum),
            "across_grid" | "grid" => Ok(SdRule::AcrossGrid),
            other => Err(Error::InvalidInput(format!("unknown sd rule {other:?}"))),
        }
    }
}

impl std::fmt::Display for SdRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SdRule::AtMaximum => "at_maximum",
            SdRule::AcrossGrid => "across_grid",
        })
    }
}

/// `lambda_stable` when some λ reaches [`STABLE_THRESHOLD`], otherwise `lambda_stable-1sd`
/// with the sd taken at the maximizer.
pub fn tune_lambda(profile: &StabilityProfile) -> Result<TunedLambda> {
    tune_lambda_with(profile, SdRule::AtMaximum)
}

/// As [`tune_lambda`], with the fallback's sd chosen by `rule`.
pub fn tune_lambda_with(profile: &StabilityProfile, rule: SdRule) -> Result<TunedLambda> {
    check_profile(profile)?;
    match smallest_lambda_where(profile, |phi| phi >= STABLE_THRESHOLD) {
        Some(index) => Ok(TunedLambda {
            mode: TuneMode::Stable,
            lambda: profile.lambdas[index],
            index,
        }),
        None => tune_lambda_1sd_with(profile, rule),
    }
}

/// Smallest λ whose stability is within one sd (taken at the maximizer) of the maximum.
pub fn tune_lambda_1sd(profile: &StabilityProfile) -> Result<TunedLambda> {
    tune_lambda_1sd_with(profile, SdRule::AtMaximum)
}

/// Smallest λ whose stability is within one sd, chosen by `rule`, of the maximum.
pub fn tune_lambda_1sd_with(profile: &StabilityProfile, rule: SdRule) -> Result<TunedLambda> {
    check_profile(profile)?;
    let best = (0..profile.len()).fold(0, |best, l| {
        if profile.phi[l] > profile.phi[best] {
            l
        } else {
            best
        }
    });
    let sd = match rule {
        SdRule::AtMaximum => profile.phi_sd[best],
        SdRule::AcrossGrid if profile.len() > 1 => sample_sd(&profile.phi),
        SdRule::AcrossGrid => 0.0,
    };
    let cutoff = profile.phi[best] - sd;
    let index = smallest_lambda_where(profile, |phi| phi >= cutoff).unwrap_or(best);
    Ok(TunedLambda {
        mode: TuneMode::Stable1sd,
        lambda: profile.lambdas[index],
        index,
    })
}

fn check_profile(profile: &StabilityProfile) -> Result<()> {
    if profile.is_empty()
        || profile.phi.len() != profile.len()
        || profile.phi_sd.len() != profile.len()
    {
        return Err(Error::EmptyProfile);
    }
    Ok(())
}

fn smallest_lambda_where(profile: &StabilityProfile, pred: impl Fn(f64) -> bool) -> Option<usize> {
    (0..profile.len())
        .filter(|&l| pred(profile.phi[l]))
        .min_by(|&a, &b| profile.lambdas[a].total_cmp(&profile.lambdas[b]))
}

/// Variables whose selection frequency at `lambda` is at least `pi_thr`.
pub fn select(profile: &StabilityProfile, lambda: f64, pi_thr: f64) -> Result<Vec<usize>> {
    let l = profile.index_of(lambda)?;
    Ok(select_from_frequencies(&profile.frequencies[l], pi_thr))
}

pub fn select_from_frequencies(frequencies: &[f64], pi_thr: f64) -> Vec<usize> {
    frequencies
        .iter()
        .enumerate()
        .filter(|(_, f)| **f >= pi_thr)
        .map(|(j, _)| j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[u8]]) -> SelectionMatrix {
        let dense: Vec<Vec<u8>> = rows.iter().map(|r| r.to_vec()).collect();
        SelectionMatrix::from_dense(&dense, 0.1).unwrap()
    }

    fn profile(lambdas: &[f64], phi: &[f64], sd: &[f64]) -> StabilityProfile {
        StabilityProfile {
            lambdas: lambdas.to_vec(),
            phi: phi.to_vec(),
            phi_sd: sd.to_vec(),
            frequencies: vec![vec![]; lambdas.len()],
            cd_sweeps: 0,
            matrices: vec![],
        }
    }

    #[test]
    fn hand_computed_stabilities() {
        assert_eq!(
            nogueira_stability(&m(&[&[1, 0, 1], &[1, 0, 1], &[1, 0, 1]])),
            1.0
        );
        assert_eq!(nogueira_stability(&m(&[&[1, 1, 0], &[1, 0, 0]])), 1.0 / 3.0);
        assert_eq!(nogueira_stability(&m(&[&[1, 0], &[0, 1]])), -1.0);
    }

    #[test]
    fn degenerate_selections_are_zero() {
        assert_eq!(nogueira_stability(&m(&[&[0, 0], &[0, 0]])), 0.0);
        assert_eq!(nogueira_stability(&m(&[&[1, 1], &[1, 1]])), 0.0);
    }

    #[test]
    fn plan_shapes() {
        let plan = make_plan(100, 100, SeedSpec::new(3, 0)).unwrap();
        assert_eq!(plan.indices.len(), 100);
        for rows in &plan.indices {
            assert_eq!(rows.len(), 50);
            assert!(rows.windows(2).all(|w| w[0] < w[1]));
            assert!(rows.iter().all(|&i| i < 100));
        }
        assert_eq!(plan, make_plan(100, 100, SeedSpec::new(3, 0)).unwrap());
        assert_ne!(plan, make_plan(100, 100, SeedSpec::new(3, 1)).unwrap());
        let small = make_plan(5, 3, SeedSpec::new(1, 1)).unwrap();
        assert!(small.indices.iter().all(|r| r.len() == 2));
        assert!(make_plan(3, 10, SeedSpec::new(1, 1)).is_err());
        assert!(make_plan(10, 1, SeedSpec::new(1, 1)).is_err());
    }

    #[test]
    fn bootstrap_sd() {
        let same = m(&[&[1, 0, 1], &[1, 0, 1], &[1, 0, 1]]);
        assert_eq!(stability_sd(&same, 50, SeedSpec::new(1, 0)), 0.0);
        let anti = m(&[&[1, 0], &[0, 1]]);
        let a = stability_sd(&anti, 1000, SeedSpec::new(1, 0));
        assert!(a > 0.0);
        assert_eq!(a, stability_sd(&anti, 1000, SeedSpec::new(1, 0)));
    }

    #[test]
    fn tuning_rules() {
        let p = profile(&[0.3, 0.2, 0.1], &[0.9, 0.8, 0.6], &[0.0; 3]);
        let t = tune_lambda(&p).unwrap();
        assert_eq!((t.mode, t.lambda), (TuneMode::Stable, 0.2));

        let p = profile(&[0.3, 0.2, 0.1], &[0.70, 0.66, 0.64], &[0.05, 0.01, 0.01]);
        let t = tune_lambda(&p).unwrap();
        assert_eq!((t.mode, t.lambda), (TuneMode::Stable1sd, 0.2));

        assert!(matches!(
            tune_lambda(&profile(&[], &[], &[])),
            Err(Error::EmptyProfile)
        ));
    }

    #[test]
    fn sd_across_grid() {
        // sd(0.70, 0.66, 0.64) = 0.0306, so the cutoff is 0.669 and only λ = 0.3 qualifies.
        let p = profile(&[0.3, 0.2, 0.1], &[0.70, 0.66, 0.64], &[0.05, 0.01, 0.01]);
        let t = tune_lambda_with(&p, SdRule::AcrossGrid).unwrap();
        assert_eq!((t.mode, t.lambda), (TuneMode::Stable1sd, 0.3));
        let p = profile(&[0.3, 0.2, 0.1], &[0.9, 0.6, 0.2], &[0.0; 3]);
        assert_eq!(
            tune_lambda_1sd_with(&p, SdRule::AcrossGrid).unwrap().lambda,
            0.2
        );
        assert_eq!(tune_lambda_1sd(&p).unwrap().lambda, 0.3);
        let single = profile(&[0.3], &[0.4], &[0.1]);
        assert_eq!(
            tune_lambda_1sd_with(&single, SdRule::AcrossGrid)
                .unwrap()
                .index,
            0
        );
        for name in ["at_maximum", "across-grid"] {
            let rule: SdRule = name.parse().unwrap();
            assert_eq!(rule.to_string().replace('_', "-"), name.replace('_', "-"));
        }
    }

    #[test]
    fn selection_by_threshold() {
        let mut p = profile(&[0.5], &[0.0], &[0.0]);
        p.frequencies = vec![vec![1.0, 0.88, 0.1]];
        assert_eq!(select(&p, 0.5, 0.5).unwrap(), vec![0, 1]);
        assert_eq!(select(&p, 0.5, 1.0).unwrap(), vec![0]);
        assert!(matches!(
            select(&p, 0.4, 0.5),
            Err(Error::LambdaNotInProfile(_))
        ));
        p.frequencies = vec![vec![0.0; 3]];
        assert!(select(&p, 0.5, 0.1).unwrap().is_empty());
    }

    #[test]
    fn sparse_and_dense_agree() {
        let dense = vec![vec![1u8, 0, 1, 0], vec![0, 0, 1, 1]];
        let a = SelectionMatrix::from_dense(&dense, 1.0).unwrap();
        let b = SelectionMatrix::from_supports(4, vec![vec![2, 0], vec![3, 2, 2]], 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_dense(), dense);
        assert!(a.get(1, 3) && !a.get(0, 3));
        assert_eq!(a.frequencies(), vec![0.5, 0.0, 1.0, 0.5]);
        assert!(SelectionMatrix::from_supports(2, vec![vec![2]], 1.0).is_err());
    }
}
