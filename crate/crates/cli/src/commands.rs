use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stablasso_core::data::{load_csv, Dataset, RawData, ResponseColumn, SeedSpec};
use stablasso_core::ranking::{air_holp, default_threshold, ranks_to_weights, ridge_holp};
use stablasso_core::scenarios::{
    default_min_ratio, f1_curve, generate, make_weights, run_experiment, ExperimentConfig,
    ReplicateSeeds, ScenarioSpec, TunePolicy, WeightScheme,
};
use stablasso_core::solver::{fit_path, lambda_path, CdOptions, PenaltyFamily, PenaltySpec};
use stablasso_core::stability::{
    make_plan, run_stability_selection, select_from_frequencies, tune_lambda_1sd_with,
    tune_lambda_with, SdRule, StabilityOptions, StabilityProfile, TunedLambda,
};

use crate::artifacts::{artifact_config, fmt_indices, with_config, Outputs};
use crate::error::CliError;
use crate::{
    BenchmarkArgs, DataArgs, EvaluateArgs, FitArgs, GridArgs, RankArgs, RunArgs, SimulateArgs,
    StabselArgs, TuneArgs, TuneRule, WeightArgs,
};

/// Sidecar written next to simulated data.
#[derive(Debug, Serialize, Deserialize)]
struct SimulationMeta {
    scenario: ScenarioSpec,
    replicate: usize,
    true_support: Vec<usize>,
    beta: Vec<f64>,
}

/// `profile.json` as written by `stabsel`.
#[derive(Debug, Deserialize)]
struct ProfileFile {
    predictors: Vec<String>,
    profile: StabilityProfile,
}

fn parse<T: std::str::FromStr>(what: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::config(format!("invalid {what} {value:?}: {e}")))
}

fn parse_list(what: &str, list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|v| parse::<f64>(what, v.trim()))
        .collect()
}

fn setup(run: &RunArgs) -> Result<Outputs, CliError> {
    if let Some(threads) = run.threads {
        if threads == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        // Ignoring the error keeps a second call in the same process harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Outputs::create(&run.out)
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, CliError> {
    require_file(path, what)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{what} {} is malformed: {e}", path.display())))
}

fn load_data(args: &DataArgs) -> Result<(RawData, Dataset), CliError> {
    require_file(&args.data, "data file")?;
    let response: ResponseColumn = args.response.parse().expect("infallible");
    let raw =
        load_csv(&args.data, &response, args.header).map_err(|e| CliError::op("load_csv", e))?;
    let data = raw
        .standardize()
        .map_err(|e| CliError::op("standardize", e))?;
    Ok((raw, data))
}

fn weights_for(
    args: &WeightArgs,
    data: &Dataset,
    seeds: &ReplicateSeeds,
) -> Result<(WeightScheme, Vec<f64>), CliError> {
    let scheme: WeightScheme = parse("weight scheme", &args.weights)?;
    let beta = match &args.meta {
        Some(path) => Some(read_json::<SimulationMeta>(path, "meta file")?.beta),
        None => None,
    };
    if scheme == WeightScheme::AdaptiveOracle && beta.is_none() {
        return Err(CliError::config("adaptive_oracle weights need --meta"));
    }
    let weights = make_weights(&scheme, data, beta.as_deref(), seeds.weights(&scheme))
        .map_err(|e| CliError::op("make_weights", e))?;
    Ok((scheme, weights))
}

fn grid_for(
    args: &GridArgs,
    data: &Dataset,
    weights: &[f64],
) -> Result<(PenaltyFamily, Vec<f64>), CliError> {
    let family: PenaltyFamily = parse("penalty family", &args.family)?;
    let min_ratio = args
        .min_ratio
        .unwrap_or_else(|| default_min_ratio(data.n(), data.p()));
    let grid = lambda_path(data, weights, args.num_lambdas, min_ratio)
        .map_err(|e| CliError::op("lambda_path", e))?;
    Ok((family, grid.values))
}

fn tune_profile(profile: &StabilityProfile, rule: &TuneRule) -> Result<TunedLambda, CliError> {
    let sd_rule: SdRule = parse("sd rule", &rule.sd_rule)?;
    match rule.mode.replace('_', "-").as_str() {
        "auto" => tune_lambda_with(profile, sd_rule),
        "stable-1sd" => tune_lambda_1sd_with(profile, sd_rule),
        other => {
            return Err(CliError::config(format!(
                "invalid mode {other:?} (expected auto or stable-1sd)"
            )))
        }
    }
    .map_err(|e| CliError::op("tune_lambda", e))
}

fn row(fields: impl IntoIterator<Item = impl ToString>) -> Vec<String> {
    fields.into_iter().map(|f| f.to_string()).collect()
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut out = setup(&args.run)?;
    let master = SeedSpec::new(args.seed, 0);
    let mut scenario = ScenarioSpec::preset(&args.preset, master).map_err(|_| {
        CliError::config(format!(
            "invalid preset {:?} (expected main, lowdim or lowcorr)",
            args.preset
        ))
    })?;
    if let Some(n) = args.n {
        scenario.n = n;
    }
    let seeds = ReplicateSeeds::new(master, args.replicate);
    let scenario = scenario.with_seed(seeds.data);
    let sim = generate(&scenario).map_err(|e| CliError::op("generate", e))?;

    let p = scenario.p;
    let mut header = vec!["y".to_string()];
    header.extend((0..p).map(|j| format!("x{j}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..scenario.n).map(|i| {
        let mut r = vec![sim.raw_y[i].to_string()];
        r.extend((0..p).map(|j| sim.raw_x[(i, j)].to_string()));
        r
    });
    out.csv(&format!("{}.csv", args.preset), &header_refs, rows)?;
    let meta = SimulationMeta {
        beta: scenario.beta_dense(),
        true_support: sim.true_support,
        replicate: args.replicate,
        scenario,
    };
    // The sidecar is the metadata itself plus the resolved config, so `--meta` can read it.
    let mut sidecar = serde_json::to_value(&meta).map_err(|e| CliError::io("write_json", e))?;
    if let Value::Object(fields) = &mut sidecar {
        fields.insert("config".into(), artifact_config(args));
    }
    out.json(&format!("{}.meta.json", args.preset), &sidecar)?;
    out.finish("simulate", args, Some(args.seed))
}

pub fn rank(args: &RankArgs) -> Result<(), CliError> {
    let mut out = setup(&args.run)?;
    let (raw, data) = load_data(&args.data)?;
    let ranking = match args.ridge {
        Some(r) => ridge_holp(&data, r).map_err(|e| CliError::op("ridge_holp", e))?,
        None => {
            let d = args
                .threshold
                .unwrap_or_else(|| default_threshold(data.n()).min(data.p()));
            air_holp(&data, d, args.max_iter).map_err(|e| CliError::op("air_holp", e))?
        }
    };
    let weights = ranks_to_weights(&ranking).into_inner();
    let rows = ranking.order().into_iter().map(|j| {
        row([
            j.to_string(),
            raw.predictor_names[j].clone(),
            ranking.ranks[j].to_string(),
            ranking.scores[j].to_string(),
            weights[j].to_string(),
        ])
    });
    out.csv(
        "ranking.csv",
        &["variable", "name", "rank", "score", "weight"],
        rows,
    )?;
    out.json(
        "ranking.json",
        &json!({ "config": artifact_config(args), "predictors": raw.predictor_names, "ranking": ranking, "weights": weights }),
    )?;
    out.finish("rank", args, None)
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let mut out = setup(&args.run)?;
    let (raw, data) = load_data(&args.data)?;
    let seeds = ReplicateSeeds::new(SeedSpec::new(args.seed, 0), args.replicate);
    let (_, weights) = weights_for(&args.weights, &data, &seeds)?;
    let (family, lambdas) = match args.lambda {
        Some(l) => (parse("penalty family", &args.grid.family)?, vec![l]),
        None => grid_for(&args.grid, &data, &weights)?,
    };
    let template = PenaltySpec::new(family, 0.0, weights.clone());
    let fits = fit_path(&data, &template, &lambdas, &CdOptions::default())
        .map_err(|e| CliError::op("cd_fit", e))?;

    out.csv(
        "path.csv",
        &[
            "lambda_index",
            "lambda",
            "nonzero",
            "converged",
            "iterations",
            "objective",
        ],
        fits.iter().enumerate().map(|(l, f)| {
            row([
                l.to_string(),
                f.lambda.to_string(),
                f.support().len().to_string(),
                f.converged.to_string(),
                f.iterations.to_string(),
                f.objective.to_string(),
            ])
        }),
    )?;
    let coefficient_rows = fits.iter().enumerate().flat_map(|(l, f)| {
        let names = &raw.predictor_names;
        f.support().into_iter().map(move |j| {
            row([
                l.to_string(),
                f.lambda.to_string(),
                j.to_string(),
                names[j].clone(),
                f.beta[j].to_string(),
            ])
        })
    });
    out.csv(
        "coefficients.csv",
        &["lambda_index", "lambda", "variable", "name", "coefficient"],
        coefficient_rows,
    )?;
    out.json(
        "fit.json",
        &json!({ "config": artifact_config(args), "predictors": raw.predictor_names, "weights": weights, "fits": fits }),
    )?;
    if fits.iter().any(|f| !f.converged) {
        eprintln!("warning: some fits stopped at the sweep limit; see `converged` in path.csv");
    }
    out.finish("fit", args, Some(args.seed))
}

pub fn stabsel(args: &StabselArgs) -> Result<(), CliError> {
    let mut out = setup(&args.run)?;
    let (raw, data) = load_data(&args.data)?;
    let seeds = ReplicateSeeds::new(SeedSpec::new(args.seed, 0), args.replicate);
    let (_, weights) = weights_for(&args.weights, &data, &seeds)?;
    let (family, lambdas) = grid_for(&args.grid, &data, &weights)?;
    let plan = make_plan(data.n(), args.b, seeds.plan).map_err(|e| CliError::op("make_plan", e))?;
    if args.n_boot < 2 {
        return Err(CliError::config("--n-boot must be at least 2"));
    }
    let opts = StabilityOptions {
        n_boot: args.n_boot,
        bootstrap_seed: seeds.bootstrap,
        cd: CdOptions::default(),
    };
    let profile = run_stability_selection(&data, &plan, family, &weights, &lambdas, &opts)
        .map_err(|e| CliError::op("run_stability_selection", e))?;

    out.csv(
        "stability.csv",
        &["lambda_index", "lambda", "phi", "phi_sd", "mean_selected"],
        (0..profile.len()).map(|l| {
            row([
                l.to_string(),
                profile.lambdas[l].to_string(),
                profile.phi[l].to_string(),
                profile.phi_sd[l].to_string(),
                profile.frequencies[l].iter().sum::<f64>().to_string(),
            ])
        }),
    )?;
    out.json(
        "profile.json",
        &json!({ "config": artifact_config(args), "predictors": raw.predictor_names, "weights": weights, "profile": profile }),
    )?;
    out.finish("stabsel", args, Some(args.seed))
}

pub fn tune(args: &TuneArgs) -> Result<(), CliError> {
    let mut out = setup(&args.run)?;
    if !(args.pi_thr > 0.0 && args.pi_thr <= 1.0) {
        return Err(CliError::config("--pi-thr must lie in (0, 1]"));
    }
    let file: ProfileFile = read_json(&args.profile, "profile")?;
    let tuned = tune_profile(&file.profile, &args.rule)?;
    let freq = &file.profile.frequencies[tuned.index];
    let selected = select_from_frequencies(freq, args.pi_thr);
    out.csv(
        "selection.csv",
        &["variable", "name", "frequency", "selected"],
        freq.iter().enumerate().map(|(j, f)| {
            row([
                j.to_string(),
                file.predictors[j].clone(),
                f.to_string(),
                selected.contains(&j).to_string(),
            ])
        }),
    )?;
    let names: Vec<&str> = selected
        .iter()
        .map(|&j| file.predictors[j].as_str())
        .collect();
    out.json(
        "tuned.json",
        &json!({
            "config": artifact_config(args),
            "tuned": tuned,
            "stability": file.profile.phi[tuned.index],
            "max_stability": file.profile.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "selected": selected,
            "selected_names": names,
        }),
    )?;
    out.finish("tune", args, None)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let mut out = setup(&args.run)?;
    let thresholds = parse_list("threshold", &args.thresholds)?;
    let file: ProfileFile = read_json(&args.profile, "profile")?;
    let meta: SimulationMeta = read_json(&args.meta, "meta file")?;
    let index = match args.lambda {
        Some(l) => file
            .profile
            .index_of(l)
            .map_err(|e| CliError::op("select", e))?,
        None => tune_profile(&file.profile, &args.rule)?.index,
    };
    let freq = &file.profile.frequencies[index];
    if freq.len() != meta.beta.len() {
        return Err(CliError::config(format!(
            "profile has {} variables but the meta file describes {}",
            freq.len(),
            meta.beta.len()
        )));
    }
    let curve = f1_curve(freq, &meta.true_support, &thresholds);
    out.csv(
        "f1.csv",
        &["threshold", "selected", "precision", "recall", "f1"],
        curve.iter().map(|s| {
            row([
                s.threshold.to_string(),
                s.selected.to_string(),
                s.precision.to_string(),
                s.recall.to_string(),
                s.f1.to_string(),
            ])
        }),
    )?;
    out.json(
        "evaluation.json",
        &json!({
            "config": artifact_config(args),
            "lambda": file.profile.lambdas[index],
            "lambda_index": index,
            "stability": file.profile.phi[index],
            "true_support": meta.true_support,
            "f1": curve,
        }),
    )?;
    out.finish("evaluate", args, None)
}

pub fn benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let mut out = setup(&args.run)?;
    let master = SeedSpec::new(args.seed, 0);
    let scenario = ScenarioSpec::preset(&args.preset, master).map_err(|_| {
        CliError::config(format!(
            "invalid preset {:?} (expected main, lowdim or lowcorr)",
            args.preset
        ))
    })?;
    let schemes: Vec<WeightScheme> = args
        .schemes
        .split(',')
        .map(|s| parse("weight scheme", s.trim()))
        .collect::<Result<_, _>>()?;
    let tune = match args.rule.mode.replace('_', "-").as_str() {
        "auto" => TunePolicy::Auto,
        "stable-1sd" => TunePolicy::Stable1sd,
        other => {
            return Err(CliError::config(format!(
                "invalid mode {other:?} (expected auto or stable-1sd)"
            )))
        }
    };
    if args.n_boot < 2 {
        return Err(CliError::config("--n-boot must be at least 2"));
    }
    let config = ExperimentConfig {
        b: args.b,
        n_boot: args.n_boot,
        num_lambdas: args.grid.num_lambdas,
        min_ratio: args.grid.min_ratio,
        thresholds: parse_list("threshold", &args.thresholds)?,
        tune,
        sd_rule: parse("sd rule", &args.rule.sd_rule)?,
        family: parse("penalty family", &args.grid.family)?,
        cd: CdOptions::default(),
    };
    let report = run_experiment(&scenario, &schemes, args.replicates, &config, master)
        .map_err(|e| CliError::op("run_experiment", e))?;

    let mut summary_rows = Vec::new();
    for s in &report.summaries {
        for (k, t) in s.thresholds.iter().enumerate() {
            summary_rows.push(row([
                s.scheme.clone(),
                t.to_string(),
                s.f1_median[k].to_string(),
                s.f1_q1[k].to_string(),
                s.f1_q3[k].to_string(),
                s.f1_mean[k].to_string(),
            ]));
        }
    }
    out.csv(
        "summary.csv",
        &[
            "scheme",
            "threshold",
            "f1_median",
            "f1_q1",
            "f1_q3",
            "f1_mean",
        ],
        summary_rows,
    )?;

    let mut f1_rows = Vec::new();
    let mut run_rows = Vec::new();
    for record in &report.records {
        for run in &record.runs {
            run_rows.push(row([
                run.scheme.clone(),
                record.replicate.to_string(),
                run.tuned.lambda.to_string(),
                run.tuned.index.to_string(),
                run.stability.to_string(),
                run.max_stability.to_string(),
                run.relevant_prioritized.to_string(),
            ]));
            for s in &run.f1 {
                f1_rows.push(row([
                    run.scheme.clone(),
                    record.replicate.to_string(),
                    s.threshold.to_string(),
                    s.selected.to_string(),
                    s.precision.to_string(),
                    s.recall.to_string(),
                    s.f1.to_string(),
                ]));
            }
        }
    }
    out.csv(
        "runs.csv",
        &[
            "scheme",
            "replicate",
            "lambda",
            "lambda_index",
            "stability",
            "max_stability",
            "relevant_prioritized",
        ],
        run_rows,
    )?;
    out.csv(
        "f1.csv",
        &[
            "scheme",
            "replicate",
            "threshold",
            "selected",
            "precision",
            "recall",
            "f1",
        ],
        f1_rows,
    )?;
    out.json("report.json", &with_config(args, "report", &report))?;
    println!("{}", summary_table(&report));
    out.finish("benchmark", args, Some(args.seed))
}

fn summary_table(report: &stablasso_core::scenarios::EvalReport) -> String {
    let mut lines = vec![format!(
        "{:<22} {:>9} {}",
        "scheme", "stability", "median F1 at thresholds"
    )];
    for s in &report.summaries {
        let f1: Vec<String> = s.f1_median.iter().map(|v| format!("{v:.3}")).collect();
        lines.push(format!(
            "{:<22} {:>9.3} {}",
            s.scheme,
            s.stability.median,
            f1.join(" ")
        ));
    }
    lines.push(format!(
        "true support: {}",
        fmt_indices(&report.scenario.true_support())
    ));
    lines.join("\n")
}
