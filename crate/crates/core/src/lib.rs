//! Rank-weighted sparse regression with stability selection.
//!
//! Predictors are ranked by a correlation-adjusted screening statistic (Air-HOLP), the ranks
//! become penalty factors `w_j = 1 - 1/r_j`, and the weighted Lasso (or SCAD / MCP) is fitted
//! by coordinate descent inside a Stability Selection loop whose penalty level is tuned for
//! selection stability.
//!
//! ```no_run
//! use stablasso_core::prelude::*;
//!
//! let sim = generate(&ScenarioSpec::main(SeedSpec::new(42, 0))).unwrap();
//! let data = standardize(&sim.raw_x, &sim.raw_y).unwrap();
//! let ranking = air_holp(&data, default_threshold(data.n()), 10).unwrap();
//! let weights = ranks_to_weights(&ranking).into_inner();
//! let grid = lambda_path(&data, &weights, 100, 0.01).unwrap();
//! let plan = make_plan(data.n(), 100, SeedSpec::new(42, 1)).unwrap();
//! let opts = StabilityOptions::new(SeedSpec::new(42, 2));
//! let profile =
//!     run_stability_selection(&data, &plan, PenaltyFamily::Lasso, &weights, &grid.values, &opts).unwrap();
//! let tuned = tune_lambda(&profile).unwrap();
//! let chosen = select(&profile, tuned.lambda, 0.6).unwrap();
//! # let _ = chosen;
//! ```

// `!(x >= lo)` is used throughout input validation so that NaN is rejected as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod ranking;
pub mod scenarios;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod prelude {
    pub use crate::data::{
        load_csv, rng_stream, standardize, Dataset, RawData, ResponseColumn, SeedSpec,
    };
    pub use crate::error::{Error, Result};
    pub use crate::ranking::{
        air_holp, default_threshold, ranks_to_weights, ridge_holp, Ranking, WeightVector,
    };
    pub use crate::scenarios::{
        condition_number_diagnostic, f1_curve, generate, make_weights, run_experiment, EvalReport,
        ExperimentConfig, ScenarioSpec, TunePolicy, WeightScheme,
    };
    pub use crate::solver::{
        cd_fit, fit_path, kkt_check, lambda_path, FitResult, LambdaPath, PenaltyFamily, PenaltySpec,
    };
    pub use crate::stability::{
        make_plan, nogueira_stability, run_stability_selection, select, stability_sd, tune_lambda,
        tune_lambda_with, SdRule, SelectionMatrix, StabilityOptions, StabilityProfile,
        SubsamplePlan, TuneMode, TunedLambda,
    };
}
