mod common;

use common::{fista_lasso, mcp_penalty, prox_gradient_nonconvex, random_problem, scad_penalty};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stablasso_core::data::standardize;
use stablasso_core::solver::{
    cd_fit, cd_fit_with, fit_path, kkt_check, lambda_max, lambda_path, objective, CdOptions,
    PenaltyFamily, PenaltySpec, DEFAULT_MCP_GAMMA, DEFAULT_SCAD_A,
};

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

#[test]
fn uniform_weights_match_proximal_gradient() {
    for seed in 0..5 {
        let data = random_problem(50, 100, seed);
        let ones = vec![1.0; 100];
        let top = lambda_max(&data, &ones).unwrap();
        for frac in [0.5, 0.2, 0.05] {
            let fit = cd_fit(&data, &PenaltySpec::lasso(frac * top, ones.clone()), None).unwrap();
            assert!(fit.converged);
            let oracle = fista_lasso(&data, frac * top, &ones);
            let gap = max_abs_diff(&fit.beta, &oracle);
            assert!(gap < 1e-6, "seed {seed}, lambda {frac} * max: gap {gap:e}");
        }
    }
}

#[test]
fn penalty_factors_match_proximal_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..4 {
        let data = random_problem(40, 60, 100 + seed);
        let mut w: Vec<f64> = (0..60).map(|_| rng.random_range(0.05..1.0)).collect();
        w[3] = 0.0;
        w[17] = 0.0;
        let lam = 0.3 * lambda_max(&data, &w).unwrap();
        let fit = cd_fit(&data, &PenaltySpec::lasso(lam, w.clone()), None).unwrap();
        let oracle = fista_lasso(&data, lam, &w);
        assert!(max_abs_diff(&fit.beta, &oracle) < 1e-6);
        assert!(fit.beta[3] != 0.0 && fit.beta[17] != 0.0);
    }
}

#[test]
fn converged_fits_satisfy_kkt_along_the_path() {
    let data = random_problem(50, 100, 7);
    let w = vec![1.0; 100];
    let grid = lambda_path(&data, &w, 30, 0.01).unwrap();
    let template = PenaltySpec::lasso(0.0, w);
    for fit in fit_path(&data, &template, &grid.values, &CdOptions::default()).unwrap() {
        assert!(fit.converged);
        assert!(kkt_check(&data, &template.with_lambda(fit.lambda), &fit.beta) <= 1e-6);
    }
}

#[test]
fn objective_never_increases_between_sweeps() {
    let data = random_problem(30, 80, 3);
    let w = vec![1.0; 80];
    let top = lambda_max(&data, &w).unwrap();
    let opts = CdOptions {
        record_objective: true,
        ..CdOptions::default()
    };
    for family in [
        PenaltyFamily::Lasso,
        PenaltyFamily::Scad,
        PenaltyFamily::Mcp,
    ] {
        let pen = PenaltySpec::new(family, 0.1 * top, w.clone());
        let fit = cd_fit_with(&data, &pen, None, &opts).unwrap();
        assert!(fit.objective_trace.len() >= 2);
        for pair in fit.objective_trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "{family}: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert!((fit.objective - objective(&data, &pen, &fit.beta)).abs() < 1e-12);
    }
}

#[test]
fn acceleration_does_not_change_the_solution() {
    let data = random_problem(50, 200, 21);
    let w = vec![1.0; 200];
    let grid = lambda_path(&data, &w, 40, 0.01).unwrap();
    let template = PenaltySpec::lasso(0.0, w);
    let plain = CdOptions {
        accelerate: false,
        ..CdOptions::default()
    };
    let fast = fit_path(&data, &template, &grid.values, &CdOptions::default()).unwrap();
    let slow = fit_path(&data, &template, &grid.values, &plain).unwrap();
    for (a, b) in fast.iter().zip(&slow) {
        assert!(a.converged && b.converged);
        assert!(max_abs_diff(&a.beta, &b.beta) < 1e-6);
        assert_eq!(a.support(), b.support());
        assert!(a.iterations <= b.iterations);
    }
}

#[test]
fn nonconvex_solutions_are_proximal_gradient_fixed_points() {
    for seed in 0..3 {
        let data = random_problem(20, 50, 40 + seed);
        let w = vec![1.0; 50];
        let lam = 0.15 * lambda_max(&data, &w).unwrap();
        for family in [PenaltyFamily::Scad, PenaltyFamily::Mcp] {
            let fit = cd_fit(&data, &PenaltySpec::new(family, lam, w.clone()), None).unwrap();
            assert!(fit.converged);
            let pen = move |b: f64| match family {
                PenaltyFamily::Scad => scad_penalty(b, lam, DEFAULT_SCAD_A),
                _ => mcp_penalty(b, lam, DEFAULT_MCP_GAMMA),
            };
            let moved = prox_gradient_nonconvex(&data, &fit.beta, &pen, 1);
            let gap = max_abs_diff(&fit.beta, &moved);
            assert!(gap < 1e-6, "{family} seed {seed}: gap {gap:e}");
        }
    }
}

#[test]
fn loss_scaling_is_per_observation() {
    // Stacking the data twice leaves the 1/(2n)-scaled problem unchanged.
    let data = random_problem(25, 40, 5);
    let (x, y) = (data.x().clone(), data.y().clone());
    let x2 = DMatrix::from_fn(50, 40, |i, j| x[(i % 25, j)]);
    let y2 = DVector::from_fn(50, |i, _| y[i % 25]);
    let doubled = standardize(&x2, &y2).unwrap();
    let w = vec![1.0; 40];
    let lam = 0.2 * lambda_max(&data, &w).unwrap();
    let a = cd_fit(&data, &PenaltySpec::lasso(lam, w.clone()), None).unwrap();
    let b = cd_fit(&doubled, &PenaltySpec::lasso(lam, w), None).unwrap();
    assert!(max_abs_diff(&a.beta, &b.beta) < 1e-7);
    assert!((a.objective - b.objective).abs() < 1e-10);
}

#[test]
fn top_of_path_zeroes_penalized_and_fits_unpenalized() {
    let data = random_problem(40, 30, 9);
    let mut w = vec![1.0; 30];
    w[0] = 0.0;
    w[1] = 0.5;
    let grid = lambda_path(&data, &w, 10, 0.01).unwrap();
    let fit = cd_fit(&data, &PenaltySpec::lasso(grid.values[0], w.clone()), None).unwrap();
    assert!(fit.beta[1..].iter().all(|b| *b == 0.0));
    let n = data.n() as f64;
    let univariate = data.x().column(0).dot(data.y()) / n;
    assert!((fit.beta[0] - univariate).abs() < 1e-9);
    let below = cd_fit(&data, &PenaltySpec::lasso(0.9 * grid.values[0], w), None).unwrap();
    assert!(below.beta[1..].iter().any(|b| *b != 0.0));
    assert!((grid.values[9] - 0.01 * grid.values[0]).abs() < 1e-12 * grid.values[0]);
}

#[test]
fn warm_starts_reach_the_cold_start_solution() {
    let data = random_problem(50, 100, 12);
    let w = vec![1.0; 100];
    let grid = lambda_path(&data, &w, 25, 0.01).unwrap();
    let template = PenaltySpec::lasso(0.0, w.clone());
    let path = fit_path(&data, &template, &grid.values, &CdOptions::default()).unwrap();
    for l in [5, 15, 24] {
        let cold = cd_fit(&data, &template.with_lambda(grid.values[l]), None).unwrap();
        assert!(max_abs_diff(&cold.beta, &path[l].beta) < 1e-6);
    }
}
