//! Independent oracles for the closed-form results: a long scheduled
//! covariance recursion, the finite-horizon dynamic program, and
//! seeded Monte-Carlo runs. None of them go through the fixed-point
//! path they are checking.

use lqg_privacy::intermittent::{PeriodicAnalysis, PeriodicScheme};
use lqg_privacy::model::SystemModel;
use lqg_privacy::riccati::{
    lyapunov_step, measurement_update, FixedPointOptions, SteadyState,
};
use lqg_privacy::sim::{
    child_seed, empirical_average_cost, empirical_summary, finite_horizon_cost, simulate,
};
use nalgebra::DMatrix;

fn setup() -> (SystemModel, SteadyState) {
    let model = SystemModel::example();
    let steady = SteadyState::compute(&model, &FixedPointOptions::default()).unwrap();
    (model, steady)
}

/// Run the scheduled covariance recursion (predict every step, update
/// only at transmissions) for `steps` steps from `start` and return the
/// last full period of posterior covariances, keyed by offset.
fn scheduled_recursion_orbit(
    model: &SystemModel,
    scheme: &PeriodicScheme,
    start: &DMatrix<f64>,
    steps: u64,
) -> Vec<DMatrix<f64>> {
    let period = scheme.period() as usize;
    let mut cov = start.clone();
    let mut orbit = vec![DMatrix::zeros(0, 0); period];
    for k in 1..=steps {
        let prior = lyapunov_step(&cov, model);
        cov = if scheme.transmits_at(k) {
            measurement_update(&prior, model)
        } else {
            prior
        };
        if steps - k < period as u64 {
            let offset = ((k - 1) % scheme.period() as u64) as usize;
            orbit[offset] = cov.clone();
        }
    }
    orbit
}

#[test]
fn long_recursion_reproduces_the_covariance_cycle() {
    let (model, steady) = setup();
    for period in [1u32, 2, 3, 5, 7] {
        let scheme = PeriodicScheme::new(period).unwrap();
        let analysis =
            PeriodicAnalysis::compute(&model, &steady, period, &FixedPointOptions::default())
                .unwrap();
        let orbit = scheduled_recursion_orbit(&model, &scheme, model.q(), 100_000);
        for (offset, empirical) in orbit.iter().enumerate() {
            let gap = (empirical - &analysis.cycle[offset]).norm();
            assert!(gap < 1e-8, "period {period}, offset {offset}: gap {gap:e}");
        }
    }
}

#[test]
fn backward_program_converges_to_the_degraded_cost() {
    let (model, steady) = setup();
    for period in [1u32, 2, 3] {
        let scheme = PeriodicScheme::new(period).unwrap();
        let analysis =
            PeriodicAnalysis::compute(&model, &steady, period, &FixedPointOptions::default())
                .unwrap();
        let horizon = 2000;
        let fh = finite_horizon_cost(&model, &steady, &scheme, horizon);
        let average = fh.total / horizon as f64;
        let rel = (average - analysis.degraded_cost).abs() / analysis.degraded_cost;
        assert!(rel < 0.01, "period {period}: relative gap {rel:e}");
    }
}

#[test]
fn monte_carlo_covariances_match_the_orbit() {
    let (model, steady) = setup();
    let period = 3u32;
    let scheme = PeriodicScheme::new(period).unwrap();
    let analysis =
        PeriodicAnalysis::compute(&model, &steady, period, &FixedPointOptions::default()).unwrap();
    let summary = empirical_summary(&model, &steady, &scheme, 20_000, 10, 2024, 1000);
    assert!(summary.counts.iter().sum::<usize>() >= 150_000);
    for offset in 0..period as usize {
        let rel = (&summary.covariances[offset] - &analysis.cycle[offset]).norm()
            / analysis.cycle[offset].norm();
        assert!(rel < 0.05, "offset {offset}: relative error {rel:.3}");
    }
    // Time-averaged excess over the full-transmission covariance is the
    // privacy metric.
    let mut avg = DMatrix::zeros(2, 2);
    let total: usize = summary.counts.iter().sum();
    for (cov, &count) in summary.covariances.iter().zip(&summary.counts) {
        avg += cov * (count as f64 / total as f64);
    }
    let excess = avg - &steady.error_cov;
    let rel = (&excess - &analysis.privacy_metric).norm() / analysis.privacy_metric.norm();
    assert!(rel < 0.05, "privacy metric relative error {rel:.3}");
}

#[test]
fn monte_carlo_cost_matches_the_analytic_values() {
    let (model, steady) = setup();
    for period in [1u32, 3] {
        let scheme = PeriodicScheme::new(period).unwrap();
        let analysis =
            PeriodicAnalysis::compute(&model, &steady, period, &FixedPointOptions::default())
                .unwrap();
        let traces: Vec<_> = (0..16)
            .map(|t| simulate(&model, &steady, &scheme, 8000, child_seed(555, t)))
            .collect();
        let est = empirical_average_cost(&traces, 1000);
        let se = est.std_err.expect("sixteen trials give an error bar");
        let gap = (est.mean - analysis.degraded_cost).abs();
        assert!(
            gap <= 3.0 * se,
            "period {period}: |{} - {}| > 3 * {se}",
            est.mean,
            analysis.degraded_cost
        );
        if period == 1 {
            let gap = (est.mean - steady.baseline_cost).abs();
            assert!(gap <= 3.0 * se, "baseline check failed");
        }
    }
}

#[test]
fn innovations_at_transmissions_are_white() {
    let (model, steady) = setup();
    let period = 3u32;
    let scheme = PeriodicScheme::new(period).unwrap();
    let horizon = 60_000;
    let trace = simulate(&model, &steady, &scheme, horizon, 77);
    // Reconstruct the scalar innovation y_k - C (A est_{k-1} + B u_{k-1})
    // at each transmission instant after burn-in.
    let mut innovations = Vec::new();
    for k in 1..horizon {
        if k < 1000 || !trace.transmitted[k] {
            continue;
        }
        let predicted = model.a() * &trace.estimates[k - 1] + model.b() * &trace.inputs[k - 1];
        let innovation = &trace.measurements[k] - model.c() * predicted;
        innovations.push(innovation[0]);
    }
    let count = innovations.len() as f64;
    let mean = innovations.iter().sum::<f64>() / count;
    let var = innovations.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    let bound = 3.0 / count.sqrt();
    for lag in 1..=5usize {
        let mut acc = 0.0;
        for i in lag..innovations.len() {
            acc += (innovations[i] - mean) * (innovations[i - lag] - mean);
        }
        let rho = acc / (count * var);
        assert!(
            rho.abs() < bound,
            "lag {lag}: autocorrelation {rho:.4} exceeds {bound:.4}"
        );
    }
}

#[test]
fn transmission_offsets_order_the_covariance_traces() {
    let (model, steady) = setup();
    let scheme = PeriodicScheme::new(3).unwrap();
    let summary = empirical_summary(&model, &steady, &scheme, 20_000, 6, 31, 1000);
    let traces: Vec<f64> = summary.covariances.iter().map(|c| c.trace()).collect();
    assert!(traces[0] < traces[1] && traces[1] < traces[2]);
}
