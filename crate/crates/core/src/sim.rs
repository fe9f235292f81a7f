//! Seeded closed-loop simulation and the finite-horizon cost recursion.
//!
//! Both exist to cross-check the closed-form results: the Monte-Carlo
//! rollout estimates the covariance orbit and the average stage cost
//! empirically, and the backward dynamic program reproduces the
//! degraded cost from first principles without ever forming the orbit.
//!
//! Randomness is fully pinned down: a ChaCha12 generator seeded from a
//! 64-bit seed drives each rollout, trial `i` of a multi-trial run uses
//! the child seed `splitmix64(seed + (i + 1) * GOLDEN)` (see
//! [`child_seed`]), Gaussian variates come from the ziggurat sampler,
//! and correlated vectors are formed through a clamped symmetric
//! square-root factor. Identical inputs give bit-identical outputs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::intermittent::PeriodicScheme;
use crate::linalg::{symmetrize, trace_product};
use crate::model::{psd_sqrt_factor, SystemModel};
use crate::riccati::{gain_from_prior, lyapunov_step, measurement_update, SteadyState};

/// Eigenvalue clamp used when factoring covariances for sampling;
/// keeps singular `x0_cov` or `Q` usable.
pub const SAMPLING_CLAMP_TOL: f64 = 1e-14;

/// One closed-loop rollout under the transmission schedule.
///
/// Lists are indexed by time step: `states` holds `x_0 ... x_N`, every
/// other list covers `k = 0 ... N-1`. The control applied at `k` is
/// `inputs[k] = feedback * estimates[k]`, and `estimates` is the
/// server's posterior given only the transmitted measurements, while
/// `full_estimates` is the posterior a server receiving every
/// measurement of the same realization would hold.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub seed: u64,
    pub period: u32,
    pub horizon: usize,
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    pub transmitted: Vec<bool>,
    pub estimates: Vec<DVector<f64>>,
    pub full_estimates: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub stage_costs: Vec<f64>,
}

/// SplitMix64 output mix.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for trial `trial` of a run rooted at `seed`: the
/// `(trial + 1)`-th output of the SplitMix64 sequence started at
/// `seed`. Distinct trials get independent streams; the mapping is a
/// stable part of the reproducibility contract.
pub fn child_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed.wrapping_add((trial + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Default number of initial steps discarded before any empirical
/// statistic: the orbit results are asymptotic, so transients from the
/// initial condition must not bias the estimates.
pub fn default_burn_in(period: u32) -> usize {
    (100 * period as usize).max(1000)
}

fn sample_gaussian(rng: &mut ChaCha12Rng, mean: &DVector<f64>, factor: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    mean + factor * z
}

/// Joseph-form posterior covariance `(I - KC) P (I - KC)' + K R K'`;
/// algebraically equal to `(I - KC) P` but numerically robust over
/// long horizons.
fn joseph_update(prior: &DMatrix<f64>, gain: &DMatrix<f64>, model: &SystemModel) -> DMatrix<f64> {
    let n = model.state_dim();
    let ik = DMatrix::identity(n, n) - gain * model.c();
    symmetrize(&(&ik * prior * ik.transpose() + gain * model.r() * gain.transpose()))
}

/// Exact closed-loop rollout: the plant runs under the steady feedback
/// applied to the scheduled filter's estimate, while the filter itself
/// runs the time-varying covariance recursion started from the
/// initial-state covariance (so its convergence toward the periodic
/// orbit is part of what simulation observes, rather than assumed).
///
/// Deterministic given `(model, steady, scheme, horizon, seed)`. Draw
/// order: initial state (n variates), then per step the process noise
/// (n) followed by the measurement noise (q).
pub fn simulate(
    model: &SystemModel,
    steady: &SteadyState,
    scheme: &PeriodicScheme,
    horizon: usize,
    seed: u64,
) -> SimulationTrace {
    assert!(horizon >= 1, "horizon must be at least 1");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = model.state_dim();
    let zero_n = DVector::zeros(n);
    let process_factor = psd_sqrt_factor(model.q(), SAMPLING_CLAMP_TOL);
    let measurement_factor = psd_sqrt_factor(model.r(), SAMPLING_CLAMP_TOL);
    let initial_factor = psd_sqrt_factor(model.x0_cov(), SAMPLING_CLAMP_TOL);
    let zero_q = DVector::zeros(model.output_dim());

    let mut states = Vec::with_capacity(horizon + 1);
    let mut measurements = Vec::with_capacity(horizon);
    let mut transmitted = Vec::with_capacity(horizon);
    let mut estimates = Vec::with_capacity(horizon);
    let mut full_estimates = Vec::with_capacity(horizon);
    let mut inputs = Vec::with_capacity(horizon);
    let mut stage_costs = Vec::with_capacity(horizon);

    // k = 0: nothing is transmitted; the server holds the prior mean.
    let x0 = sample_gaussian(&mut rng, model.x0_mean(), &initial_factor);
    let y0 = model.c() * &x0 + sample_gaussian(&mut rng, &zero_q, &measurement_factor);
    states.push(x0);
    measurements.push(y0);
    transmitted.push(scheme.transmits_at(0));
    estimates.push(model.x0_mean().clone());
    full_estimates.push(model.x0_mean().clone());

    // Scheduled filter covariance and the always-updating reference
    // filter covariance, both started at the true initial uncertainty.
    let mut cov = model.x0_cov().clone();
    let mut full_cov = model.x0_cov().clone();

    let stage_cost = |x: &DVector<f64>, u: &DVector<f64>| {
        (x.transpose() * model.w() * x)[(0, 0)] + (u.transpose() * model.u() * u)[(0, 0)]
    };

    for k in 1..=horizon {
        let u = &steady.feedback * &estimates[k - 1];
        stage_costs.push(stage_cost(&states[k - 1], &u));

        let w = sample_gaussian(&mut rng, &zero_n, &process_factor);
        let x = model.a() * &states[k - 1] + model.b() * &u + w;
        inputs.push(u.clone());

        if k == horizon {
            states.push(x);
            break;
        }

        let v = sample_gaussian(&mut rng, &zero_q, &measurement_factor);
        let y = model.c() * &x + v;

        // Scheduled filter: predict, then update only on transmission.
        let predicted = model.a() * &estimates[k - 1] + model.b() * &u;
        let prior_cov = lyapunov_step(&cov, model);
        let sent = scheme.transmits_at(k as u64);
        let estimate = if sent {
            let gain = gain_from_prior(&prior_cov, model);
            cov = joseph_update(&prior_cov, &gain, model);
            &predicted + gain * (&y - model.c() * &predicted)
        } else {
            cov = prior_cov;
            predicted
        };

        // Reference filter: sees every measurement of the same run.
        let full_predicted = model.a() * &full_estimates[k - 1] + model.b() * &u;
        let full_prior = lyapunov_step(&full_cov, model);
        let full_gain = gain_from_prior(&full_prior, model);
        let full_estimate = &full_predicted + &full_gain * (&y - model.c() * &full_predicted);
        full_cov = joseph_update(&full_prior, &full_gain, model);

        states.push(x);
        measurements.push(y);
        transmitted.push(sent);
        estimates.push(estimate);
        full_estimates.push(full_estimate);
    }

    SimulationTrace {
        seed,
        period: scheme.period(),
        horizon,
        states,
        measurements,
        transmitted,
        estimates,
        full_estimates,
        inputs,
        stage_costs,
    }
}

/// Empirical mean stage cost with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEstimate {
    pub mean: f64,
    /// Standard error across trial means; `None` with fewer than two
    /// trials.
    pub std_err: Option<f64>,
    /// Post-burn-in stage-cost samples that entered the mean.
    pub samples: usize,
    pub trials: usize,
}

fn effective_burn_in(burn_in: usize, period: u32, horizon: usize) -> usize {
    burn_in.max(100 * period as usize).min(horizon / 2)
}

fn trace_cost_mean(trace: &SimulationTrace, burn_in: usize) -> (f64, usize) {
    let start = effective_burn_in(burn_in, trace.period, trace.horizon);
    let slice = &trace.stage_costs[start..];
    let mean = slice.iter().sum::<f64>() / slice.len() as f64;
    (mean, slice.len())
}

/// Mean stage cost across time and trials, burn-in removed. Each trace
/// contributes its post-burn-in time average; the standard error is
/// taken across those per-trial averages.
pub fn empirical_average_cost(traces: &[SimulationTrace], burn_in: usize) -> CostEstimate {
    assert!(!traces.is_empty(), "at least one trace is required");
    let per_trial: Vec<(f64, usize)> = traces.iter().map(|t| trace_cost_mean(t, burn_in)).collect();
    summarize_cost(&per_trial)
}

fn summarize_cost(per_trial: &[(f64, usize)]) -> CostEstimate {
    let trials = per_trial.len();
    let samples = per_trial.iter().map(|(_, n)| n).sum();
    let mean = per_trial.iter().map(|(m, _)| m).sum::<f64>() / trials as f64;
    let std_err = if trials >= 2 {
        let var = per_trial
            .iter()
            .map(|(m, _)| (m - mean).powi(2))
            .sum::<f64>()
            / (trials - 1) as f64;
        Some((var / trials as f64).sqrt())
    } else {
        None
    };
    CostEstimate {
        mean,
        std_err,
        samples,
        trials,
    }
}

/// Streamed multi-trial statistics: per-offset second moments of the
/// estimation error and the average stage cost, trials processed in
/// index order with child seeds so the reduction is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSummary {
    pub period: u32,
    /// Sample covariance of `x_k - estimate_k` for each offset within
    /// the period; offset 0 collects the transmission instants
    /// `k = lT + 1`.
    pub covariances: Vec<DMatrix<f64>>,
    /// Samples behind each offset's covariance.
    pub counts: Vec<usize>,
    pub cost: CostEstimate,
    /// Burn-in actually applied (after the 100-period floor and the
    /// half-horizon cap).
    pub burn_in: usize,
}

/// Run `trials` seeded rollouts and accumulate the per-offset error
/// covariances and the cost estimate.
///
/// The requested burn-in is raised to at least 100 periods and capped
/// at half the horizon so that even toy horizons yield samples (the
/// caller can see the applied value in the summary).
pub fn empirical_summary(
    model: &SystemModel,
    steady: &SteadyState,
    scheme: &PeriodicScheme,
    horizon: usize,
    trials: usize,
    seed: u64,
    burn_in: usize,
) -> EmpiricalSummary {
    assert!(trials >= 1, "at least one trial is required");
    let period = scheme.period() as usize;
    let burn = effective_burn_in(burn_in, scheme.period(), horizon);
    let n = model.state_dim();
    let mut sums = vec![DMatrix::<f64>::zeros(n, n); period];
    let mut counts = vec![0usize; period];
    let mut per_trial = Vec::with_capacity(trials);

    for trial in 0..trials {
        let trace = simulate(
            model,
            steady,
            scheme,
            horizon,
            child_seed(seed, trial as u64),
        );
        for k in burn.max(1)..horizon.min(trace.estimates.len()) {
            let offset = (k - 1) % period;
            let err = &trace.states[k] - &trace.estimates[k];
            sums[offset] += &err * err.transpose();
            counts[offset] += 1;
        }
        per_trial.push(trace_cost_mean(&trace, burn_in));
    }

    let covariances = sums
        .into_iter()
        .zip(&counts)
        .map(|(sum, &count)| if count > 0 { sum / count as f64 } else { sum })
        .collect();
    EmpiricalSummary {
        period: scheme.period(),
        covariances,
        counts,
        cost: summarize_cost(&per_trial),
        burn_in: burn,
    }
}

/// Per-offset empirical error covariances (see [`EmpiricalSummary`]).
pub fn empirical_covariance_by_offset(
    model: &SystemModel,
    steady: &SteadyState,
    scheme: &PeriodicScheme,
    horizon: usize,
    trials: usize,
    seed: u64,
    burn_in: usize,
) -> Vec<DMatrix<f64>> {
    empirical_summary(model, steady, scheme, horizon, trials, seed, burn_in).covariances
}

/// Finite-horizon optimal cost, decomposed as
/// `total = E(x_0' S_0 x_0) + noise_cost + estimation_cost`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHorizonCost {
    pub horizon: usize,
    /// Backward Riccati iterates `S_N = W, ..., S_0` (indexed by k).
    pub cost_to_go_seq: Vec<DMatrix<f64>>,
    /// `Phi_k` for `k = 0 ... N-1`.
    pub error_penalty_seq: Vec<DMatrix<f64>>,
    /// Accumulated `tr(S_{k+1} Q)`.
    pub noise_cost: f64,
    /// Accumulated `tr(Phi_k P_k)`, `P_k` being the server's posterior
    /// covariance under the schedule.
    pub estimation_cost: f64,
    pub total: f64,
}

/// Backward dynamic program for the optimal finite-horizon cost under
/// the transmission schedule.
///
/// The posterior covariance sequence follows the deterministic
/// scheduled recursion from the steady covariance; the backward pass
/// iterates `S_k = A' S_{k+1} A + W - Phi_k` from `S_N = W` and
/// accumulates the noise and estimation cost terms. Dividing `total`
/// by the horizon converges to the degraded average cost.
pub fn finite_horizon_cost(
    model: &SystemModel,
    steady: &SteadyState,
    scheme: &PeriodicScheme,
    horizon: usize,
) -> FiniteHorizonCost {
    assert!(horizon >= 1, "horizon must be at least 1");
    let n = horizon;

    // Forward: posterior covariance under the schedule, P_0 = steady.
    let mut posterior = Vec::with_capacity(n);
    posterior.push(steady.error_cov.clone());
    for k in 1..n {
        let prior = lyapunov_step(&posterior[k - 1], model);
        posterior.push(if scheme.transmits_at(k as u64) {
            measurement_update(&prior, model)
        } else {
            prior
        });
    }

    // Backward: Riccati iterates and the two cost accumulators.
    let mut cost_to_go_seq = vec![DMatrix::zeros(0, 0); n + 1];
    cost_to_go_seq[n] = model.w().clone();
    let mut error_penalty_seq = vec![DMatrix::zeros(0, 0); n];
    let mut noise_cost = 0.0;
    let mut estimation_cost = 0.0;
    for k in (0..n).rev() {
        let next = &cost_to_go_seq[k + 1];
        let bsa = model.b().transpose() * next * model.a();
        let hess = symmetrize(&(model.b().transpose() * next * model.b() + model.u()));
        let chol = hess
            .cholesky()
            .expect("input-weighted Hessian must be positive definite (U > 0)");
        let phi = symmetrize(&(bsa.transpose() * chol.solve(&bsa)));
        let s = symmetrize(&(model.a().transpose() * next * model.a() + model.w() - &phi));
        noise_cost += trace_product(next, model.q());
        estimation_cost += trace_product(&phi, &posterior[k]);
        error_penalty_seq[k] = phi;
        cost_to_go_seq[k] = s;
    }

    let s0 = &cost_to_go_seq[0];
    let mean_term = (model.x0_mean().transpose() * s0 * model.x0_mean())[(0, 0)];
    let total = mean_term + trace_product(s0, model.x0_cov()) + noise_cost + estimation_cost;
    FiniteHorizonCost {
        horizon: n,
        cost_to_go_seq,
        error_penalty_seq,
        noise_cost,
        estimation_cost,
        total,
    }
}
