//! Periodic transmission schedule and its steady covariance orbit.
//!
//! Under a period-T schedule the server receives measurements only at
//! times `k = lT + 1`. Between transmissions its error covariance grows
//! by the prediction map `h`; at each transmission it is pulled back by
//! a full filter step. In the limit the a-posteriori covariance cycles
//! through `[P~, h(P~), ..., h^{T-1}(P~)]`, where `P~` is the unique
//! fixed point of `g ∘ h^{T-1}` (requiring `(C, A^T)` detectable). The
//! privacy gain of the schedule is the cycle average minus the
//! full-transmission covariance; the induced control loss is that gain
//! weighted by the error-penalty matrix.

use nalgebra::DMatrix;

use crate::linalg::{mat_pow, symmetrize, trace_product};
use crate::model::{self, SystemModel};
use crate::riccati::{fixed_point, lyapunov_step, riccati_step, FixedPoint, FixedPointOptions, SteadyState};
use crate::{Error, Result};

/// A period-T transmission schedule: the measurement is sent at times
/// `k = lT + 1` for `l = 0, 1, 2, ...` and dropped otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicScheme {
    period: u32,
}

impl PeriodicScheme {
    pub fn new(period: u32) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidPeriod);
        }
        Ok(Self { period })
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    /// Whether the measurement at time `k` is transmitted. Time starts
    /// at 0; the first transmission is at `k = 1`, so `k = 0` is never
    /// a transmission instant. With `T = 1` every `k >= 1` transmits.
    pub fn transmits_at(&self, k: u64) -> bool {
        k >= 1 && (k - 1) % u64::from(self.period) == 0
    }
}

/// Unique fixed point `P~` of `X -> g(h^{T-1}(X))`, the a-posteriori
/// covariance at transmission instants.
///
/// Fails with [`Error::DetectabilityViolation`] when `(C, A^T)` is not
/// detectable, in which case no bounded orbit exists. Iteration starts
/// from the full-transmission covariance, which lies below the orbit.
pub fn periodic_fixed_point(
    model: &SystemModel,
    steady: &SteadyState,
    period: u32,
    opts: &FixedPointOptions,
) -> Result<FixedPoint> {
    let scheme = PeriodicScheme::new(period)?;
    let a_pow = mat_pow(model.a(), scheme.period());
    if !model::is_detectable(model.c(), &a_pow) {
        return Err(Error::DetectabilityViolation { period });
    }
    fixed_point(
        |x| {
            let mut y = x.clone();
            for _ in 0..period - 1 {
                y = lyapunov_step(&y, model);
            }
            riccati_step(&y, model)
        },
        &steady.error_cov,
        opts,
    )
}

/// The steady periodic orbit `[P~, h(P~), ..., h^{T-1}(P~)]` of the
/// a-posteriori covariance, offset 0 being the transmission instants.
pub fn covariance_cycle(
    model: &SystemModel,
    p_tilde: &DMatrix<f64>,
    period: u32,
) -> Vec<DMatrix<f64>> {
    let mut cycle = Vec::with_capacity(period as usize);
    cycle.push(p_tilde.clone());
    for i in 1..period as usize {
        let next = lyapunov_step(&cycle[i - 1], model);
        cycle.push(next);
    }
    cycle
}

/// Everything the schedule does to the steady covariance and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicAnalysis {
    pub period: u32,
    /// `P~`: the smallest covariance on the orbit (transmission instants).
    pub floor_cov: DMatrix<f64>,
    /// `[P~, h(P~), ..., h^{T-1}(P~)]`.
    pub cycle: Vec<DMatrix<f64>>,
    /// `h^{T-1}(P~)`: the largest covariance on the orbit.
    pub ceiling_cov: DMatrix<f64>,
    /// Cycle average minus the full-transmission covariance; PSD, and
    /// zero exactly when `T = 1`.
    pub privacy_metric: DMatrix<f64>,
    /// Long-run average control cost under the schedule.
    pub degraded_cost: f64,
    /// `degraded_cost - baseline_cost = tr(Phi * privacy_metric)`.
    pub lqg_loss: f64,
    /// A-priori covariance at transmission instants, `h^T(P~)`; also
    /// the fixed point of `h^T ∘ g~`.
    pub apriori_fixed_point: DMatrix<f64>,
}

impl PeriodicAnalysis {
    pub fn compute(
        model: &SystemModel,
        steady: &SteadyState,
        period: u32,
        opts: &FixedPointOptions,
    ) -> Result<Self> {
        let fp = periodic_fixed_point(model, steady, period, opts)?;
        let cycle = covariance_cycle(model, &fp.value, period);
        let mut avg = DMatrix::zeros(model.state_dim(), model.state_dim());
        for p in &cycle {
            avg += p;
        }
        avg /= f64::from(period);
        let privacy_metric = symmetrize(&(&avg - &steady.error_cov));
        let degraded_cost = trace_product(&steady.cost_to_go, model.q())
            + trace_product(&steady.error_penalty, &avg);
        let lqg_loss = trace_product(&steady.error_penalty, &privacy_metric);
        let ceiling_cov = cycle[period as usize - 1].clone();
        let apriori_fixed_point = lyapunov_step(&ceiling_cov, model);
        Ok(Self {
            period,
            floor_cov: fp.value,
            cycle,
            ceiling_cov,
            privacy_metric,
            degraded_cost,
            lqg_loss,
            apriori_fixed_point,
        })
    }
}

/// Cycle-average covariance excess over full transmission.
pub fn privacy_metric(
    model: &SystemModel,
    steady: &SteadyState,
    period: u32,
    opts: &FixedPointOptions,
) -> Result<DMatrix<f64>> {
    Ok(PeriodicAnalysis::compute(model, steady, period, opts)?.privacy_metric)
}

/// Long-run average control cost under the period-T schedule:
/// `tr(S Q) + tr(Phi * cycle_average)`. At least the baseline cost.
pub fn degraded_cost(
    model: &SystemModel,
    steady: &SteadyState,
    period: u32,
    opts: &FixedPointOptions,
) -> Result<f64> {
    Ok(PeriodicAnalysis::compute(model, steady, period, opts)?.degraded_cost)
}

/// Control-performance loss `tr(Phi * privacy_metric)`, equal to the
/// degraded cost minus the baseline cost.
pub fn lqg_loss(
    model: &SystemModel,
    steady: &SteadyState,
    period: u32,
    opts: &FixedPointOptions,
) -> Result<f64> {
    Ok(PeriodicAnalysis::compute(model, steady, period, opts)?.lqg_loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use crate::riccati::measurement_update;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn setup() -> (SystemModel, SteadyState) {
        let model = SystemModel::example();
        let steady = SteadyState::compute(&model, &FixedPointOptions::default()).unwrap();
        (model, steady)
    }

    // Frozen orbit values for the example model at T = 3, from the
    // long-run scheduled covariance recursion run to stationarity.
    const P_TILDE_3: [f64; 4] = [
        0.826444525257793,
        1.009869058985222,
        1.009869058985222,
        5.378234721261720,
    ];
    const TR_PRIVACY: [f64; 10] = [
        0.0,
        2.849202876934,
        5.036398517555,
        6.942169174735,
        8.682219709549,
        10.307391557760,
        11.844841934550,
        13.310937971480,
        14.716409539700,
        16.068750875360,
    ];
    const LQG_LOSS: [f64; 10] = [
        0.0,
        4.610777767760,
        8.421193811719,
        11.820291209980,
        14.957196404490,
        17.904139987940,
        20.701937913380,
        23.376121694330,
        25.943884014970,
        28.417482150910,
    ];

    #[test]
    fn schedule_patterns() {
        let t3 = PeriodicScheme::new(3).unwrap();
        let bits: Vec<bool> = (1..=7).map(|k| t3.transmits_at(k)).collect();
        assert_eq!(bits, [true, false, false, true, false, false, true]);

        let t1 = PeriodicScheme::new(1).unwrap();
        assert!((1..=20).all(|k| t1.transmits_at(k)));

        let t2 = PeriodicScheme::new(2).unwrap();
        for k in 1..=20u64 {
            assert_eq!(t2.transmits_at(k), k % 2 == 1, "k = {k}");
        }

        assert!(!t3.transmits_at(0));
        assert_eq!(PeriodicScheme::new(0), Err(Error::InvalidPeriod));
    }

    #[test]
    fn period_one_fixed_point_is_the_steady_covariance() {
        let (model, steady) = setup();
        let fp = periodic_fixed_point(&model, &steady, 1, &FixedPointOptions::default()).unwrap();
        assert!((fp.value - &steady.error_cov).norm() < 1e-9);
        let cycle = covariance_cycle(&model, &steady.error_cov, 1);
        assert_eq!(cycle.len(), 1);
    }

    #[test]
    fn period_three_fixed_point_matches_frozen_orbit() {
        let (model, steady) = setup();
        let fp = periodic_fixed_point(&model, &steady, 3, &FixedPointOptions::default()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &P_TILDE_3);
        assert_relative_eq!(fp.value, expected, epsilon = 1e-8);
        // Dominates the full-transmission covariance.
        let diff = &fp.value - &steady.error_cov;
        assert!(min_eigenvalue(&diff) >= -1e-9);
        // Residual of the defining equation.
        let mapped = riccati_step(
            &lyapunov_step(&lyapunov_step(&fp.value, &model), &model),
            &model,
        );
        let res = (mapped - &fp.value).norm();
        assert!(res <= 1e-10 * (1.0 + fp.value.norm()), "residual {res:e}");
    }

    #[test]
    fn periodic_fixed_point_is_start_independent() {
        let (model, _) = setup();
        let opts = FixedPointOptions::default();
        let map = |x: &DMatrix<f64>| {
            riccati_step(&lyapunov_step(&lyapunov_step(x, &model), &model), &model)
        };
        let from_zero = fixed_point(map, &DMatrix::zeros(2, 2), &opts).unwrap().value;
        let from_large = fixed_point(map, &(DMatrix::identity(2, 2) * 100.0), &opts)
            .unwrap()
            .value;
        assert!((from_zero - from_large).norm() < 1e-8);
    }

    #[test]
    fn period_two_cycle_closes() {
        let (model, steady) = setup();
        let analysis =
            PeriodicAnalysis::compute(&model, &steady, 2, &FixedPointOptions::default()).unwrap();
        assert_eq!(analysis.cycle.len(), 2);
        let back = riccati_step(&analysis.cycle[1], &model);
        assert!((back - &analysis.floor_cov).norm() < 1e-9);
    }

    #[test]
    fn cycle_elements_follow_the_prediction_map() {
        let (model, steady) = setup();
        let analysis =
            PeriodicAnalysis::compute(&model, &steady, 4, &FixedPointOptions::default()).unwrap();
        for i in 0..3 {
            let direct = model.a() * &analysis.cycle[i] * model.a().transpose() + model.q();
            assert_relative_eq!(analysis.cycle[i + 1], direct, epsilon = 1e-12);
        }
        assert_eq!(analysis.ceiling_cov, analysis.cycle[3]);
    }

    #[test]
    fn period_one_metrics_vanish() {
        let (model, steady) = setup();
        let analysis =
            PeriodicAnalysis::compute(&model, &steady, 1, &FixedPointOptions::default()).unwrap();
        assert!(analysis.privacy_metric.norm() < 1e-12);
        assert!(analysis.lqg_loss.abs() < 1e-12);
        assert_relative_eq!(
            analysis.degraded_cost,
            steady.baseline_cost,
            max_relative = 1e-12
        );
    }

    #[test]
    fn metrics_match_frozen_values_and_increase_with_period() {
        let (model, steady) = setup();
        let opts = FixedPointOptions::default();
        let mut prev_trace = -1.0;
        let mut prev_loss = -1.0;
        for period in 1..=10u32 {
            let a = PeriodicAnalysis::compute(&model, &steady, period, &opts).unwrap();
            let trace = a.privacy_metric.trace();
            let idx = (period - 1) as usize;
            assert_relative_eq!(trace, TR_PRIVACY[idx], epsilon = 1e-8);
            assert_relative_eq!(a.lqg_loss, LQG_LOSS[idx], epsilon = 1e-8);
            assert!(trace > prev_trace, "trace not increasing at T = {period}");
            assert!(a.lqg_loss > prev_loss, "loss not increasing at T = {period}");
            prev_trace = trace;
            prev_loss = a.lqg_loss;

            // Loss computed two ways: trace formula vs cost difference.
            let diff = a.degraded_cost - steady.baseline_cost;
            let scale = 1.0_f64.max(diff.abs());
            assert!((a.lqg_loss - diff).abs() <= 1e-9 * scale);
            assert!(a.degraded_cost >= steady.baseline_cost);

            // The metric stays PSD up to accumulated residual.
            let tol = 1e-9 * (1.0 + a.privacy_metric.norm());
            assert!(min_eigenvalue(&a.privacy_metric) >= -tol);
        }
    }

    #[test]
    fn apriori_and_posteriori_fixed_points_are_consistent() {
        let (model, steady) = setup();
        for period in [1u32, 2, 3, 5] {
            let a =
                PeriodicAnalysis::compute(&model, &steady, period, &FixedPointOptions::default())
                    .unwrap();
            // P~ = g~(Sigma) and Sigma = h^T(P~).
            let recovered = measurement_update(&a.apriori_fixed_point, &model);
            assert!(
                (recovered - &a.floor_cov).norm() < 1e-9,
                "period {period}"
            );
            let mut sigma = a.floor_cov.clone();
            for _ in 0..period {
                sigma = lyapunov_step(&sigma, &model);
            }
            assert!((sigma - &a.apriori_fixed_point).norm() < 1e-9);
        }
    }

    #[test]
    fn undetectable_power_is_rejected() {
        // A is 1.1x a quarter-turn rotation: (C, A) is detectable, but
        // A^2 = -1.21 I makes every direction invisible to C = [1, 0].
        let model = SystemModel::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.1, -1.1, 0.0]),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let steady = SteadyState::compute(&model, &FixedPointOptions::default()).unwrap();
        let err =
            periodic_fixed_point(&model, &steady, 2, &FixedPointOptions::default()).unwrap_err();
        assert_eq!(err, Error::DetectabilityViolation { period: 2 });
        // Period 1 is still fine.
        assert!(periodic_fixed_point(&model, &steady, 1, &FixedPointOptions::default()).is_ok());
    }
}
