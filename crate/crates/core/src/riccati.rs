//! Covariance operators and steady-state filter/controller quantities.
//!
//! The two building blocks are the prediction (Lyapunov) map
//! `h(X) = A X A' + Q` and the measurement update
//! `g~(X) = X - X C' (C X C' + R)^{-1} C X`; one full filter step is
//! `g = g~ ∘ h`. The steady filtering covariance is the unique fixed
//! point of `g`, the steady control Riccati solution the fixed point of
//! the backward control recursion, and the baseline average cost with
//! every measurement transmitted is `tr(S Q) + tr(Phi P)`.

use nalgebra::DMatrix;

use crate::linalg::{symmetrize, trace_product};
use crate::model::SystemModel;
use crate::{Error, Result};

/// Stopping rule for fixed-point iterations: converged when
/// `||f(X) - X||_F <= tol * (1 + ||X||_F)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

impl FixedPointOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Converged fixed point plus how it was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub value: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Prediction map `h(X) = A X A' + Q`, symmetrized.
pub fn lyapunov_step(x: &DMatrix<f64>, model: &SystemModel) -> DMatrix<f64> {
    symmetrize(&(model.a() * x * model.a().transpose() + model.q()))
}

/// Measurement update `g~(X) = X - X C' (C X C' + R)^{-1} C X`,
/// symmetrized. The innovation covariance is inverted through its
/// Cholesky factor, never explicitly.
pub fn measurement_update(x: &DMatrix<f64>, model: &SystemModel) -> DMatrix<f64> {
    let cx = model.c() * x;
    let innov = symmetrize(&(&cx * model.c().transpose() + model.r()));
    let chol = innov
        .cholesky()
        .expect("innovation covariance must be positive definite (R > 0)");
    let solved = chol.solve(&cx);
    symmetrize(&(x - cx.transpose() * solved))
}

/// One full predict-then-update step `g = g~ ∘ h`.
pub fn riccati_step(x: &DMatrix<f64>, model: &SystemModel) -> DMatrix<f64> {
    measurement_update(&lyapunov_step(x, model), model)
}

/// Iterate `map` from `x0` until the relative Frobenius residual drops
/// below tolerance. Returns the iterate at which the residual was
/// measured; `iterations` counts map evaluations.
pub fn fixed_point<F>(map: F, x0: &DMatrix<f64>, opts: &FixedPointOptions) -> Result<FixedPoint>
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let mut x = x0.clone();
    let mut residual = f64::INFINITY;
    for iterations in 1..=opts.max_iter {
        let next = map(&x);
        residual = (&next - &x).norm();
        // The finiteness guard keeps an overflowing (divergent)
        // iteration from passing the inf <= inf comparison.
        if residual.is_finite() && residual <= opts.tol * (1.0 + x.norm()) {
            return Ok(FixedPoint {
                value: x,
                iterations,
                residual,
            });
        }
        x = next;
    }
    Err(Error::NonConvergence {
        residual,
        iterations: opts.max_iter,
    })
}

/// Kalman gain for a given a-priori covariance:
/// `K = X C' (C X C' + R)^{-1}`.
pub(crate) fn gain_from_prior(prior: &DMatrix<f64>, model: &SystemModel) -> DMatrix<f64> {
    let cx = model.c() * prior;
    let innov = symmetrize(&(&cx * model.c().transpose() + model.r()));
    let chol = innov
        .cholesky()
        .expect("innovation covariance must be positive definite (R > 0)");
    chol.solve(&cx).transpose()
}

/// Steady a-posteriori error covariance and the matching steady gain.
///
/// The covariance solves `P = g(P)`; iteration starts from `Q`
/// (uniqueness of the fixed point makes the start immaterial).
pub fn steady_filter(
    model: &SystemModel,
    opts: &FixedPointOptions,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let fp = fixed_point(|x| riccati_step(x, model), model.q(), opts)?;
    let prior = lyapunov_step(&fp.value, model);
    let gain = gain_from_prior(&prior, model);
    Ok((fp.value, gain))
}

/// Feedback quantities derived from a control Riccati iterate:
/// `Phi = A'SB (B'SB + U)^{-1} B'SA` and the gain
/// `L = -(B'SB + U)^{-1} B'SA`.
fn controller_terms(s: &DMatrix<f64>, model: &SystemModel) -> (DMatrix<f64>, DMatrix<f64>) {
    let bsa = model.b().transpose() * s * model.a();
    let hess = symmetrize(&(model.b().transpose() * s * model.b() + model.u()));
    let chol = hess
        .cholesky()
        .expect("input-weighted Hessian must be positive definite (U > 0)");
    let solved = chol.solve(&bsa);
    let phi = symmetrize(&(bsa.transpose() * &solved));
    (phi, -solved)
}

/// Steady control Riccati solution `S`, feedback gain `L`, and the
/// error-penalty matrix `Phi`, from the backward iteration
/// `S <- A'SA + W - Phi(S)` started at `W`.
pub fn steady_controller(
    model: &SystemModel,
    opts: &FixedPointOptions,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let fp = fixed_point(
        |s| {
            let (phi, _) = controller_terms(s, model);
            symmetrize(&(model.a().transpose() * s * model.a() + model.w() - phi))
        },
        model.w(),
        opts,
    )?;
    let (phi, feedback) = controller_terms(&fp.value, model);
    Ok((fp.value, feedback, phi))
}

/// Optimal long-run average cost with every measurement transmitted:
/// `tr(S Q) + tr(Phi P)`, recomputed from the stored steady fields.
pub fn baseline_cost(model: &SystemModel, steady: &SteadyState) -> f64 {
    trace_product(&steady.cost_to_go, model.q()) + trace_product(&steady.error_penalty, &steady.error_cov)
}

/// Converged filter and controller quantities for a model.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Steady a-posteriori error covariance (fixed point of `g`).
    pub error_cov: DMatrix<f64>,
    /// Steady Kalman gain.
    pub kalman_gain: DMatrix<f64>,
    /// Steady control Riccati solution `S = A'SA + W - Phi`.
    pub cost_to_go: DMatrix<f64>,
    /// Steady feedback gain; the control law is `u = feedback * estimate`.
    pub feedback: DMatrix<f64>,
    /// `Phi = A'SB (B'SB + U)^{-1} B'SA`, the weight the average cost
    /// puts on the estimation error covariance.
    pub error_penalty: DMatrix<f64>,
    /// `tr(S Q) + tr(Phi P)`.
    pub baseline_cost: f64,
}

impl SteadyState {
    pub fn compute(model: &SystemModel, opts: &FixedPointOptions) -> Result<Self> {
        let (error_cov, kalman_gain) = steady_filter(model, opts)?;
        let (cost_to_go, feedback, error_penalty) = steady_controller(model, opts)?;
        let baseline_cost = trace_product(&cost_to_go, model.q())
            + trace_product(&error_penalty, &error_cov);
        Ok(Self {
            error_cov,
            kalman_gain,
            cost_to_go,
            feedback,
            error_penalty,
            baseline_cost,
        })
    }
}
