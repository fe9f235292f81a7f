//! Largest-feasible-period selection.
//!
//! The design question: maximize the privacy gain (trace of the
//! covariance excess) over the integer period T, subject to the control
//! loss staying at or below a budget `alpha`. When the loss is
//! non-decreasing in T — true empirically, but not proven, so it is
//! verified per model — integer bisection finds the answer; an
//! exhaustive scan serves as the assumption-free oracle.

use crate::intermittent::PeriodicAnalysis;
use crate::model::SystemModel;
use crate::riccati::{FixedPointOptions, SteadyState};
use crate::{Error, Result};

/// Absolute slack added to `alpha` when testing feasibility, absorbing
/// fixed-point residual in the loss values.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// One period's metrics in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepEntry {
    pub period: u32,
    /// Trace of the privacy metric at this period.
    pub privacy_trace: f64,
    /// Control loss at this period.
    pub lqg_loss: f64,
}

/// How a [`TradeoffResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    Dichotomy,
    LinearScan,
}

impl std::fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchMethod::Dichotomy => write!(f, "dichotomy"),
            SearchMethod::LinearScan => write!(f, "linear_scan"),
        }
    }
}

/// Outcome of a feasible-period search. `optimal_period` is `None`
/// when no period in the range satisfies the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffResult {
    pub optimal_period: Option<u32>,
    pub sweep: Vec<SweepEntry>,
    pub alpha: f64,
    pub method: SearchMethod,
    pub monotone_verified: bool,
}

/// Metrics for every period in `[t_min, t_max]`, ascending, no gaps.
/// A detectability failure names the first offending period.
pub fn sweep(
    model: &SystemModel,
    steady: &SteadyState,
    t_min: u32,
    t_max: u32,
    opts: &FixedPointOptions,
) -> Result<Vec<SweepEntry>> {
    if t_min < 1 || t_min > t_max {
        return Err(Error::InvalidRange { t_min, t_max });
    }
    (t_min..=t_max)
        .map(|period| {
            let analysis = PeriodicAnalysis::compute(model, steady, period, opts)?;
            Ok(SweepEntry {
                period,
                privacy_trace: analysis.privacy_metric.trace(),
                lqg_loss: analysis.lqg_loss,
            })
        })
        .collect()
}

/// True iff the loss column is non-decreasing. Bisection is only sound
/// when this holds.
pub fn verify_monotone(entries: &[SweepEntry]) -> bool {
    entries.windows(2).all(|w| w[1].lqg_loss >= w[0].lqg_loss)
}

fn feasible(entry: &SweepEntry, alpha: f64) -> bool {
    entry.lqg_loss <= alpha + FEASIBILITY_SLACK
}

/// Integer bisection over a precomputed sweep: returns the largest
/// period whose loss stays within `alpha`. Requires the sweep to be
/// monotone (checked here; failure is an error, not a wrong answer).
pub fn dichotomy_over(entries: &[SweepEntry], alpha: f64) -> Result<TradeoffResult> {
    assert!(!entries.is_empty(), "sweep must be non-empty");
    if !verify_monotone(entries) {
        return Err(Error::MonotonicityViolation {
            t_min: entries[0].period,
            t_max: entries[entries.len() - 1].period,
        });
    }
    let mut lo = 0i64;
    let mut hi = entries.len() as i64 - 1;
    let mut best: Option<usize> = None;
    while lo <= hi {
        let mid = ((lo + hi) / 2) as usize;
        if feasible(&entries[mid], alpha) {
            best = Some(mid);
            lo = mid as i64 + 1;
        } else {
            hi = mid as i64 - 1;
        }
    }
    Ok(TradeoffResult {
        optimal_period: best.map(|i| entries[i].period),
        sweep: entries.to_vec(),
        alpha,
        method: SearchMethod::Dichotomy,
        monotone_verified: true,
    })
}

/// Exhaustive scan over a precomputed sweep: among feasible periods,
/// the one with the largest privacy trace, ties broken toward the
/// smaller period. Makes no monotonicity assumption.
pub fn linear_scan_over(entries: &[SweepEntry], alpha: f64) -> TradeoffResult {
    assert!(!entries.is_empty(), "sweep must be non-empty");
    let mut best: Option<&SweepEntry> = None;
    for entry in entries {
        if !feasible(entry, alpha) {
            continue;
        }
        match best {
            Some(b) if entry.privacy_trace <= b.privacy_trace => {}
            _ => best = Some(entry),
        }
    }
    TradeoffResult {
        optimal_period: best.map(|e| e.period),
        sweep: entries.to_vec(),
        alpha,
        method: SearchMethod::LinearScan,
        monotone_verified: verify_monotone(entries),
    }
}

/// Sweep `[t_min, t_max]` and bisect for the largest feasible period.
pub fn dichotomy_search(
    model: &SystemModel,
    steady: &SteadyState,
    t_min: u32,
    t_max: u32,
    alpha: f64,
    opts: &FixedPointOptions,
) -> Result<TradeoffResult> {
    let entries = sweep(model, steady, t_min, t_max, opts)?;
    dichotomy_over(&entries, alpha)
}

/// Sweep `[t_min, t_max]` and scan exhaustively.
pub fn linear_scan(
    model: &SystemModel,
    steady: &SteadyState,
    t_min: u32,
    t_max: u32,
    alpha: f64,
    opts: &FixedPointOptions,
) -> Result<TradeoffResult> {
    let entries = sweep(model, steady, t_min, t_max, opts)?;
    Ok(linear_scan_over(&entries, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn setup() -> (SystemModel, SteadyState) {
        let model = SystemModel::example();
        let steady = SteadyState::compute(&model, &FixedPointOptions::default()).unwrap();
        (model, steady)
    }

    fn example_sweep() -> Vec<SweepEntry> {
        let (model, steady) = setup();
        sweep(&model, &steady, 1, 10, &FixedPointOptions::default()).unwrap()
    }

    // Optimal periods over alpha = 7.0, 7.5, ..., 27.0 for the example
    // model, frozen from an independent exhaustive evaluation.
    const STEPPED_OPTIMA: [u32; 41] = [
        2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 4, 4, 4, 4, 4, 4, 5, 5, 5, 5, 5, 5, 6, 6, 6, 6, 6, 6, 7, 7,
        7, 7, 7, 8, 8, 8, 8, 8, 9, 9, 9,
    ];

    #[test]
    fn sweep_is_ascending_and_strictly_increasing() {
        let entries = example_sweep();
        assert_eq!(entries.len(), 10);
        for (i, entry) in entries.iter().enumerate() {
            assert_eq!(entry.period, i as u32 + 1);
        }
        for w in entries.windows(2) {
            assert!(w[1].privacy_trace > w[0].privacy_trace);
            assert!(w[1].lqg_loss > w[0].lqg_loss);
        }
    }

    #[test]
    fn singleton_sweep_is_zero() {
        let (model, steady) = setup();
        let entries = sweep(&model, &steady, 1, 1, &FixedPointOptions::default()).unwrap();
        assert_eq!(entries.len(), 1);
        assert!(entries[0].privacy_trace.abs() < 1e-9);
        assert!(entries[0].lqg_loss.abs() < 1e-9);
    }

    #[test]
    fn sweep_is_bit_reproducible() {
        let a = example_sweep();
        let b = example_sweep();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_rejects_bad_ranges() {
        let (model, steady) = setup();
        let opts = FixedPointOptions::default();
        assert!(matches!(
            sweep(&model, &steady, 0, 5, &opts),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            sweep(&model, &steady, 4, 2, &opts),
            Err(Error::InvalidRange { .. })
        ));
    }

    #[test]
    fn monotone_guard() {
        let entries = example_sweep();
        assert!(verify_monotone(&entries));
        assert!(verify_monotone(&entries[..1]));
        let mut permuted = entries.clone();
        permuted.swap(2, 7);
        assert!(!verify_monotone(&permuted));
        assert!(matches!(
            dichotomy_over(&permuted, 10.0),
            Err(Error::MonotonicityViolation { .. })
        ));
    }

    #[test]
    fn unconstrained_budget_picks_the_largest_period() {
        let entries = example_sweep();
        let loose = entries.last().unwrap().lqg_loss * 2.0;
        let result = dichotomy_over(&entries, loose).unwrap();
        assert_eq!(result.optimal_period, Some(10));
    }

    #[test]
    fn stepped_optima_over_the_alpha_grid() {
        let entries = example_sweep();
        for (i, expected) in STEPPED_OPTIMA.iter().enumerate() {
            let alpha = 7.0 + 0.5 * i as f64;
            let result = dichotomy_over(&entries, alpha).unwrap();
            assert_eq!(result.optimal_period, Some(*expected), "alpha = {alpha}");
        }
    }

    #[test]
    fn dichotomy_agrees_with_linear_scan_on_random_budgets() {
        let entries = example_sweep();
        let top = entries.last().unwrap().lqg_loss;
        let mut rng = ChaCha12Rng::seed_from_u64(0xa1fa);
        for _ in 0..100 {
            let alpha: f64 = rng.random_range(0.0..1.5 * top);
            let d = dichotomy_over(&entries, alpha).unwrap();
            let l = linear_scan_over(&entries, alpha);
            assert_eq!(d.optimal_period, l.optimal_period, "alpha = {alpha}");
        }
    }

    #[test]
    fn zero_budget_admits_only_the_lossless_period() {
        let entries = example_sweep();
        let result = linear_scan_over(&entries, 0.0);
        assert_eq!(result.optimal_period, Some(1));
    }

    #[test]
    fn infeasible_range_reports_none() {
        let (model, steady) = setup();
        let entries = sweep(&model, &steady, 2, 5, &FixedPointOptions::default()).unwrap();
        let result = linear_scan_over(&entries, 1e-6);
        assert_eq!(result.optimal_period, None);
        let result = dichotomy_over(&entries, 1e-6).unwrap();
        assert_eq!(result.optimal_period, None);
    }

    #[test]
    fn period_one_is_always_feasible_for_positive_budgets() {
        let entries = example_sweep();
        for alpha in [1e-9, 1e-3, 0.5, 3.0] {
            let result = dichotomy_over(&entries, alpha).unwrap();
            assert!(result.optimal_period.is_some(), "alpha = {alpha}");
        }
    }

    #[test]
    fn optimal_period_is_monotone_in_the_budget() {
        let entries = example_sweep();
        let mut prev = 0u32;
        for i in 0..200 {
            let alpha = 0.2 * i as f64;
            let t = dichotomy_over(&entries, alpha)
                .unwrap()
                .optimal_period
                .unwrap();
            assert!(t >= prev, "alpha = {alpha}");
            prev = t;
        }
    }

    #[test]
    fn bisection_matches_scan_on_synthetic_monotone_sweeps() {
        let mut rng = ChaCha12Rng::seed_from_u64(0xbeef);
        for case in 0..100 {
            let len = rng.random_range(1..=12usize);
            let t0 = rng.random_range(1..=5u32);
            let mut loss = 0.0;
            let entries: Vec<SweepEntry> = (0..len)
                .map(|i| {
                    loss += rng.random_range(0.0..3.0);
                    SweepEntry {
                        period: t0 + i as u32,
                        privacy_trace: loss * 0.7,
                        lqg_loss: loss,
                    }
                })
                .collect();
            let alpha = rng.random_range(0.0..loss * 1.2);
            let d = dichotomy_over(&entries, alpha).unwrap();
            let l = linear_scan_over(&entries, alpha);
            assert_eq!(d.optimal_period, l.optimal_period, "case {case}");
        }
    }
}
