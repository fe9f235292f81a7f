//! The five subcommands. Each takes a resolved [`RunConfig`], performs
//! its computation through the library crate, and writes plot-ready CSV
//! files into the configured output directory.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use lqg_privacy::intermittent::{PeriodicAnalysis, PeriodicScheme};
use lqg_privacy::model::ValidationReport;
use lqg_privacy::optimize::{self, SearchMethod, TradeoffResult};
use lqg_privacy::riccati::SteadyState;
use lqg_privacy::sim::{empirical_summary, simulate};

use crate::config::RunConfig;
use crate::output::{comment_line, write_csv};

/// Structural validation; the caller renders the report and maps
/// `overall` onto the exit status.
pub fn cmd_validate(config: &RunConfig) -> ValidationReport {
    config.model.validate_with(config.rank_tol)
}

/// One row per period in `[t_min, t_max]`: privacy trace, control
/// loss, degraded cost, and the baseline cost.
pub fn cmd_sweep(config: &RunConfig) -> Result<PathBuf> {
    let opts = config.fixed_point_options();
    let steady = SteadyState::compute(&config.model, &opts)?;
    let mut lines = vec![
        comment_line(&config.config_hash(), config.seed),
        "T,tr_Q_privacy,Q_lqg,O_star,J_star".to_string(),
    ];
    for period in config.t_min..=config.t_max {
        let analysis = PeriodicAnalysis::compute(&config.model, &steady, period, &opts)?;
        lines.push(format!(
            "{period},{},{},{},{}",
            analysis.privacy_metric.trace(),
            analysis.lqg_loss,
            analysis.degraded_cost,
            steady.baseline_cost
        ));
    }
    write_csv(&config.output_dir, "sweep.csv", &lines)
}

/// Largest feasible period for every budget in the config. Bisection
/// by default; `force_scan` switches to the exhaustive scan (required
/// when the loss sweep is not monotone).
pub fn cmd_optimize(config: &RunConfig, force_scan: bool) -> Result<PathBuf> {
    if config.alphas.is_empty() {
        bail!("no loss budgets: set `alpha` in the config or pass --alpha");
    }
    let opts = config.fixed_point_options();
    let steady = SteadyState::compute(&config.model, &opts)?;
    let entries = optimize::sweep(&config.model, &steady, config.t_min, config.t_max, &opts)?;
    let mut lines = vec![
        comment_line(&config.config_hash(), config.seed),
        "alpha,T_star,Q_lqg_at_T_star,method".to_string(),
    ];
    for &alpha in &config.alphas {
        let result: TradeoffResult = if force_scan {
            optimize::linear_scan_over(&entries, alpha)
        } else {
            optimize::dichotomy_over(&entries, alpha)
                .context("pass --scan to search without the monotonicity guarantee")?
        };
        let (t_star, loss) = match result.optimal_period {
            Some(t) => {
                let entry = entries.iter().find(|e| e.period == t).unwrap();
                (t.to_string(), entry.lqg_loss.to_string())
            }
            None => ("infeasible".to_string(), String::new()),
        };
        let method = match result.method {
            SearchMethod::Dichotomy => "dichotomy",
            SearchMethod::LinearScan => "linear_scan",
        };
        lines.push(format!("{alpha},{t_star},{loss},{method}"));
    }
    write_csv(&config.output_dir, "optimal_T.csv", &lines)
}

/// One seeded rollout (`trace.csv`) plus multi-trial empirical
/// statistics side by side with their analytic counterparts
/// (`empirical.csv`).
pub fn cmd_simulate(config: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    let opts = config.fixed_point_options();
    let steady = SteadyState::compute(&config.model, &opts)?;
    let scheme = PeriodicScheme::new(config.period)?;
    let analysis = PeriodicAnalysis::compute(&config.model, &steady, config.period, &opts)?;
    let comment = comment_line(&config.config_hash(), config.seed);

    // Single-trace export with the full-transmission estimator of the
    // same realization alongside.
    let trace = simulate(&config.model, &steady, &scheme, config.horizon, config.seed);
    let n = config.model.state_dim();
    let m = config.model.input_dim();
    let mut header = String::from("k,gamma");
    for i in 1..=n {
        header.push_str(&format!(",x_{i}"));
    }
    for i in 1..=n {
        header.push_str(&format!(",xhat_{i}"));
    }
    for i in 1..=m {
        header.push_str(&format!(",u_{i}"));
    }
    header.push_str(",stage_cost");
    for i in 1..=n {
        header.push_str(&format!(",xhat_full_{i}"));
    }
    let mut trace_lines = vec![comment.clone(), header];
    for k in 0..trace.horizon {
        let mut row = format!("{k},{}", u8::from(trace.transmitted[k]));
        for v in trace.states[k].iter() {
            row.push_str(&format!(",{v}"));
        }
        for v in trace.estimates[k].iter() {
            row.push_str(&format!(",{v}"));
        }
        for v in trace.inputs[k].iter() {
            row.push_str(&format!(",{v}"));
        }
        row.push_str(&format!(",{}", trace.stage_costs[k]));
        for v in trace.full_estimates[k].iter() {
            row.push_str(&format!(",{v}"));
        }
        trace_lines.push(row);
    }
    let trace_path = write_csv(&config.output_dir, "trace.csv", &trace_lines)?;

    // Multi-trial statistics against the analytic orbit and cost.
    let summary = empirical_summary(
        &config.model,
        &steady,
        &scheme,
        config.horizon,
        config.trials,
        config.seed,
        config.effective_burn_in(),
    );
    let mut emp_lines = vec![
        comment,
        "record,offset,row,col,empirical,analytic,std_err,samples,note".to_string(),
    ];
    for offset in 0..config.period as usize {
        for i in 0..n {
            for j in 0..n {
                emp_lines.push(format!(
                    "covariance,{offset},{},{},{},{},,{},",
                    i + 1,
                    j + 1,
                    summary.covariances[offset][(i, j)],
                    analysis.cycle[offset][(i, j)],
                    summary.counts[offset]
                ));
            }
        }
    }
    let std_err = summary
        .cost
        .std_err
        .map(|s| s.to_string())
        .unwrap_or_default();
    emp_lines.push(format!(
        "cost,,,,{},{},{std_err},{},",
        summary.cost.mean, analysis.degraded_cost, summary.cost.samples
    ));
    emp_lines.push(format!(
        "baseline_cost,,,,,{},,,",
        steady.baseline_cost
    ));
    if summary.cost.trials < 2 {
        emp_lines.push(
            "warning,,,,,,,,single trial: no standard error; increase sim.trials".to_string(),
        );
    }
    if summary.cost.samples < 1000 * config.period as usize {
        emp_lines.push(format!(
            "warning,,,,,,,,only {} post-burn-in samples: estimates are unreliable",
            summary.cost.samples
        ));
    }
    let emp_path = write_csv(&config.output_dir, "empirical.csv", &emp_lines)?;
    Ok((trace_path, emp_path))
}

/// Emit all four CSV files for the built-in example system.
pub fn cmd_reproduce_example(out_dir: &std::path::Path) -> Result<Vec<PathBuf>> {
    let mut config = RunConfig::example();
    config.output_dir = out_dir.to_path_buf();
    let mut paths = vec![cmd_sweep(&config)?, cmd_optimize(&config, false)?];
    let (trace, empirical) = cmd_simulate(&config)?;
    paths.push(trace);
    paths.push(empirical);
    Ok(paths)
}
