//! Run configuration: a TOML file with the model matrices (nested row
//! arrays), the period range, loss budgets, simulation parameters, and
//! tolerances. Matrices use lowercase keys (`a`, `b`, `c`, `q`, `r`,
//! `w`, `u`, `x0_mean`, `x0_cov`); see `configs/paper.cfg` for the
//! complete schema.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lqg_privacy::model::SystemModel;
use lqg_privacy::riccati::FixedPointOptions;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: ModelSection,
    #[serde(default)]
    range: RangeSection,
    #[serde(default)]
    alpha: AlphaValue,
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    tolerances: ToleranceSection,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    x0_mean: Vec<f64>,
    x0_cov: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeSection {
    t_min: u32,
    t_max: u32,
}

impl Default for RangeSection {
    fn default() -> Self {
        Self {
            t_min: 1,
            t_max: 50,
        }
    }
}

/// A single budget or a list of budgets.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AlphaValue {
    One(f64),
    Many(Vec<f64>),
}

impl Default for AlphaValue {
    fn default() -> Self {
        AlphaValue::Many(Vec::new())
    }
}

impl AlphaValue {
    fn into_vec(self) -> Vec<f64> {
        match self {
            AlphaValue::One(a) => vec![a],
            AlphaValue::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    #[serde(default = "default_period")]
    period: u32,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    burn_in: Option<usize>,
}

fn default_period() -> u32 {
    3
}
fn default_horizon() -> usize {
    30_000
}
fn default_trials() -> usize {
    40
}
fn default_seed() -> u64 {
    1729
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            period: default_period(),
            horizon: default_horizon(),
            trials: default_trials(),
            seed: default_seed(),
            burn_in: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceSection {
    #[serde(default = "default_fixed_point_tol")]
    fixed_point_tol: f64,
    #[serde(default = "default_rank_tol")]
    rank_tol: f64,
}

fn default_fixed_point_tol() -> f64 {
    1e-12
}
fn default_rank_tol() -> f64 {
    1e-9
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            fixed_point_tol: default_fixed_point_tol(),
            rank_tol: default_rank_tol(),
        }
    }
}

/// Fully resolved run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: SystemModel,
    pub t_min: u32,
    pub t_max: u32,
    pub alphas: Vec<f64>,
    pub period: u32,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub burn_in: Option<usize>,
    pub output_dir: PathBuf,
    pub fixed_point_tol: f64,
    pub rank_tol: f64,
}

fn to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        bail!("matrix {name} has no rows");
    }
    let cols = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            bail!(
                "matrix {name} is ragged: row {} has {} entries, row 0 has {cols}",
                i + 1,
                row.len()
            );
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl RunConfig {
    /// Parse a configuration file. Errors cite the TOML line/key for
    /// syntax and schema problems, and the offending matrices for
    /// structural ones.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        let m = &file.model;
        let model = SystemModel::new(
            to_matrix("a", &m.a)?,
            to_matrix("b", &m.b)?,
            to_matrix("c", &m.c)?,
            to_matrix("q", &m.q)?,
            to_matrix("r", &m.r)?,
            to_matrix("w", &m.w)?,
            to_matrix("u", &m.u)?,
            DVector::from_row_slice(&m.x0_mean),
            to_matrix("x0_cov", &m.x0_cov)?,
        )?;
        if file.range.t_min < 1 || file.range.t_min > file.range.t_max {
            bail!(
                "range: need 1 <= t_min <= t_max, got [{}, {}]",
                file.range.t_min,
                file.range.t_max
            );
        }
        if file.sim.period < 1 {
            bail!("sim.period must be at least 1");
        }
        if file.sim.horizon < 2 {
            bail!("sim.horizon must be at least 2");
        }
        if file.sim.trials < 1 {
            bail!("sim.trials must be at least 1");
        }
        Ok(Self {
            model,
            t_min: file.range.t_min,
            t_max: file.range.t_max,
            alphas: file.alpha.into_vec(),
            period: file.sim.period,
            horizon: file.sim.horizon,
            trials: file.sim.trials,
            seed: file.sim.seed,
            burn_in: file.sim.burn_in,
            output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            fixed_point_tol: file.tolerances.fixed_point_tol,
            rank_tol: file.tolerances.rank_tol,
        })
    }

    /// The built-in second-order example with the period range 1..=10,
    /// the budget grid 7.0, 7.5, ..., 27.0, and a period-3 simulation.
    pub fn example() -> Self {
        Self {
            model: SystemModel::example(),
            t_min: 1,
            t_max: 10,
            alphas: (0..=40).map(|i| 7.0 + 0.5 * i as f64).collect(),
            period: 3,
            horizon: default_horizon(),
            trials: default_trials(),
            seed: default_seed(),
            burn_in: None,
            output_dir: PathBuf::from("out"),
            fixed_point_tol: default_fixed_point_tol(),
            rank_tol: default_rank_tol(),
        }
    }

    pub fn fixed_point_options(&self) -> FixedPointOptions {
        FixedPointOptions {
            tol: self.fixed_point_tol,
            ..FixedPointOptions::default()
        }
    }

    pub fn effective_burn_in(&self) -> usize {
        self.burn_in
            .unwrap_or_else(|| lqg_privacy::sim::default_burn_in(self.period))
    }

    /// Canonical rendering of every parameter that influences the
    /// outputs; equal strings guarantee equal analytic CSV bytes.
    pub fn canonical_string(&self) -> String {
        use std::fmt::Write;
        fn push_entries(s: &mut String, name: &str, entries: &[f64]) {
            write!(s, "{name}=").unwrap();
            for v in entries {
                write!(s, "{v},").unwrap();
            }
            s.push(';');
        }
        let mut s = String::new();
        for (name, m) in [
            ("a", self.model.a()),
            ("b", self.model.b()),
            ("c", self.model.c()),
            ("q", self.model.q()),
            ("r", self.model.r()),
            ("w", self.model.w()),
            ("u", self.model.u()),
            ("x0_cov", self.model.x0_cov()),
        ] {
            let entries: Vec<f64> = m
                .row_iter()
                .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
                .collect();
            push_entries(&mut s, name, &entries);
        }
        push_entries(&mut s, "x0_mean", self.model.x0_mean().as_slice());
        write!(
            s,
            "t_min={};t_max={};alphas={:?};period={};horizon={};trials={};seed={};burn_in={:?};fp_tol={};rank_tol={}",
            self.t_min,
            self.t_max,
            self.alphas,
            self.period,
            self.horizon,
            self.trials,
            self.seed,
            self.burn_in,
            self.fixed_point_tol,
            self.rank_tol
        )
        .unwrap();
        s
    }

    /// First 16 hex characters of the SHA-256 of the canonical string.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
