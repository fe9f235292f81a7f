//! System model, structural tests, and validation.
//!
//! The plant is `x_{k+1} = A x_k + B u_k + w_k` with measurements
//! `y_k = C x_k + v_k`, process noise covariance `Q`, measurement noise
//! covariance `R`, quadratic stage cost `x'Wx + u'Uu`, and Gaussian
//! initial state `N(x0_mean, x0_cov)`. Everything downstream assumes
//! the structural properties checked by [`SystemModel::validate`]:
//! `(A, B)` controllable, `(C, A)` detectable, `(A, sqrt(Q))`
//! stabilizable, and the definiteness of the weight matrices.

use nalgebra::{Complex, DMatrix, DVector};

use crate::linalg;
use crate::{Error, Result};

/// Absolute entrywise tolerance for accepting a matrix as symmetric.
/// Inputs within tolerance are symmetrized on ingestion.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative singular-value threshold for rank decisions: deficiency is
/// declared when `sigma_min <= RANK_TOL * sigma_max`.
pub const RANK_TOL: f64 = 1e-9;

/// Eigenvalues of a nominally PSD matrix below this are clamped to zero
/// when factoring its symmetric square root.
pub const SQRT_CLAMP_TOL: f64 = 1e-12;

/// Plant, sensor, cost, and initial-condition data.
///
/// Construction checks dimensional consistency and symmetrizes the
/// covariance and weight matrices (rejecting anything asymmetric beyond
/// [`SYMMETRY_TOL`]). Semantic assumptions are reported, not enforced,
/// by [`SystemModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    w: DMatrix<f64>,
    u: DMatrix<f64>,
    x0_mean: DVector<f64>,
    x0_cov: DMatrix<f64>,
}

impl SystemModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        w: DMatrix<f64>,
        u: DMatrix<f64>,
        x0_mean: DVector<f64>,
        x0_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let m = b.ncols();
        let p = c.nrows();
        let pairs: [(&str, usize, usize, usize, usize); 7] = [
            ("B (rows) vs A", b.nrows(), b.ncols(), n, m),
            ("C (cols) vs A", c.nrows(), c.ncols(), p, n),
            ("Q vs A", q.nrows(), q.ncols(), n, n),
            ("R vs C", r.nrows(), r.ncols(), p, p),
            ("W vs A", w.nrows(), w.ncols(), n, n),
            ("U vs B", u.nrows(), u.ncols(), m, m),
            ("x0_cov vs A", x0_cov.nrows(), x0_cov.ncols(), n, n),
        ];
        for (name, rows, cols, want_rows, want_cols) in pairs {
            if rows != want_rows || cols != want_cols {
                return Err(Error::DimensionMismatch(format!(
                    "{name}: got {rows}x{cols}, expected {want_rows}x{want_cols}"
                )));
            }
        }
        if x0_mean.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x0_mean vs A: got length {}, expected {n}",
                x0_mean.len()
            )));
        }
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::DimensionMismatch(
                "state, input, and output dimensions must all be at least 1".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            c,
            q: ingest_symmetric("Q", q)?,
            r: ingest_symmetric("R", r)?,
            w: ingest_symmetric("W", w)?,
            u: ingest_symmetric("U", u)?,
            x0_mean,
            x0_cov: ingest_symmetric("x0_cov", x0_cov)?,
        })
    }

    /// The second-order benchmark system used by the command-line
    /// examples and most tests: a stable 2-state plant with a single
    /// input and a scalar measurement.
    pub fn example() -> Self {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[0.19, 0.46, 0.31, 0.80]),
            DMatrix::from_row_slice(2, 1, &[2.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.9, 0.9, 0.9, 2.8]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 0.5, 1.5]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.9, 0.9, 0.9, 2.8]),
        )
        .expect("example model is well-formed")
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Process-noise covariance.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Measurement-noise covariance.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// State cost weight.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Input cost weight.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn x0_mean(&self) -> &DVector<f64> {
        &self.x0_mean
    }

    pub fn x0_cov(&self) -> &DMatrix<f64> {
        &self.x0_cov
    }

    /// Run every structural and definiteness check with the default
    /// rank tolerance.
    pub fn validate(&self) -> ValidationReport {
        self.validate_with(RANK_TOL)
    }

    /// Run every structural and definiteness check.
    ///
    /// The report is pure: identical inputs give identical reports.
    pub fn validate_with(&self, rank_tol: f64) -> ValidationReport {
        let mut checks = Vec::new();

        for (name, mat) in [
            ("Q >= 0", &self.q),
            ("W >= 0", &self.w),
            ("x0_cov >= 0", &self.x0_cov),
        ] {
            let min = linalg::min_eigenvalue(mat);
            let scale = 1.0 + linalg::max_abs_eigenvalue(mat);
            checks.push(CheckResult {
                name: name.to_string(),
                passed: min >= -1e-10 * scale,
                detail: format!("min eigenvalue {min:.3e}"),
            });
        }
        for (name, mat) in [("R > 0", &self.r), ("U > 0", &self.u)] {
            let min = linalg::min_eigenvalue(mat);
            checks.push(CheckResult {
                name: name.to_string(),
                passed: min > 0.0 && mat.clone().cholesky().is_some(),
                detail: format!("min eigenvalue {min:.3e}"),
            });
        }

        let ctrb = is_controllable_with_tol(&self.a, &self.b, rank_tol);
        checks.push(CheckResult {
            name: "(A, B) controllable".to_string(),
            passed: ctrb,
            detail: format!("rank test at tolerance {rank_tol:.1e}"),
        });

        let detb = is_detectable_with_tol(&self.c, &self.a, rank_tol);
        checks.push(CheckResult {
            name: "(C, A) detectable".to_string(),
            passed: detb,
            detail: "PBH test over eigenvalues with |lambda| >= 1".to_string(),
        });

        let sqrt_q = psd_sqrt_factor(&self.q, SQRT_CLAMP_TOL);
        let stab = is_stabilizable_with_tol(&self.a, &sqrt_q, rank_tol);
        checks.push(CheckResult {
            name: "(A, sqrt(Q)) stabilizable".to_string(),
            passed: stab,
            detail: "PBH test over eigenvalues with |lambda| >= 1".to_string(),
        });

        ValidationReport { checks }
    }
}

fn ingest_symmetric(name: &'static str, x: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let deviation = linalg::max_asymmetry(&x);
    if deviation > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { name, deviation });
    }
    Ok(linalg::symmetrize(&x))
}

/// Outcome of a single validation check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// All validation checks for a model; `overall` is true iff every
/// check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn overall(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(0)
            .max(5);
        writeln!(f, "{:<width$}  {:<6}  detail", "check", "status")?;
        for check in &self.checks {
            writeln!(
                f,
                "{:<width$}  {:<6}  {}",
                check.name,
                if check.passed { "pass" } else { "FAIL" },
                check.detail
            )?;
        }
        write!(
            f,
            "overall: {}",
            if self.overall() { "pass" } else { "FAIL" }
        )
    }
}

/// Kalman rank test: `[B, AB, ..., A^{n-1}B]` must have rank n.
pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    is_controllable_with_tol(a, b, RANK_TOL)
}

pub fn is_controllable_with_tol(a: &DMatrix<f64>, b: &DMatrix<f64>, rank_tol: f64) -> bool {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "A must be square");
    assert_eq!(b.nrows(), n, "B must have as many rows as A");
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        ctrb.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    linalg::rank(&ctrb, rank_tol) == n
}

/// PBH test: `(C, M)` is detectable iff `[M - lambda I; C]` has full
/// column rank for every eigenvalue of M on or outside the unit circle.
pub fn is_detectable(c: &DMatrix<f64>, m: &DMatrix<f64>) -> bool {
    is_detectable_with_tol(c, m, RANK_TOL)
}

pub fn is_detectable_with_tol(c: &DMatrix<f64>, m: &DMatrix<f64>, rank_tol: f64) -> bool {
    let n = m.nrows();
    assert_eq!(m.ncols(), n, "M must be square");
    assert_eq!(c.ncols(), n, "C must have as many columns as M");
    let p = c.nrows();
    for lambda in m.complex_eigenvalues().iter() {
        if lambda.norm() < 1.0 {
            continue;
        }
        let mut stacked = DMatrix::<Complex<f64>>::zeros(n + p, n);
        for i in 0..n {
            for j in 0..n {
                stacked[(i, j)] = Complex::new(m[(i, j)], 0.0);
            }
            stacked[(i, i)] -= lambda;
        }
        for i in 0..p {
            for j in 0..n {
                stacked[(n + i, j)] = Complex::new(c[(i, j)], 0.0);
            }
        }
        if linalg::rank_complex(&stacked, rank_tol) < n {
            return false;
        }
    }
    true
}

/// PBH test: `(A, G)` is stabilizable iff `[A - lambda I, G]` has full
/// row rank for every eigenvalue of A on or outside the unit circle.
pub fn is_stabilizable(a: &DMatrix<f64>, g: &DMatrix<f64>) -> bool {
    is_stabilizable_with_tol(a, g, RANK_TOL)
}

pub fn is_stabilizable_with_tol(a: &DMatrix<f64>, g: &DMatrix<f64>, rank_tol: f64) -> bool {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "A must be square");
    assert_eq!(g.nrows(), n, "G must have as many rows as A");
    let m = g.ncols();
    for lambda in a.complex_eigenvalues().iter() {
        if lambda.norm() < 1.0 {
            continue;
        }
        let mut wide = DMatrix::<Complex<f64>>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                wide[(i, j)] = Complex::new(a[(i, j)], 0.0);
            }
            wide[(i, i)] -= lambda;
            for j in 0..m {
                wide[(i, n + j)] = Complex::new(g[(i, j)], 0.0);
            }
        }
        if linalg::rank_complex(&wide, rank_tol) < n {
            return false;
        }
    }
    true
}

/// Symmetric square-root factor `F` with `F F' = X` for PSD `X`, via
/// eigendecomposition. Eigenvalues below `clamp` are treated as zero,
/// so marginally indefinite inputs (at machine precision) still factor.
pub fn psd_sqrt_factor(x: &DMatrix<f64>, clamp: f64) -> DMatrix<f64> {
    let eig = linalg::symmetrize(x).symmetric_eigen();
    let n = x.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..n {
        let lambda = eig.eigenvalues[j];
        let root = if lambda < clamp { 0.0 } else { lambda.sqrt() };
        for i in 0..n {
            scaled[(i, j)] *= root;
        }
    }
    scaled
}
