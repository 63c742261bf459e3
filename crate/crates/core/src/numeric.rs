//! Design matrices for trend-augmented lagged regressions and the least-squares
//! kernel every estimator in the crate goes through.
//!
//! Time is indexed from 1. For lag order `p` and horizon `h` the usable rows are
//! `t = p+1 ..= T-h`, so `y_{t-p}` always exists and the row count is `T - h - p`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a regressor block is rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Relative eigenvalue threshold for covariance matrices.
pub const COV_TOL: f64 = 1e-12;

/// Observed multivariate series in levels: rows are periods, columns are variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    values: DMatrix<f64>,
    names: Vec<String>,
    t0_label: Option<String>,
}

impl Panel {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Invalid("panel must have at least one row and one column".into()));
        }
        if names.len() != values.ncols() {
            return Err(Error::Invalid(format!(
                "panel has {} columns but {} names",
                values.ncols(),
                names.len()
            )));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (r, c) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::Invalid(format!("non-finite value at row {}, column {}", r + 1, names[c])));
        }
        Ok(Panel { values, names, t0_label: None })
    }

    /// Panel with generated names `y1..yn`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|i| format!("y{i}")).collect();
        Panel::new(values, names)
    }

    /// Panel from `t_len * n` values stored period by period.
    pub fn from_row_major(t_len: usize, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != t_len * n {
            return Err(Error::Invalid(format!("expected {} values for {t_len} x {n}, got {}", t_len * n, data.len())));
        }
        Panel::from_matrix(DMatrix::from_row_slice(t_len, n, data))
    }

    pub fn with_t0_label(mut self, label: impl Into<String>) -> Self {
        self.t0_label = Some(label.into());
        self
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn t0_label(&self) -> Option<&str> {
        self.t0_label.as_deref()
    }

    /// Number of periods `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of variables `n`.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Lag order, trend degree and the two horizons.
///
/// `trend_degree = -1` means no deterministic terms, `0` a constant only,
/// `k` the powers `t^0..t^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub lags: usize,
    pub trend_degree: i32,
    /// Horizon covered by the joint parameter vector.
    pub h1: usize,
    /// Reporting horizon; responses beyond `h1` come from the recursion.
    pub h2: usize,
}

impl DesignSpec {
    pub fn new(lags: usize, trend_degree: i32, h1: usize, h2: usize) -> Self {
        DesignSpec { lags, trend_degree, h1, h2 }
    }

    pub fn trend_terms(&self) -> usize {
        (self.trend_degree + 1).max(0) as usize
    }

    pub fn regressors(&self, n: usize) -> usize {
        n * self.lags + self.trend_terms()
    }

    /// Checks the structural constraints and that `T - p - H1 >= n p + k + 2`.
    pub fn validate(&self, t_len: usize, n: usize) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::Invalid("lag order must be at least 1".into()));
        }
        if self.trend_degree < -1 {
            return Err(Error::Invalid("trend degree must be >= -1".into()));
        }
        if self.h1 < self.lags {
            return Err(Error::Invalid(format!("H1 = {} must be >= p = {}", self.h1, self.lags)));
        }
        if self.h2 < self.h1 {
            return Err(Error::Invalid(format!("H2 = {} must be >= H1 = {}", self.h2, self.h1)));
        }
        let need = (n * self.lags) as i64 + self.trend_degree as i64 + 2;
        let have = t_len as i64 - self.lags as i64 - self.h1 as i64;
        if have < need {
            return Err(Error::InsufficientSample {
                rows: have.max(0) as usize,
                regressors: self.regressors(n),
            });
        }
        Ok(())
    }
}

/// A response block regressed on a lag-plus-trend block over a common set of periods.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// 1-based period `t` of each row (the period of the regressors, not the lead).
    pub t_index: Vec<usize>,
}

/// Least-squares output: `q x n` coefficients and `m x n` residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct LsFit {
    pub coefficients: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
}

/// Builds the regression of `y_{t+h}` on `(y_{t-1}, ..., y_{t-p}, 1, t, ..., t^k)`
/// for `t = p+1 ..= T-h`. Fails unless there are at least as many rows as regressors.
pub fn build_design(panel: &Panel, spec: &DesignSpec, h: usize) -> Result<RegressionProblem> {
    build_design_range(panel, spec, h, panel.len().saturating_sub(h))
}

/// As [`build_design`] but with the last regressor period capped at `t_last`.
pub(crate) fn build_design_range(
    panel: &Panel,
    spec: &DesignSpec,
    h: usize,
    t_last: usize,
) -> Result<RegressionProblem> {
    let y = panel.values();
    let (t_len, n) = (y.nrows(), y.ncols());
    let p = spec.lags;
    let q = spec.regressors(n);
    let t_last = t_last.min(t_len.saturating_sub(h));
    let m = t_last.saturating_sub(p);
    if m < q.max(1) {
        return Err(Error::InsufficientSample { rows: m, regressors: q });
    }
    let trend = spec.trend_terms();
    let mut yy = DMatrix::zeros(m, n);
    let mut xx = DMatrix::zeros(m, q);
    let mut t_index = Vec::with_capacity(m);
    for row in 0..m {
        let t = p + 1 + row;
        // t is 1-based; matrix row of y_s is s - 1
        for j in 0..n {
            yy[(row, j)] = y[(t + h - 1, j)];
        }
        for lag in 1..=p {
            for j in 0..n {
                xx[(row, (lag - 1) * n + j)] = y[(t - lag - 1, j)];
            }
        }
        let tf = t as f64;
        let mut pow = 1.0;
        for d in 0..trend {
            xx[(row, n * p + d)] = pow;
            pow *= tf;
        }
        t_index.push(t);
    }
    Ok(RegressionProblem { y: yy, x: xx, t_index })
}

/// Orthogonal-decomposition least squares.
///
/// Columns are scaled to unit norm before the QR factorisation so the rank test
/// is not fooled by raw trend powers; the scaling is undone on the coefficients.
/// Residuals are formed as `(I - QQ')Y`, which keeps `X'e` at rounding level.
pub fn least_squares(prob: &RegressionProblem) -> Result<LsFit> {
    let (m, q) = prob.x.shape();
    if prob.y.nrows() != m {
        return Err(Error::Invalid("response and regressor row counts differ".into()));
    }
    if m < q || q == 0 {
        return Err(Error::InsufficientSample { rows: m, regressors: q });
    }
    let mut scale = vec![0.0; q];
    let mut xs = prob.x.clone();
    for (j, s) in scale.iter_mut().enumerate() {
        let norm = xs.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        *s = norm;
        xs.column_mut(j).unscale_mut(norm);
    }
    let qr = xs.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio < RANK_TOL {
        return Err(Error::RankDeficient { ratio });
    }
    let qmat = qr.q();
    let qty = qmat.transpose() * &prob.y;
    let mut coef = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { ratio })?;
    for (j, s) in scale.iter().enumerate() {
        coef.row_mut(j).unscale_mut(*s);
    }
    let residuals = &prob.y - &qmat * qty;
    Ok(LsFit { coefficients: coef, residuals })
}

/// Sample second moment `(1/m) sum_t a_t b_t'` of two row blocks.
pub(crate) fn cross_moment(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows() as f64;
    (a.transpose() * b) / m
}

pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Fails with `SingularCovariance` unless the smallest eigenvalue exceeds
/// `COV_TOL` times the largest.
pub(crate) fn check_positive_definite(a: &DMatrix<f64>, context: &str) -> Result<()> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::singular(format!("{context}: non-finite entries")));
    }
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if max <= 0.0 || min < COV_TOL * max {
        return Err(Error::singular(format!(
            "{context}: eigenvalues in [{min:.3e}, {max:.3e}]"
        )));
    }
    Ok(())
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn spd_inverse(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    check_positive_definite(a, context)?;
    let chol = a.clone().cholesky().ok_or_else(|| Error::singular(context.to_string()))?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}
