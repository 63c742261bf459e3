//! Hybrid local-projection estimator.
//!
//! For every horizon `h = 0..=H1` the lead `y_{t+h}` and the current value `y_t`
//! are both projected on `(y_{t-1..t-p}, mu_t)` over the same periods
//! `t = p+1 ..= T-h`. The reduced-form response `C_h` is the regression of the
//! lead residual on the current residual, which by Frisch-Waugh-Lovell equals the
//! coefficient on `y_t` in the direct projection of `y_{t+h}` on
//! `(y_t, mu_{t-1}, y_{t-1..t-p})`.
//!
//! Responses beyond `H1` come from the lag matrices implied by `C_1..C_p`
//! (the backward recursion), run forward again.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::numeric::{
    build_design, check_positive_definite, cross_moment, least_squares, symmetrize, DesignSpec,
    Panel, RegressionProblem,
};

/// Innovation variance at or below this fraction of the response power is treated as zero.
const DEGENERATE_TOL: f64 = 1e-20;

/// Residuals for one horizon over the periods `t_first ..= t_first + rows - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonResiduals {
    pub h: usize,
    /// First (1-based) period `t` of the block.
    pub t_first: usize,
    /// `eta_{t+h}(h)`: residual of `y_{t+h}` on the lag/trend block.
    pub lead: DMatrix<f64>,
    /// Residual of `y_t` on the same regressors and the same periods.
    pub base: DMatrix<f64>,
}

impl HorizonResiduals {
    pub fn rows(&self) -> usize {
        self.lead.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub t_len: usize,
    pub lags: usize,
    /// Mean square of the `h = 0` responses; the yardstick for degenerate residuals.
    pub response_power: f64,
    pub blocks: Vec<HorizonResiduals>,
}

impl ResidualSet {
    pub fn dim(&self) -> usize {
        self.blocks[0].lead.ncols()
    }

    pub fn h1(&self) -> usize {
        self.blocks.len() - 1
    }

    /// The one-step innovations `eta_t`, `t = p+1 ..= T`.
    pub fn innovations(&self) -> &DMatrix<f64> {
        &self.blocks[0].lead
    }
}

/// Joint parameter block `vec(Sigma, C_1, ..., C_H1, gamma)`.
///
/// The flat layout stacks the column-major vectorisation of `Sigma`, then of
/// each `C_h` in horizon order, then `gamma`; its length is `n^2 (H1+1) + n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    pub sigma: DMatrix<f64>,
    pub c: Vec<DMatrix<f64>>,
    pub gamma: DVector<f64>,
}

impl ThetaVector {
    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn h1(&self) -> usize {
        self.c.len()
    }

    pub fn dim(&self) -> usize {
        theta_dim(self.n(), self.h1())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(self.sigma.as_slice());
        for c in &self.c {
            out.extend_from_slice(c.as_slice());
        }
        out.extend_from_slice(self.gamma.as_slice());
        out
    }

    pub fn from_flat(n: usize, h1: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != theta_dim(n, h1) {
            return Err(Error::Invalid(format!(
                "theta vector has length {}, expected {}",
                flat.len(),
                theta_dim(n, h1)
            )));
        }
        let nn = n * n;
        let sigma = DMatrix::from_column_slice(n, n, &flat[..nn]);
        let c = (0..h1)
            .map(|h| DMatrix::from_column_slice(n, n, &flat[nn * (h + 1)..nn * (h + 2)]))
            .collect();
        let gamma = DVector::from_column_slice(&flat[nn * (h1 + 1)..]);
        Ok(ThetaVector { sigma, c, gamma })
    }

    /// Offset of the `C_h` block (h >= 1) in the flat layout.
    pub fn c_offset(n: usize, h: usize) -> usize {
        n * n * h
    }

    pub fn gamma_offset(n: usize, h1: usize) -> usize {
        n * n * (h1 + 1)
    }
}

pub fn theta_dim(n: usize, h1: usize) -> usize {
    n * n * (h1 + 1) + n
}

/// Reduced-form responses `C_0..C_H2`, the implied lag matrices, and optionally
/// the structural responses `psi_0..psi_H2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfBundle {
    pub c_full: Vec<DMatrix<f64>>,
    pub a_br: Vec<DMatrix<f64>>,
    pub psi: Option<Vec<DVector<f64>>>,
}

impl IrfBundle {
    pub fn horizon(&self) -> usize {
        self.c_full.len() - 1
    }
}

/// Everything the point estimation produces.
#[derive(Debug, Clone)]
pub struct LpEstimate {
    pub theta: ThetaVector,
    pub residuals: ResidualSet,
    pub irf: IrfBundle,
    pub spec: DesignSpec,
    pub shock_index: usize,
    pub warnings: Vec<Warning>,
}

pub fn estimate_residuals(panel: &Panel, spec: &DesignSpec) -> Result<ResidualSet> {
    spec.validate(panel.len(), panel.dim())?;
    let n = panel.dim();
    let blocks = (0..=spec.h1)
        .into_par_iter()
        .map(|h| {
            let prob = build_design(panel, spec, h)?;
            if h == 0 {
                let fit = least_squares(&prob)?;
                return Ok((prob.y.norm_squared() / prob.y.len() as f64, HorizonResiduals {
                    h,
                    t_first: prob.t_index[0],
                    base: fit.residuals.clone(),
                    lead: fit.residuals,
                }));
            }
            // lead and current values share the regressors: solve both at once
            let m = prob.y.nrows();
            let mut both = DMatrix::zeros(m, 2 * n);
            both.columns_mut(0, n).copy_from(&prob.y);
            let y = panel.values();
            for (row, t) in prob.t_index.iter().enumerate() {
                for j in 0..n {
                    both[(row, n + j)] = y[(t - 1, j)];
                }
            }
            let t_first = prob.t_index[0];
            let fit = least_squares(&RegressionProblem { y: both, x: prob.x, t_index: prob.t_index })?;
            Ok((0.0, HorizonResiduals {
                h,
                t_first,
                lead: fit.residuals.columns(0, n).into_owned(),
                base: fit.residuals.columns(n, n).into_owned(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let response_power = blocks[0].0;
    let blocks = blocks.into_iter().map(|(_, b)| b).collect();
    Ok(ResidualSet { t_len: panel.len(), lags: spec.lags, response_power, blocks })
}

/// Innovation covariance averaged over the rows of the `h = 0` block.
pub fn estimate_sigma(res: &ResidualSet) -> Result<DMatrix<f64>> {
    let eta = res.innovations();
    let mut sigma = cross_moment(eta, eta);
    symmetrize(&mut sigma);
    // residuals at rounding level relative to the data mean an exact fit
    if sigma.diagonal().max() <= DEGENERATE_TOL * res.response_power {
        return Err(Error::singular("innovation covariance: residuals vanish"));
    }
    check_positive_definite(&sigma, "innovation covariance")?;
    Ok(sigma)
}

/// `C_h' = (sum base base')^{-1} sum base lead'` over the horizon-`h` periods.
pub fn estimate_c(res: &ResidualSet, h: usize) -> Result<DMatrix<f64>> {
    let block = res
        .blocks
        .get(h)
        .ok_or_else(|| Error::Invalid(format!("no residual block for horizon {h}")))?;
    let mut gram = block.base.transpose() * &block.base;
    symmetrize(&mut gram);
    check_positive_definite(&gram, "projection Gram matrix")?;
    let cross = block.base.transpose() * &block.lead;
    let chol = gram.cholesky().ok_or_else(|| Error::singular("projection Gram matrix"))?;
    Ok(chol.solve(&cross).transpose())
}

/// Deviations of an instrument from its mean on the given rows.
///
/// The series is first shifted by its first aligned value so that adding an
/// exactly representable constant to the instrument leaves the result unchanged
/// to the bit.
pub(crate) fn centered_instrument(z: &[f64]) -> Vec<f64> {
    let pivot = z[0];
    let shifted: Vec<f64> = z.iter().map(|v| v - pivot).collect();
    let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
    shifted.into_iter().map(|v| v - mean).collect()
}

/// Instrument slice aligned with the `h = 0` residual rows (`t = p+1 ..= T`).
pub(crate) fn aligned_instrument<'a>(res: &ResidualSet, z: &'a [f64]) -> Result<&'a [f64]> {
    if z.len() != res.t_len {
        return Err(Error::Invalid(format!(
            "instrument has {} observations, panel has {}",
            z.len(),
            res.t_len
        )));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("instrument is not finite at row {}", i + 1)));
    }
    Ok(&z[res.lags..])
}

/// Per-row products `eta_t * eta_{s,t}` for the shock variable `s`.
pub(crate) fn shock_products(eta: &DMatrix<f64>, shock: usize) -> DMatrix<f64> {
    let mut out = eta.clone();
    for (row, mut r) in out.row_iter_mut().enumerate() {
        r *= eta[(row, shock)];
    }
    out
}

/// Centered covariance between `eta_t eta_{s,t}` and the instrument.
///
/// `z` is the full-length instrument (one value per panel row). A constant
/// instrument gives exactly zero and a `WeakInstrument` warning.
pub fn estimate_gamma(
    res: &ResidualSet,
    z: &[f64],
    shock: usize,
) -> Result<(DVector<f64>, Option<Warning>)> {
    let n = res.dim();
    if shock >= n {
        return Err(Error::Invalid(format!("shock index {shock} out of range for {n} variables")));
    }
    let zz = aligned_instrument(res, z)?;
    let zc = centered_instrument(zz);
    let prod = shock_products(res.innovations(), shock);
    let m = prod.nrows() as f64;
    let mean = prod.row_mean();
    let mut gamma = DVector::zeros(n);
    for (row, w) in zc.iter().enumerate() {
        for j in 0..n {
            gamma[j] += (prod[(row, j)] - mean[j]) * w;
        }
    }
    gamma /= m;
    let warn = if zc.iter().all(|w| *w == 0.0) { Some(Warning::WeakInstrument) } else { None };
    Ok((gamma, warn))
}

/// Lag matrices implied by `C_1..C_p`: `A_i = C_i - sum_{l<i} A_l C_{i-l}`.
pub fn backward_recursion(c: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let mut a: Vec<DMatrix<f64>> = Vec::with_capacity(c.len());
    for i in 1..=c.len() {
        let mut ai = c[i - 1].clone();
        for l in 1..i {
            ai -= &a[l - 1] * &c[i - l - 1];
        }
        a.push(ai);
    }
    a
}

/// `C_0..C_H` of the VAR with the given lag matrices.
pub fn irf_from_lags(lags: &[DMatrix<f64>], n: usize, horizon: usize) -> Vec<DMatrix<f64>> {
    let mut c = Vec::with_capacity(horizon + 1);
    c.push(DMatrix::identity(n, n));
    for h in 1..=horizon {
        let mut ch = DMatrix::zeros(n, n);
        for (l, a) in lags.iter().enumerate().take(h) {
            ch += a * &c[h - l - 1];
        }
        c.push(ch);
    }
    c
}

/// `C_0..C_H2`: `C_0 = I`, the supplied `C_1..C_H1`, then the recursion on `a_br`.
pub fn extend_irf(a_br: &[DMatrix<f64>], c: &[DMatrix<f64>], h2: usize) -> Vec<DMatrix<f64>> {
    let n = a_br
        .first()
        .or_else(|| c.first())
        .map(|m| m.nrows())
        .unwrap_or(0);
    let mut out = Vec::with_capacity(h2.max(c.len()) + 1);
    out.push(DMatrix::identity(n, n));
    out.extend(c.iter().cloned());
    for h in (c.len() + 1)..=h2 {
        let mut ch = DMatrix::zeros(n, n);
        for (l, a) in a_br.iter().enumerate().take(h) {
            ch += a * &out[h - l - 1];
        }
        out.push(ch);
    }
    out
}

/// Runs the backward recursion on the first `lags` responses of `theta` and
/// extends to `h2`.
pub fn irf_from_theta(theta: &ThetaVector, lags: usize, h2: usize) -> IrfBundle {
    let a_br = backward_recursion(&theta.c[..lags.min(theta.c.len())]);
    let c_full = extend_irf(&a_br, &theta.c, h2);
    IrfBundle { c_full, a_br, psi: None }
}

/// Full point estimation: residuals, `Sigma`, `C_1..C_H1`, `gamma`, and the
/// extended reduced-form responses.
pub fn estimate_theta(panel: &Panel, z: &[f64], spec: &DesignSpec, shock: usize) -> Result<LpEstimate> {
    let residuals = estimate_residuals(panel, spec)?;
    let sigma = estimate_sigma(&residuals)?;
    let c = (1..=spec.h1)
        .into_par_iter()
        .map(|h| estimate_c(&residuals, h))
        .collect::<Result<Vec<_>>>()?;
    let (gamma, warn) = estimate_gamma(&residuals, z, shock)?;
    let theta = ThetaVector { sigma, c, gamma };
    let irf = irf_from_theta(&theta, spec.lags, spec.h2);
    Ok(LpEstimate {
        theta,
        residuals,
        irf,
        spec: *spec,
        shock_index: shock,
        warnings: warn.into_iter().collect(),
    })
}
