//! From reduced-form estimates to the structural shock of interest: impact
//! vector, structural responses, variance decomposition, and the recursive
//! (Cholesky) impact used as a comparator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{check_positive_definite, symmetrize};

/// Below this norm the instrument covariance vector is treated as zero.
pub const ZERO_GAMMA_TOL: f64 = 1e-14;

/// Which variable's impact is made non-negative, and whether to flip afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SignConvention {
    pub variable: usize,
    pub flip: bool,
}

impl SignConvention {
    pub fn on(variable: usize) -> Self {
        SignConvention { variable, flip: false }
    }

    fn apply(&self, b: &mut DVector<f64>) {
        if b[self.variable] < 0.0 {
            b.neg_mut();
        }
        if self.flip {
            b.neg_mut();
        }
    }
}

/// Contemporaneous effect of a one-standard-deviation structural shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactVector {
    pub b: DVector<f64>,
    /// `b' Sigma^{-1} b`; equals one up to rounding.
    pub normalization_check: f64,
}

fn inverse_quadratic(sigma: &DMatrix<f64>, v: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let mut s = sigma.clone();
    symmetrize(&mut s);
    check_positive_definite(&s, "innovation covariance")?;
    let chol = s.cholesky().ok_or_else(|| Error::singular("innovation covariance"))?;
    let w = chol.solve(v);
    Ok((v.dot(&w), w))
}

/// `b = gamma / sqrt(gamma' Sigma^{-1} gamma)`, sign-normalised.
pub fn impact_vector(
    gamma: &DVector<f64>,
    sigma: &DMatrix<f64>,
    sign: SignConvention,
) -> Result<ImpactVector> {
    if gamma.norm() < ZERO_GAMMA_TOL {
        return Err(Error::ZeroGamma);
    }
    if sign.variable >= gamma.len() {
        return Err(Error::Invalid("sign variable out of range".into()));
    }
    let (q, _) = inverse_quadratic(sigma, gamma)?;
    if q.is_nan() || q <= 0.0 {
        return Err(Error::singular("non-positive quadratic form in impact normalisation"));
    }
    let mut b = gamma / q.sqrt();
    sign.apply(&mut b);
    let (check, _) = inverse_quadratic(sigma, &b)?;
    Ok(ImpactVector { b, normalization_check: check })
}

/// `psi_h = C_h b` for every supplied horizon.
pub fn structural_irf(c_full: &[DMatrix<f64>], b: &DVector<f64>) -> Vec<DVector<f64>> {
    c_full.iter().map(|c| c * b).collect()
}

/// How the forecast-error variance in the denominator is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FevdForm {
    /// `sum_{h<H} e_r' C_h Sigma C_h' e_r`.
    #[default]
    Standard,
    /// `sum_{h<=H} e_r' C_h Sigma C_h' iota` with `iota` a vector of ones; kept
    /// for comparison only, it is not a variance.
    Literal,
}

/// `shares[(r, H-1)]`: share of variable `r`'s `H`-step forecast-error variance
/// due to the identified shock, for `H = 1..=max_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FevdTable {
    #[serde(with = "crate::serde_rows")]
    pub shares: DMatrix<f64>,
}

impl FevdTable {
    pub fn share(&self, variable: usize, horizon: usize) -> f64 {
        self.shares[(variable, horizon - 1)]
    }

    pub fn max_horizon(&self) -> usize {
        self.shares.ncols()
    }
}

pub fn fevd(
    psi: &[DVector<f64>],
    c_full: &[DMatrix<f64>],
    sigma: &DMatrix<f64>,
    max_h: usize,
    form: FevdForm,
) -> Result<FevdTable> {
    if max_h == 0 {
        return Err(Error::Invalid("FEVD horizon must be at least 1".into()));
    }
    let need = match form {
        FevdForm::Standard => max_h,
        FevdForm::Literal => max_h + 1,
    };
    if psi.len() < max_h || c_full.len() < need {
        return Err(Error::Invalid(format!("responses do not reach horizon {max_h}")));
    }
    let n = sigma.nrows();
    let ones = DVector::from_element(n, 1.0);
    // per-horizon contributions
    let num: Vec<DVector<f64>> = psi[..max_h].iter().map(|p| p.map(|v| v * v)).collect();
    let den: Vec<DVector<f64>> = c_full[..need]
        .iter()
        .map(|c| {
            let m = c * sigma * c.transpose();
            match form {
                FevdForm::Standard => m.diagonal(),
                FevdForm::Literal => m * &ones,
            }
        })
        .collect();
    let mut shares = DMatrix::zeros(n, max_h);
    let mut acc_num = DVector::zeros(n);
    let mut acc_den = DVector::zeros(n);
    for hh in 1..=max_h {
        acc_num += &num[hh - 1];
        acc_den += &den[hh - 1];
        let mut d = acc_den.clone();
        if form == FevdForm::Literal {
            d += &den[hh];
        }
        for r in 0..n {
            shares[(r, hh - 1)] = if d[r] != 0.0 { acc_num[r] / d[r] } else { 0.0 };
        }
    }
    Ok(FevdTable { shares })
}

/// Column `shock` of the lower Cholesky factor of `Sigma` with variables taken
/// in `ordering`, mapped back to the original variable order.
pub fn cholesky_impact(sigma: &DMatrix<f64>, shock: usize, ordering: &[usize]) -> Result<ImpactVector> {
    let n = sigma.nrows();
    let mut seen = vec![false; n];
    if ordering.len() != n || ordering.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::Invalid("ordering must be a permutation of the variables".into()));
    }
    if shock >= n {
        return Err(Error::Invalid("shock index out of range".into()));
    }
    let mut permuted = DMatrix::from_fn(n, n, |i, j| sigma[(ordering[i], ordering[j])]);
    symmetrize(&mut permuted);
    check_positive_definite(&permuted, "innovation covariance")?;
    let l = permuted
        .cholesky()
        .ok_or_else(|| Error::singular("innovation covariance"))?
        .unpack();
    let pos = ordering.iter().position(|&i| i == shock).expect("validated permutation");
    let mut b = DVector::zeros(n);
    for (k, &orig) in ordering.iter().enumerate() {
        b[orig] = l[(k, pos)];
    }
    let (check, _) = inverse_quadratic(sigma, &b)?;
    Ok(ImpactVector { b, normalization_check: check })
}
