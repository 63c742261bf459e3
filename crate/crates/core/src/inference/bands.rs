//! Point-wise, sup-t and Bonferroni bands from bootstrap draws of a functional,
//! and the sup-t test of a hypothesised path.
//!
//! Quantiles use the nearest-rank rule on sorted values: the `p` quantile of
//! `S` values is the `ceil(p S)`-th smallest.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::functional::{Coord, FunctionalDraws};
use crate::error::{Error, Result};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `Phi(1)`, the upper end of the one-standard-deviation interquantile range.
pub fn phi_one() -> f64 {
    std_normal().cdf(1.0)
}

/// Two-sided normal critical value `z_{1-alpha/2}`.
pub fn normal_cv(alpha: f64) -> f64 {
    std_normal().inverse_cdf(1.0 - alpha / 2.0)
}

/// Nearest-rank quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let s = sorted.len();
    // tolerance so that p*S landing a hair above an integer does not skip a rank
    let rank = ((p * s as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(s) - 1]
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Half the `(1-Phi(1), Phi(1))` interquantile range: a robust standard error.
pub fn spread(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let p = phi_one();
    (quantile_sorted(&v, p) - quantile_sorted(&v, 1.0 - p)) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    Pointwise,
    Supt,
    Bonferroni,
}

impl BandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BandKind::Pointwise => "pointwise",
            BandKind::Supt => "supt",
            BandKind::Bonferroni => "bonferroni",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    pub kind: BandKind,
    pub alpha: f64,
    pub coords: Vec<Coord>,
    pub center: Vec<f64>,
    pub sigma: Vec<f64>,
    pub half_width: Vec<f64>,
    /// Multiplier of `sigma` giving the half-width.
    pub critical_value: f64,
}

impl BandSet {
    pub fn lower(&self, j: usize) -> f64 {
        self.center[j] - self.half_width[j]
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.center[j] + self.half_width[j]
    }

    /// True when every coordinate of `path` lies inside the band.
    pub fn covers(&self, path: &[f64]) -> bool {
        path.iter().enumerate().all(|(j, v)| self.lower(j) <= *v && *v <= self.upper(j))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

pub fn spreads(fd: &FunctionalDraws) -> Vec<f64> {
    (0..fd.center.len()).map(|j| spread(&fd.column(j))).collect()
}

fn require_spread(sigma: &[f64]) -> Result<()> {
    match sigma.iter().position(|s| s.is_nan() || *s <= 0.0) {
        Some(index) => Err(Error::ZeroSpread { index }),
        None => Ok(()),
    }
}

/// Standardised absolute deviations `|f(theta^s) - f(theta)| / sigma`, per draw and coordinate.
fn standardized(fd: &FunctionalDraws, sigma: &[f64]) -> Vec<Vec<f64>> {
    fd.values
        .iter()
        .map(|v| {
            v.iter()
                .zip(&fd.center)
                .zip(sigma)
                .map(|((x, c), s)| (x - c).abs() / s)
                .collect()
        })
        .collect()
}

fn band(kind: BandKind, alpha: f64, fd: &FunctionalDraws, sigma: Vec<f64>, cv: f64) -> BandSet {
    let half_width = sigma.iter().map(|s| s * cv).collect();
    BandSet { kind, alpha, coords: fd.coords.clone(), center: fd.center.clone(), sigma, half_width, critical_value: cv }
}

/// `f(theta) +- z_{1-alpha/2} sigma_h`.
pub fn pointwise_bands(fd: &FunctionalDraws, alpha: f64) -> Result<BandSet> {
    check_alpha(alpha)?;
    Ok(band(BandKind::Pointwise, alpha, fd, spreads(fd), normal_cv(alpha)))
}

/// The `1-alpha` quantile of the maximum standardised deviation.
pub fn supt_cv(fd: &FunctionalDraws, sigma: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    require_spread(sigma)?;
    let maxes: Vec<f64> = standardized(fd, sigma)
        .into_iter()
        .map(|r| r.into_iter().fold(0.0, f64::max))
        .collect();
    Ok(quantile(&maxes, 1.0 - alpha))
}

pub fn supt_bands(fd: &FunctionalDraws, alpha: f64) -> Result<BandSet> {
    let sigma = spreads(fd);
    let cv = supt_cv(fd, &sigma, alpha)?;
    Ok(band(BandKind::Supt, alpha, fd, sigma, cv))
}

/// Per-coordinate `1-level` quantiles of the standardised deviations.
fn marginal_cvs(fd: &FunctionalDraws, sigma: &[f64], level: f64) -> Vec<f64> {
    let z = standardized(fd, sigma);
    (0..sigma.len())
        .map(|j| quantile(&z.iter().map(|r| r[j]).collect::<Vec<_>>(), 1.0 - level))
        .collect()
}

/// The empirical point-wise critical values at `alpha`, one per coordinate.
pub fn pointwise_cvs(fd: &FunctionalDraws, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let sigma = spreads(fd);
    require_spread(&sigma)?;
    Ok(marginal_cvs(fd, &sigma, alpha))
}

/// Bonferroni band: each coordinate's critical value is taken at level
/// `alpha / H`, and the band uses the largest of them for every coordinate, so
/// it contains the sup-t band on the same draws.
pub fn bonferroni_bands(fd: &FunctionalDraws, alpha: f64) -> Result<BandSet> {
    check_alpha(alpha)?;
    let sigma = spreads(fd);
    require_spread(&sigma)?;
    let h = sigma.len() as f64;
    let cv = marginal_cvs(fd, &sigma, alpha / h).into_iter().fold(0.0, f64::max);
    Ok(band(BandKind::Bonferroni, alpha, fd, sigma, cv))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `max_h |f_h(theta) - null_h| / sigma_h` against the bootstrap distribution
/// of the maximum standardised deviation.
pub fn supt_test(fd: &FunctionalDraws, null: &[f64]) -> Result<TestResult> {
    if null.len() != fd.center.len() {
        return Err(Error::Invalid("null path length does not match the functional".into()));
    }
    let sigma = spreads(fd);
    require_spread(&sigma)?;
    let statistic = fd
        .center
        .iter()
        .zip(null)
        .zip(&sigma)
        .map(|((c, n), s)| (c - n).abs() / s)
        .fold(0.0, f64::max);
    let maxes = standardized(fd, &sigma).into_iter().map(|r| r.into_iter().fold(0.0, f64::max));
    let exceed = maxes.filter(|x| *x >= statistic).count();
    Ok(TestResult { statistic, p_value: exceed as f64 / fd.values.len() as f64 })
}

/// One-sided test of `f_j(theta) <= null` against `f_j(theta) > null` for coordinate `j`.
pub fn one_sided_test(fd: &FunctionalDraws, j: usize, null: f64) -> Result<TestResult> {
    if j >= fd.center.len() {
        return Err(Error::Invalid(format!("coordinate {j} out of range")));
    }
    let col = fd.column(j);
    let s = spread(&col);
    if s.is_nan() || s <= 0.0 {
        return Err(Error::ZeroSpread { index: j });
    }
    let statistic = (fd.center[j] - null) / s;
    let exceed = col.iter().filter(|x| (*x - fd.center[j]) / s >= statistic).count();
    Ok(TestResult { statistic, p_value: exceed as f64 / col.len() as f64 })
}
