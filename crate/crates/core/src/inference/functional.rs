//! Smooth maps from the parameter block to the quantities that get bands.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::DrawSet;
use crate::error::{Error, Result, Warning};
use crate::lp::{irf_from_theta, ThetaVector};
use crate::structural::{cholesky_impact, fevd, impact_vector, structural_irf, FevdForm, SignConvention};

/// Name of one output coordinate: a series and a horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coord {
    pub series: String,
    pub horizon: usize,
}

impl Coord {
    pub fn new(series: impl Into<String>, horizon: usize) -> Self {
        Coord { series: series.into(), horizon }
    }
}

pub trait Functional: Sync {
    fn coords(&self) -> Vec<Coord>;

    fn eval(&self, theta: &ThetaVector) -> Result<DVector<f64>>;

    fn len(&self) -> usize {
        self.coords().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Identification settings shared by the structural functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub lags: usize,
    pub sign: SignConvention,
    pub names: Vec<String>,
}

impl Identification {
    pub fn new(lags: usize, shock: usize, names: Vec<String>) -> Self {
        Identification { lags, sign: SignConvention::on(shock), names }
    }

    fn name(&self, i: usize) -> String {
        self.names.get(i).cloned().unwrap_or_else(|| format!("y{}", i + 1))
    }

    fn psi(&self, theta: &ThetaVector, h2: usize) -> Result<Vec<DVector<f64>>> {
        let b = impact_vector(&theta.gamma, &theta.sigma, self.sign)?;
        let irf = irf_from_theta(theta, self.lags, h2);
        Ok(structural_irf(&irf.c_full, &b.b))
    }
}

/// `psi_h[v]` for each requested variable `v` and `h = 0..=h2`, variable-major.
#[derive(Debug, Clone)]
pub struct StructuralIrf {
    pub id: Identification,
    pub variables: Vec<usize>,
    pub h2: usize,
}

impl Functional for StructuralIrf {
    fn coords(&self) -> Vec<Coord> {
        self.variables
            .iter()
            .flat_map(|&v| (0..=self.h2).map(move |h| (v, h)))
            .map(|(v, h)| Coord::new(self.id.name(v), h))
            .collect()
    }

    fn eval(&self, theta: &ThetaVector) -> Result<DVector<f64>> {
        let psi = self.id.psi(theta, self.h2)?;
        Ok(DVector::from_iterator(
            self.variables.len() * (self.h2 + 1),
            self.variables.iter().flat_map(|&v| psi.iter().map(move |p| p[v])),
        ))
    }
}

/// `C_h[row, col]` for `h = 0..=h2`.
#[derive(Debug, Clone)]
pub struct ReducedIrf {
    pub lags: usize,
    pub row: usize,
    pub col: usize,
    pub h2: usize,
}

impl Functional for ReducedIrf {
    fn coords(&self) -> Vec<Coord> {
        (0..=self.h2).map(|h| Coord::new(format!("C[{},{}]", self.row, self.col), h)).collect()
    }

    fn eval(&self, theta: &ThetaVector) -> Result<DVector<f64>> {
        let irf = irf_from_theta(theta, self.lags, self.h2);
        Ok(DVector::from_iterator(self.h2 + 1, irf.c_full.iter().map(|c| c[(self.row, self.col)])))
    }
}

/// Recursive impact minus the instrument-identified impact, one entry per variable.
#[derive(Debug, Clone)]
pub struct ImpactDifference {
    pub id: Identification,
    pub ordering: Vec<usize>,
}

impl Functional for ImpactDifference {
    fn coords(&self) -> Vec<Coord> {
        (0..self.ordering.len()).map(|i| Coord::new(self.id.name(i), 0)).collect()
    }

    fn eval(&self, theta: &ThetaVector) -> Result<DVector<f64>> {
        let het = impact_vector(&theta.gamma, &theta.sigma, self.id.sign)?;
        let chol = cholesky_impact(&theta.sigma, self.id.sign.variable, &self.ordering)?;
        Ok(chol.b - het.b)
    }
}

/// Share of the identified shock in one variable's forecast-error variance,
/// horizons `1..=max_h`.
#[derive(Debug, Clone)]
pub struct Fevd {
    pub id: Identification,
    pub variable: usize,
    pub max_h: usize,
    pub form: FevdForm,
}

impl Functional for Fevd {
    fn coords(&self) -> Vec<Coord> {
        (1..=self.max_h).map(|h| Coord::new(self.id.name(self.variable), h)).collect()
    }

    fn eval(&self, theta: &ThetaVector) -> Result<DVector<f64>> {
        let psi = self.id.psi(theta, self.max_h)?;
        let irf = irf_from_theta(theta, self.id.lags, self.max_h);
        let table = fevd(&psi, &irf.c_full, &theta.sigma, self.max_h, self.form)?;
        Ok(table.shares.row(self.variable).transpose())
    }
}

/// Raw entries of the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Coordinate {
    pub indices: Vec<usize>,
}

impl Functional for Coordinate {
    fn coords(&self) -> Vec<Coord> {
        self.indices.iter().map(|&i| Coord::new(format!("theta[{i}]"), 0)).collect()
    }

    fn eval(&self, theta: &ThetaVector) -> Result<DVector<f64>> {
        let flat = theta.to_flat();
        self.indices
            .iter()
            .map(|&i| {
                flat.get(i)
                    .copied()
                    .ok_or_else(|| Error::Invalid(format!("coordinate {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()
            .map(DVector::from_vec)
    }
}

/// A user-supplied map with its own coordinate labels.
pub struct FnFunctional<F> {
    pub coords: Vec<Coord>,
    pub f: F,
}

impl<F> Functional for FnFunctional<F>
where
    F: Fn(&ThetaVector) -> Result<DVector<f64>> + Sync,
{
    fn coords(&self) -> Vec<Coord> {
        self.coords.clone()
    }

    fn eval(&self, theta: &ThetaVector) -> Result<DVector<f64>> {
        (self.f)(theta)
    }
}

/// A functional evaluated at the estimate and at every usable draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDraws {
    pub coords: Vec<Coord>,
    pub center: Vec<f64>,
    /// One vector per kept draw.
    pub values: Vec<Vec<f64>>,
    pub dropped: usize,
}

impl FunctionalDraws {
    pub fn warnings(&self) -> Vec<Warning> {
        if self.dropped > 0 {
            vec![Warning::DroppedDraws { count: self.dropped }]
        } else {
            Vec::new()
        }
    }

    /// The coordinates in `range`, e.g. one variable out of a stacked response.
    pub fn subset(&self, range: std::ops::Range<usize>) -> FunctionalDraws {
        FunctionalDraws {
            coords: self.coords[range.clone()].to_vec(),
            center: self.center[range.clone()].to_vec(),
            values: self.values.iter().map(|v| v[range.clone()].to_vec()).collect(),
            dropped: self.dropped,
        }
    }

    /// Values of coordinate `j` across kept draws.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }
}

/// Evaluates `f` at the estimate and, in parallel, at each draw. Draws where
/// `f` fails or is non-finite are dropped and counted.
pub fn evaluate(draws: &DrawSet, f: &dyn Functional) -> Result<FunctionalDraws> {
    let center = f.eval(&draws.base)?;
    if center.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("functional is not finite at the point estimate".into()));
    }
    let results: Vec<Option<Vec<f64>>> = (0..draws.len())
        .into_par_iter()
        .map(|s| {
            let theta = draws.theta(s).ok()?;
            let v = f.eval(&theta).ok()?;
            (v.len() == center.len() && v.iter().all(|x| x.is_finite())).then(|| v.as_slice().to_vec())
        })
        .collect();
    let dropped = results.iter().filter(|r| r.is_none()).count();
    let values: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    if values.is_empty() {
        return Err(Error::Invalid("no bootstrap draw produced a finite functional".into()));
    }
    Ok(FunctionalDraws { coords: f.coords(), center: center.as_slice().to_vec(), values, dropped })
}
