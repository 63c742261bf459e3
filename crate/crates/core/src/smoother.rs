//! Minimum-distance smoothing of local-projection responses: find lag matrices
//! `A_1..A_p` whose implied responses `C_1(A)..C_H1(A)` are closest to the
//! estimated ones in a diagonally weighted norm.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::inference::bands::spread;
use crate::inference::functional::{Coord, Functional, Identification};
use crate::inference::DrawSet;
use crate::lp::{backward_recursion, irf_from_lags, ThetaVector};
use crate::structural::{impact_vector, structural_irf};

/// Spread below which a coordinate's weight is capped.
pub const MIN_SPREAD: f64 = 1e-12;
pub const MAX_WEIGHT: f64 = 1e24;
pub const GRAD_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdProblem {
    pub n: usize,
    pub lags: usize,
    /// `vec(C_1), ..., vec(C_H1)`, column-major blocks.
    pub g_lp: DVector<f64>,
    pub weights: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdSolution {
    #[serde(with = "crate::serde_rows::vec")]
    pub a_md: Vec<DMatrix<f64>>,
    pub objective_value: f64,
    pub initial_objective: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl MdSolution {
    pub fn warnings(&self) -> Vec<Warning> {
        if self.converged {
            Vec::new()
        } else {
            vec![Warning::NonConvergence { iterations: self.iterations }]
        }
    }

    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { iterations: self.iterations })
        }
    }
}

pub fn stack_responses(c: &[DMatrix<f64>]) -> DVector<f64> {
    DVector::from_iterator(c.iter().map(|m| m.len()).sum(), c.iter().flat_map(|m| m.iter().copied()))
}

fn unstack(n: usize, v: &[f64]) -> Vec<DMatrix<f64>> {
    v.chunks(n * n).map(|c| DMatrix::from_column_slice(n, n, c)).collect()
}

impl MdProblem {
    pub fn new(c: &[DMatrix<f64>], weights: DVector<f64>, lags: usize) -> Result<Self> {
        let n = c.first().map(|m| m.nrows()).ok_or_else(|| Error::Invalid("no responses to smooth".into()))?;
        let g_lp = stack_responses(c);
        let p = MdProblem { n, lags, g_lp, weights };
        p.validate()?;
        Ok(p)
    }

    pub fn h1(&self) -> usize {
        self.g_lp.len() / (self.n * self.n)
    }

    pub fn validate(&self) -> Result<()> {
        let nn = self.n * self.n;
        if nn == 0 || !self.g_lp.len().is_multiple_of(nn) {
            return Err(Error::Invalid("stacked responses do not match the dimension".into()));
        }
        if self.weights.len() != self.g_lp.len() {
            return Err(Error::Invalid("weights and responses differ in length".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid("weights must be positive and finite".into()));
        }
        if self.lags == 0 || self.h1() < self.lags {
            return Err(Error::Invalid(format!(
                "need 1 <= lags <= H1, got lags {} and H1 {}",
                self.lags,
                self.h1()
            )));
        }
        Ok(())
    }

    pub fn implied(&self, a: &[DMatrix<f64>]) -> DVector<f64> {
        stack_responses(&irf_from_lags(a, self.n, self.h1())[1..])
    }

    pub fn objective(&self, a: &[DMatrix<f64>]) -> f64 {
        let r = self.implied(a) - &self.g_lp;
        r.iter().zip(self.weights.iter()).map(|(x, w)| w * x * x).sum()
    }

    /// Derivative of the stacked responses with respect to `vec(A_1), ..., vec(A_p)`.
    pub fn jacobian(&self, a: &[DMatrix<f64>]) -> DMatrix<f64> {
        let n = self.n;
        let h1 = self.h1();
        let c = irf_from_lags(a, n, h1);
        let params = n * n * self.lags;
        let cols: Vec<Vec<f64>> = (0..params)
            .into_par_iter()
            .map(|q| {
                let k = q / (n * n) + 1;
                let (i, j) = ((q % (n * n)) % n, (q % (n * n)) / n);
                let mut dc: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n)];
                for h in 1..=h1 {
                    let mut m = DMatrix::zeros(n, n);
                    if h >= k {
                        m.row_mut(i).copy_from(&c[h - k].row(j));
                    }
                    for (l, al) in a.iter().enumerate().take(h) {
                        m += al * &dc[h - l - 1];
                    }
                    dc.push(m);
                }
                dc[1..].iter().flat_map(|m| m.iter().copied()).collect()
            })
            .collect();
        DMatrix::from_iterator(n * n * h1, params, cols.into_iter().flatten())
    }

    /// Gradient tolerance: the objective scales with the weights, so the
    /// absolute tolerance is applied relative to their average size.
    fn tolerance(&self) -> f64 {
        GRAD_TOL * self.weights.mean().max(1.0)
    }
}

fn flatten(a: &[DMatrix<f64>]) -> DVector<f64> {
    stack_responses(a)
}

/// Gauss-Newton with Levenberg-Marquardt damping when a full step fails to
/// reduce the objective. Starts from the backward recursion on `C_1..C_p`
/// unless `init` is given. A run that stops without meeting the gradient
/// tolerance returns its best iterate with `converged = false`.
pub fn fit_md(problem: &MdProblem, init: Option<&[DMatrix<f64>]>) -> Result<MdSolution> {
    problem.validate()?;
    let n = problem.n;
    let nn = n * n;
    let mut a: Vec<DMatrix<f64>> = match init {
        Some(a0) if a0.len() == problem.lags => a0.to_vec(),
        Some(_) => return Err(Error::Invalid("initial lag matrices do not match the lag order".into())),
        None => backward_recursion(&unstack(n, &problem.g_lp.as_slice()[..nn * problem.lags])),
    };
    let tol = problem.tolerance();
    let w = &problem.weights;
    let mut f = problem.objective(&a);
    let initial_objective = f;
    let mut lambda = 0.0;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    while iterations < MAX_ITER {
        let r = problem.implied(&a) - &problem.g_lp;
        let j = problem.jacobian(&a);
        let wj = DMatrix::from_fn(j.nrows(), j.ncols(), |i, k| w[i] * j[(i, k)]);
        let grad = 2.0 * (wj.transpose() * &r);
        grad_norm = grad.amax();
        if grad_norm < tol || f == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jtwj = j.transpose() * &wj;
        let rhs = -(wj.transpose() * &r);
        let diag = jtwj.diagonal().map(|d| d.max(1e-12));
        let mut improved = false;
        for _ in 0..40 {
            let mut lhs = jtwj.clone();
            for k in 0..lhs.nrows() {
                lhs[(k, k)] += lambda * diag[k];
            }
            let step = match lhs.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => {
                    lambda = (lambda * 10.0).max(1e-6);
                    continue;
                }
            };
            let cand_flat = flatten(&a) + &step;
            let cand = unstack(n, cand_flat.as_slice());
            let fc = problem.objective(&cand);
            if fc.is_finite() && fc <= f {
                let small = step.amax() <= 1e-15 * (1.0 + cand_flat.amax());
                a = cand;
                f = fc;
                lambda /= 10.0;
                if lambda < 1e-12 {
                    lambda = 0.0;
                }
                improved = !small;
                break;
            }
            lambda = (lambda * 10.0).max(1e-6);
        }
        if !improved {
            // no descent possible at machine precision: accept the point if the
            // gradient is small relative to the objective
            let r = problem.implied(&a) - &problem.g_lp;
            let j = problem.jacobian(&a);
            let g = j.transpose() * r.component_mul(w) * 2.0;
            grad_norm = g.amax();
            converged = grad_norm < tol;
            break;
        }
    }
    Ok(MdSolution { a_md: a, objective_value: f, initial_objective, gradient_norm: grad_norm, converged, iterations })
}

/// `1 / sigma_j^2` over the response coordinates of the draws, with near-zero
/// spreads capped at `MAX_WEIGHT`.
pub fn md_weights(draws: &DrawSet) -> (DVector<f64>, Vec<Warning>) {
    let n = draws.base.n();
    let h1 = draws.base.h1();
    let start = ThetaVector::c_offset(n, 1);
    let len = n * n * h1;
    let mut warnings = Vec::new();
    let weights = DVector::from_iterator(
        len,
        (0..len).map(|k| {
            let col: Vec<f64> = draws.draws.column(start + k).iter().copied().collect();
            let s = spread(&col);
            if s < MIN_SPREAD {
                warnings.push(Warning::DegenerateWeight { coordinate: start + k });
                MAX_WEIGHT
            } else {
                (1.0 / (s * s)).min(MAX_WEIGHT)
            }
        }),
    );
    (weights, warnings)
}

/// `C^MD_0..C^MD_H2` from the fitted lag matrices.
pub fn smoothed_irf(a_md: &[DMatrix<f64>], n: usize, h2: usize) -> Vec<DMatrix<f64>> {
    irf_from_lags(a_md, n, h2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    /// Re-solve the problem for every draw, warm-started at the point solution.
    #[default]
    Refit,
    /// One Gauss-Newton step from the point solution.
    Linearized,
}

/// Smoothed structural responses as a functional of the parameter block.
pub struct SmoothedIrf {
    pub id: Identification,
    pub variables: Vec<usize>,
    pub h2: usize,
    pub weights: DVector<f64>,
    pub point: MdSolution,
    pub mode: DrawMode,
    /// `(J'WJ)^{-1} J'W` at the point solution, used by `DrawMode::Linearized`.
    gain: Option<DMatrix<f64>>,
    g_point: DVector<f64>,
}

impl SmoothedIrf {
    pub fn new(
        id: Identification,
        variables: Vec<usize>,
        h2: usize,
        theta: &ThetaVector,
        weights: DVector<f64>,
        mode: DrawMode,
    ) -> Result<Self> {
        let problem = MdProblem::new(&theta.c, weights.clone(), id.lags)?;
        let point = fit_md(&problem, None)?;
        let gain = match mode {
            DrawMode::Refit => None,
            DrawMode::Linearized => {
                let j = problem.jacobian(&point.a_md);
                let wj = DMatrix::from_fn(j.nrows(), j.ncols(), |i, k| weights[i] * j[(i, k)]);
                let chol = (j.transpose() * &wj)
                    .cholesky()
                    .ok_or_else(|| Error::singular("minimum distance normal matrix"))?;
                Some(chol.solve(&wj.transpose()))
            }
        };
        Ok(SmoothedIrf { id, variables, h2, weights, point, mode, gain, g_point: problem.g_lp })
    }

    pub fn lags_for(&self, theta: &ThetaVector) -> Result<Vec<DMatrix<f64>>> {
        let n = theta.n();
        match &self.gain {
            Some(gain) => {
                let delta = gain * (stack_responses(&theta.c) - &self.g_point);
                let a = flatten(&self.point.a_md) + delta;
                Ok(unstack(n, a.as_slice()))
            }
            None => {
                let problem = MdProblem {
                    n,
                    lags: self.id.lags,
                    g_lp: stack_responses(&theta.c),
                    weights: self.weights.clone(),
                };
                Ok(fit_md(&problem, Some(&self.point.a_md))?.a_md)
            }
        }
    }
}

impl Functional for SmoothedIrf {
    fn coords(&self) -> Vec<Coord> {
        self.variables
            .iter()
            .flat_map(|&v| (0..=self.h2).map(move |h| (v, h)))
            .map(|(v, h)| Coord::new(self.id.names.get(v).cloned().unwrap_or_else(|| format!("y{}", v + 1)), h))
            .collect()
    }

    fn eval(&self, theta: &ThetaVector) -> Result<DVector<f64>> {
        let a = self.lags_for(theta)?;
        let c = smoothed_irf(&a, theta.n(), self.h2);
        let b = impact_vector(&theta.gamma, &theta.sigma, self.id.sign)?;
        let psi = structural_irf(&c, &b.b);
        Ok(DVector::from_iterator(
            self.variables.len() * (self.h2 + 1),
            self.variables.iter().flat_map(|&v| psi.iter().map(move |p| p[v])),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var2() -> Vec<DMatrix<f64>> {
        vec![
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.3]),
            DMatrix::from_row_slice(2, 2, &[-0.2, 0.05, 0.0, 0.1]),
        ]
    }

    #[test]
    fn exactly_identified_case_has_zero_objective() {
        let a = var2();
        let c = irf_from_lags(&a, 2, 2);
        let p = MdProblem::new(&c[1..], DVector::from_element(8, 3.0), 2).unwrap();
        let sol = fit_md(&p, None).unwrap();
        assert!(sol.objective_value < 1e-12);
        assert!(sol.converged);
        let br = backward_recursion(&c[1..]);
        for (x, y) in sol.a_md.iter().zip(&br) {
            assert!((x - y).amax() < 1e-12);
        }
    }

    #[test]
    fn noiseless_roundtrip_recovers_lags() {
        let a = var2();
        let c = irf_from_lags(&a, 2, 8);
        let p = MdProblem::new(&c[1..], DVector::from_element(32, 1.0), 2).unwrap();
        // start away from the truth to exercise the iterations
        let init = vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)];
        let sol = fit_md(&p, Some(&init)).unwrap();
        assert!(sol.converged);
        for (x, y) in sol.a_md.iter().zip(&a) {
            assert!((x - y).amax() < 1e-8);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let a = var2();
        let c = irf_from_lags(&a, 2, 5);
        let p = MdProblem::new(&c[1..], DVector::from_element(20, 1.0), 2).unwrap();
        let j = p.jacobian(&a);
        let base = flatten(&a);
        for q in 0..8 {
            let eps = 1e-6;
            let mut up = base.clone();
            up[q] += eps;
            let mut dn = base.clone();
            dn[q] -= eps;
            let fd = (p.implied(&unstack(2, up.as_slice())) - p.implied(&unstack(2, dn.as_slice()))) / (2.0 * eps);
            assert!((fd - j.column(q)).amax() < 1e-7);
        }
    }

    #[test]
    fn scalar_fit_matches_grid_search() {
        // C_h for an AR(1) at phi is phi^h; perturbed targets
        let g = [0.62, 0.35, 0.25, 0.11];
        let w = [1.0, 2.0, 0.5, 3.0];
        let c: Vec<DMatrix<f64>> = g.iter().map(|v| DMatrix::from_element(1, 1, *v)).collect();
        let p = MdProblem::new(&c, DVector::from_row_slice(&w), 1).unwrap();
        let sol = fit_md(&p, None).unwrap();
        let obj = |phi: f64| -> f64 {
            g.iter().zip(&w).enumerate().map(|(h, (gh, wh))| wh * (phi.powi(h as i32 + 1) - gh).powi(2)).sum()
        };
        // golden-section search on [-1, 1]
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = hi - r * (hi - lo);
            let x2 = lo + r * (hi - lo);
            if obj(x1) < obj(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let best = obj((lo + hi) / 2.0);
        assert!((sol.objective_value - best).abs() < 1e-6);
        assert!(sol.objective_value <= sol.initial_objective);
    }

    #[test]
    fn smoothing_is_idempotent() {
        let a = var2();
        let c = irf_from_lags(&a, 2, 6);
        let mut g = stack_responses(&c[1..]);
        for (k, v) in g.iter_mut().enumerate() {
            *v += 0.01 * ((k * 37 % 11) as f64 - 5.0);
        }
        let p = MdProblem { n: 2, lags: 2, g_lp: g, weights: DVector::from_element(24, 1.0) };
        let sol = fit_md(&p, None).unwrap();
        let cm = smoothed_irf(&sol.a_md, 2, 6);
        let p2 = MdProblem::new(&cm[1..], p.weights.clone(), 2).unwrap();
        let sol2 = fit_md(&p2, None).unwrap();
        for (x, y) in sol.a_md.iter().zip(&sol2.a_md) {
            assert!((x - y).amax() < 1e-10);
        }
    }

    #[test]
    fn zero_lags_give_zero_responses() {
        let c = smoothed_irf(&[DMatrix::zeros(3, 3)], 3, 5);
        assert!(c[1..].iter().all(|m| m.amax() == 0.0));
    }

    #[test]
    fn invalid_problems() {
        let c = vec![DMatrix::identity(2, 2)];
        assert!(MdProblem::new(&c, DVector::from_element(4, 1.0), 2).is_err());
        assert!(MdProblem::new(&c, DVector::from_element(4, 0.0), 1).is_err());
        assert!(MdProblem::new(&c, DVector::from_element(3, 1.0), 1).is_err());
    }

    #[test]
    fn weights_scale_with_spread() {
        use crate::inference::DrawSet;
        let theta = ThetaVector {
            sigma: DMatrix::identity(1, 1),
            c: vec![DMatrix::from_element(1, 1, 0.5); 2],
            gamma: DVector::from_element(1, 1.0),
        };
        let s = 400;
        let mk = |scale: f64| DrawSet {
            draws: DMatrix::from_fn(s, 4, |r, c| if c == 2 { 0.5 } else { scale * ((r as f64 / s as f64) - 0.5) }),
            base: theta.clone(),
            seed: 0,
            bandwidth: 1,
            rows: 10,
        };
        let (w1, warn1) = md_weights(&mk(1.0));
        let (w2, _) = md_weights(&mk(2.0));
        assert!((w1[0] / w2[0] - 4.0).abs() < 1e-9);
        assert_eq!(w1[1], MAX_WEIGHT);
        assert_eq!(warn1, vec![Warning::DegenerateWeight { coordinate: 2 }]);
    }
}
