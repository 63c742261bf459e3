//! End-to-end estimation: responses, identification, decomposition and scores
//! in one call, plus the bootstrap and band steps that follow it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, Warning};
use crate::inference::{
    bonferroni_bands, compute_scores, default_bandwidth, evaluate, pointwise_bands, supt_bands, wild_draws,
    BandSet, DrawSet, Functional, FunctionalDraws, ScoreForm, ScorePanel,
};
use crate::lp::{estimate_theta, LpEstimate};
use crate::numeric::{DesignSpec, Panel};
use crate::structural::{fevd, impact_vector, structural_irf, FevdForm, FevdTable, ImpactVector, SignConvention};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EstimationOptions {
    #[serde(default)]
    pub score_form: ScoreForm,
    #[serde(default)]
    pub fevd_form: FevdForm,
    /// Reverse the sign of the identified shock after normalisation.
    #[serde(default)]
    pub flip: bool,
}

#[derive(Debug, Clone)]
pub struct StructuralEstimate {
    pub lp: LpEstimate,
    pub impact: ImpactVector,
    pub psi: Vec<DVector<f64>>,
    pub fevd: FevdTable,
    pub scores: ScorePanel,
    pub sign: SignConvention,
    pub warnings: Vec<Warning>,
}

impl StructuralEstimate {
    /// Bandwidth of the rule applied to the sample length.
    pub fn default_bandwidth(&self) -> usize {
        default_bandwidth(self.lp.residuals.t_len)
    }
}

pub fn estimate(
    panel: &Panel,
    z: &[f64],
    spec: &DesignSpec,
    shock: usize,
    opts: &EstimationOptions,
) -> Result<StructuralEstimate> {
    let mut lp = estimate_theta(panel, z, spec, shock)?;
    let sign = SignConvention { variable: shock, flip: opts.flip };
    let impact = impact_vector(&lp.theta.gamma, &lp.theta.sigma, sign)?;
    let psi = structural_irf(&lp.irf.c_full, &impact.b);
    lp.irf.psi = Some(psi.clone());
    let fevd = fevd(&psi, &lp.irf.c_full, &lp.theta.sigma, spec.h2, opts.fevd_form)?;
    let scores = compute_scores(&lp.residuals, z, &lp.theta, shock, opts.score_form)?;
    let warnings = lp.warnings.clone();
    Ok(StructuralEstimate { lp, impact, psi, fevd, scores, sign, warnings })
}

/// Dependent wild bootstrap around the estimate; `bandwidth = None` uses the rule.
pub fn bootstrap(est: &StructuralEstimate, draws: usize, bandwidth: Option<usize>, seed: u64) -> Result<DrawSet> {
    let b = bandwidth.unwrap_or_else(|| est.default_bandwidth());
    wild_draws(&est.scores, &est.lp.theta, draws, b, seed)
}

/// The three band types for one functional at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTriple {
    pub pointwise: BandSet,
    pub supt: BandSet,
    pub bonferroni: BandSet,
}

pub fn band_triple(fd: &FunctionalDraws, alpha: f64) -> Result<BandTriple> {
    Ok(BandTriple {
        pointwise: pointwise_bands(fd, alpha)?,
        supt: supt_bands(fd, alpha)?,
        bonferroni: bonferroni_bands(fd, alpha)?,
    })
}

pub fn bands_for(draws: &DrawSet, f: &dyn Functional, alphas: &[f64]) -> Result<(FunctionalDraws, Vec<BandTriple>)> {
    let fd = evaluate(draws, f)?;
    let triples = alphas.iter().map(|a| band_triple(&fd, *a)).collect::<Result<Vec<_>>>()?;
    Ok((fd, triples))
}
