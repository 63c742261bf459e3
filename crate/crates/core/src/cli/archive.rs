//! Self-describing JSON record of a run, reloadable for band recomputation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result, Warning};
use crate::inference::{ScorePanel, TestResult};
use crate::lp::{IrfBundle, ThetaVector};
use crate::pipeline::{BandTriple, StructuralEstimate};
use crate::smoother::MdSolution;
use crate::structural::{FevdTable, ImpactVector};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bandwidth: usize,
    pub score_rows: usize,
    /// Regression rows used at each horizon `0..=H1`.
    pub effective_rows: Vec<usize>,
    /// Square roots of the diagonal of the long-run covariance over the score
    /// rows, in the flat parameter order.
    pub hac_std_errors: Vec<f64>,
    pub warnings: Vec<Warning>,
}

/// Bands of one functional for one series, at each requested level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBands {
    pub functional: String,
    pub series: String,
    pub dropped_draws: usize,
    pub levels: Vec<BandTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub solution: MdSolution,
    pub psi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub ordering: Vec<String>,
    pub cholesky_impact: Vec<f64>,
    pub het_impact: Vec<f64>,
    pub test: TestResult,
    /// `(alpha, critical value)` of the sup-t statistic.
    pub critical_values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultArchive {
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub names: Vec<String>,
    pub first_date: Option<String>,
    pub t_len: usize,
    pub shock_index: usize,
    pub theta: ThetaVector,
    pub irf: IrfBundle,
    pub impact: ImpactVector,
    pub fevd: FevdTable,
    pub scores: ScorePanel,
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub bands: Vec<SeriesBands>,
    #[serde(default)]
    pub smoothing: Option<Smoothing>,
    #[serde(default)]
    pub comparison: Option<Comparison>,
}

impl ResultArchive {
    pub fn new(
        command: &str,
        config: &RunConfig,
        names: Vec<String>,
        first_date: Option<String>,
        est: &StructuralEstimate,
        diagnostics: Diagnostics,
    ) -> Self {
        ResultArchive {
            version: VERSION.to_string(),
            command: command.to_string(),
            config: config.clone(),
            names,
            first_date,
            t_len: est.lp.residuals.t_len,
            shock_index: est.lp.shock_index,
            theta: est.lp.theta.clone(),
            irf: est.lp.irf.clone(),
            impact: est.impact.clone(),
            fevd: est.fevd.clone(),
            scores: est.scores.clone(),
            diagnostics,
            bands: Vec::new(),
            smoothing: None,
            comparison: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read archive {}: {e}", path.display())))?;
        let a: ResultArchive = serde_json::from_str(&text)?;
        if a.scores.d() != a.theta.dim() {
            return Err(Error::Invalid("archive scores do not match its parameter vector".into()));
        }
        Ok(a)
    }
}
