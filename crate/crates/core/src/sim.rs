//! Synthetic VAR panels with polynomial trends, unit roots, a structural impact
//! matrix and two-state Markov-switching shock volatility, together with the
//! exact population responses used as the reference in tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{irf_from_lags, IrfBundle, ThetaVector};
use crate::numeric::Panel;
use crate::serde_rows;

pub const DEFAULT_BURN_IN: usize = 500;

/// Largest admissible companion-matrix eigenvalue modulus.
pub const ROOT_TOL: f64 = 1e-12;

/// How the instrument is generated from the volatility regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InstrumentRule {
    /// `Z_t = 1` in the high-volatility regime, `0` otherwise.
    RegimeIndicator,
    /// `Z_t ~ Binomial(4, prob[regime])`, a stand-in for meeting counts.
    Counts { prob: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolatilityProcess {
    /// Unit shock volatility; the instrument is an independent fair coin.
    Constant,
    /// Two regimes; `multipliers[j]` holds the standard-deviation factor of
    /// shock `j` in regime 0 and regime 1.
    Markov2 {
        stay_prob: [f64; 2],
        multipliers: Vec<[f64; 2]>,
        instrument: InstrumentRule,
    },
}

impl VolatilityProcess {
    /// The symmetric design with a fourfold standard deviation on one shock.
    pub fn fourfold(n: usize, shock: usize, stay: f64) -> Self {
        let multipliers = (0..n).map(|j| if j == shock { [1.0, 4.0] } else { [1.0, 1.0] }).collect();
        VolatilityProcess::Markov2 {
            stay_prob: [stay, stay],
            multipliers,
            instrument: InstrumentRule::RegimeIndicator,
        }
    }

    fn stationary_high(&self) -> f64 {
        match self {
            VolatilityProcess::Constant => 0.0,
            VolatilityProcess::Markov2 { stay_prob, .. } => {
                let (l0, l1) = (1.0 - stay_prob[0], 1.0 - stay_prob[1]);
                l0 / (l0 + l1)
            }
        }
    }

    /// `E sigma_j^2` under the stationary regime distribution.
    pub fn mean_variance(&self, n: usize) -> Vec<f64> {
        match self {
            VolatilityProcess::Constant => vec![1.0; n],
            VolatilityProcess::Markov2 { multipliers, .. } => {
                let p1 = self.stationary_high();
                multipliers
                    .iter()
                    .map(|m| (1.0 - p1) * m[0] * m[0] + p1 * m[1] * m[1])
                    .collect()
            }
        }
    }

    /// `Cov(sigma_j^2, Z_t)` under the stationary regime distribution.
    pub fn variance_instrument_cov(&self, n: usize) -> Vec<f64> {
        match self {
            VolatilityProcess::Constant => vec![0.0; n],
            VolatilityProcess::Markov2 { multipliers, instrument, .. } => {
                let p1 = self.stationary_high();
                let ez = match instrument {
                    InstrumentRule::RegimeIndicator => [0.0, 1.0],
                    InstrumentRule::Counts { prob } => [4.0 * prob[0], 4.0 * prob[1]],
                };
                let mean_z = (1.0 - p1) * ez[0] + p1 * ez[1];
                multipliers
                    .iter()
                    .map(|m| {
                        let v = [m[0] * m[0], m[1] * m[1]];
                        let mean_v = (1.0 - p1) * v[0] + p1 * v[1];
                        (1.0 - p1) * v[0] * ez[0] + p1 * v[1] * ez[1] - mean_v * mean_z
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let VolatilityProcess::Markov2 { stay_prob, multipliers, instrument } = self {
            if stay_prob.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                return Err(Error::Invalid("stay probabilities must lie in (0, 1)".into()));
            }
            if multipliers.len() != n {
                return Err(Error::Invalid(format!(
                    "{} volatility multipliers for {n} shocks",
                    multipliers.len()
                )));
            }
            if multipliers.iter().flatten().any(|m| !(*m > 0.0 && m.is_finite())) {
                return Err(Error::Invalid("volatility multipliers must be positive".into()));
            }
            if let InstrumentRule::Counts { prob } = instrument {
                if prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::Invalid("count probabilities must lie in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Gaussian,
    /// Student-t rescaled to unit variance; requires more than 2 degrees of freedom.
    StudentT { dof: f64 },
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_horizon() -> usize {
    20
}

/// Full description of a data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(with = "serde_rows::vec")]
    pub lags: Vec<DMatrix<f64>>,
    /// `n x (k+1)` loadings on `(1, t, ..., t^k)`.
    #[serde(default, with = "serde_rows::option")]
    pub trend: Option<DMatrix<f64>>,
    /// Structural impact matrix; column `j` is the effect of shock `j`.
    #[serde(with = "serde_rows")]
    pub impact: DMatrix<f64>,
    pub volatility: VolatilityProcess,
    #[serde(default)]
    pub innovation: Innovation,
    pub t_len: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
    /// Shock whose volatility the instrument tracks; also the variable whose
    /// impact is normalised to be non-negative.
    #[serde(default)]
    pub shock_index: usize,
    /// Horizon of the reported population responses.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

impl SimConfig {
    /// Constant-volatility VAR with no trend.
    pub fn var(lags: Vec<DMatrix<f64>>, impact: DMatrix<f64>, t_len: usize, seed: u64) -> Self {
        SimConfig {
            lags,
            trend: None,
            impact,
            volatility: VolatilityProcess::Constant,
            innovation: Innovation::Gaussian,
            t_len,
            burn_in: DEFAULT_BURN_IN,
            seed,
            shock_index: 0,
            horizon: default_horizon(),
            names: None,
        }
    }

    pub fn n(&self) -> usize {
        self.impact.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.impact.ncols() != n {
            return Err(Error::Invalid("impact matrix must be square and non-empty".into()));
        }
        if self.lags.iter().any(|a| a.shape() != (n, n)) {
            return Err(Error::Invalid("every lag matrix must be n x n".into()));
        }
        if let Some(v) = &self.trend {
            if v.nrows() != n {
                return Err(Error::Invalid("trend loadings must have n rows".into()));
            }
        }
        if self.t_len == 0 {
            return Err(Error::Invalid("sample length must be positive".into()));
        }
        if self.shock_index >= n {
            return Err(Error::Invalid("shock index out of range".into()));
        }
        if let Some(names) = &self.names {
            if names.len() != n {
                return Err(Error::Invalid("names must have one entry per variable".into()));
            }
        }
        if let Innovation::StudentT { dof } = self.innovation {
            if dof.is_nan() || dof <= 2.0 {
                return Err(Error::Invalid("Student-t innovations need dof > 2".into()));
            }
        }
        self.volatility.validate(n)?;
        let sv = self.impact.clone().singular_values();
        if sv.min() <= 1e-12 * sv.max() {
            return Err(Error::Invalid("impact matrix is not full rank".into()));
        }
        let modulus = max_root_modulus(&self.lags, n);
        if modulus > 1.0 + ROOT_TOL {
            return Err(Error::ExplosiveRoots { modulus });
        }
        Ok(())
    }

    /// Innovation covariance `B diag(E sigma^2) B'`.
    pub fn population_sigma(&self) -> DMatrix<f64> {
        let d = DVector::from_vec(self.volatility.mean_variance(self.n()));
        &self.impact * DMatrix::from_diagonal(&d) * self.impact.transpose()
    }

    /// Impact of a one-standard-deviation shock of interest, sign-normalised so
    /// the entry of the shock variable is non-negative.
    pub fn population_impact(&self) -> DVector<f64> {
        let s = self.shock_index;
        let sd = self.volatility.mean_variance(self.n())[s].sqrt();
        let mut b = self.impact.column(s) * sd;
        if b[s] < 0.0 {
            b = -b;
        }
        b
    }

    /// `gamma_i = sum_j B_ij B_sj Cov(sigma_j^2, Z)`.
    pub fn population_gamma(&self) -> DVector<f64> {
        let n = self.n();
        let s = self.shock_index;
        let cov = self.volatility.variance_instrument_cov(n);
        DVector::from_fn(n, |i, _| {
            (0..n).map(|j| self.impact[(i, j)] * self.impact[(s, j)] * cov[j]).sum()
        })
    }

    pub fn population_theta(&self, h1: usize) -> ThetaVector {
        let c = irf_from_lags(&self.lags, self.n(), h1);
        ThetaVector {
            sigma: self.population_sigma(),
            c: c[1..].to_vec(),
            gamma: self.population_gamma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub panel: Panel,
    pub instrument: Vec<f64>,
    /// Volatility regime (0 low, 1 high) of each kept period.
    pub regimes: Vec<u8>,
    pub true_irf: IrfBundle,
    pub true_theta: ThetaVector,
    pub true_impact: DVector<f64>,
}

/// Largest modulus among the eigenvalues of the VAR companion matrix.
pub fn max_root_modulus(lags: &[DMatrix<f64>], n: usize) -> f64 {
    let p = lags.len();
    if p == 0 {
        return 0.0;
    }
    let np = n * p;
    let mut comp = DMatrix::zeros(np, np);
    for (l, a) in lags.iter().enumerate() {
        comp.view_mut((0, l * n), (n, n)).copy_from(a);
    }
    for i in n..np {
        comp[(i, i - n)] = 1.0;
    }
    comp.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Reduced-form responses `C_0..C_H` and structural responses `C_h b`.
pub fn true_irf(lags: &[DMatrix<f64>], b: &DVector<f64>, horizon: usize) -> IrfBundle {
    let n = b.len();
    let c_full = irf_from_lags(lags, n, horizon);
    let psi = c_full.iter().map(|c| c * b).collect();
    IrfBundle { c_full, a_br: lags.to_vec(), psi: Some(psi) }
}

/// RNG for replication `rep` of a configuration: one ChaCha stream per replication.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    simulate_replication(config, 0)
}

/// Draws replication `rep`; the result depends only on `(config, rep)`.
pub fn simulate_replication(config: &SimConfig, rep: u64) -> Result<SimOutput> {
    config.validate()?;
    let n = config.n();
    let total = config.burn_in + config.t_len;
    let mut rng = replication_rng(config.seed, rep);
    let t_dist = match config.innovation {
        Innovation::StudentT { dof } => Some((
            StudentT::new(dof).map_err(|e| Error::Invalid(e.to_string()))?,
            ((dof - 2.0) / dof).sqrt(),
        )),
        Innovation::Gaussian => None,
    };

    let mut ys: Vec<DVector<f64>> = Vec::with_capacity(total);
    let mut z_out = Vec::with_capacity(config.t_len);
    let mut r_out = Vec::with_capacity(config.t_len);
    let mut regime: u8 = match &config.volatility {
        VolatilityProcess::Constant => 0,
        v => u8::from(rng.random::<f64>() < v.stationary_high()),
    };
    let mut eps = DVector::zeros(n);
    for step in 0..total {
        let (z, scale): (f64, Vec<f64>) = match &config.volatility {
            VolatilityProcess::Constant => (f64::from(u8::from(rng.random::<bool>())), vec![1.0; n]),
            VolatilityProcess::Markov2 { stay_prob, multipliers, instrument } => {
                if step > 0 && rng.random::<f64>() >= stay_prob[regime as usize] {
                    regime = 1 - regime;
                }
                let r = regime as usize;
                let z = match instrument {
                    InstrumentRule::RegimeIndicator => f64::from(regime),
                    InstrumentRule::Counts { prob } => {
                        let dist = Binomial::new(4, prob[r]).map_err(|e| Error::Invalid(e.to_string()))?;
                        dist.sample(&mut rng) as f64
                    }
                };
                (z, multipliers.iter().map(|m| m[r]).collect())
            }
        };
        for j in 0..n {
            let xi: f64 = match &t_dist {
                Some((dist, norm)) => dist.sample(&mut rng) * norm,
                None => rng.sample(StandardNormal),
            };
            eps[j] = xi * scale[j];
        }
        let mut y = &config.impact * &eps;
        for (l, a) in config.lags.iter().enumerate() {
            if step > l {
                y += a * &ys[step - l - 1];
            }
        }
        if let Some(v) = &config.trend {
            let t = step as f64 + 1.0 - config.burn_in as f64;
            let mut pow = 1.0;
            for d in 0..v.ncols() {
                y += v.column(d) * pow;
                pow *= t;
            }
        }
        ys.push(y);
        if step >= config.burn_in {
            z_out.push(z);
            r_out.push(regime);
        }
    }

    let kept = &ys[config.burn_in..];
    let values = DMatrix::from_fn(config.t_len, n, |i, j| kept[i][j]);
    let names = config
        .names
        .clone()
        .unwrap_or_else(|| (1..=n).map(|i| format!("y{i}")).collect());
    let panel = Panel::new(values, names)?;
    let true_impact = config.population_impact();
    Ok(SimOutput {
        panel,
        instrument: z_out,
        regimes: r_out,
        true_irf: true_irf(&config.lags, &true_impact, config.horizon),
        true_theta: config.population_theta(config.horizon),
        true_impact,
    })
}
