//! Per-period scores of the joint parameter block and their long-run covariance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{aligned_instrument, centered_instrument, shock_products, theta_dim, ResidualSet, ThetaVector};
use crate::numeric::spd_inverse;

/// Which form of the response-block score is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreForm {
    /// `Sigma^{-1} eta_t (eta_{t+h}(h) - C_h eta_t)'`: the influence function of
    /// the regression estimate of `C_h`.
    #[default]
    Consistent,
    /// `Sigma^{-1} (eta_t eta_{t+h}(h)' - mean)`, which also carries the sampling
    /// noise of `eta_t eta_t'` times `C_h'`.
    Literal,
}

/// Centered scores, one row per period `t = t_first ..= t_first + m - 1`, in the
/// flat `ThetaVector` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePanel {
    #[serde(with = "crate::serde_rows")]
    pub rows: DMatrix<f64>,
    pub n: usize,
    pub h1: usize,
    pub t_first: usize,
}

impl ScorePanel {
    pub fn m(&self) -> usize {
        self.rows.nrows()
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }
}

pub fn compute_scores(
    res: &ResidualSet,
    z: &[f64],
    theta: &ThetaVector,
    shock: usize,
    form: ScoreForm,
) -> Result<ScorePanel> {
    let n = res.dim();
    let h1 = res.h1();
    if theta.n() != n || theta.h1() != h1 {
        return Err(Error::Invalid("theta does not match the residual set".into()));
    }
    if shock >= n {
        return Err(Error::Invalid(format!("shock index {shock} out of range for {n} variables")));
    }
    let m = res.blocks[h1].rows();
    let d = theta_dim(n, h1);
    let sigma_inv = spd_inverse(&theta.sigma, "innovation covariance")?;
    let mut rows = DMatrix::zeros(m, d);

    let eta = res.innovations();
    for j in 0..n {
        for i in 0..n {
            let col = i + n * j;
            for t in 0..m {
                rows[(t, col)] = eta[(t, i)] * eta[(t, j)];
            }
        }
    }

    for h in 1..=h1 {
        let block = &res.blocks[h];
        let base = block.base.rows(0, m);
        let lead = block.lead.rows(0, m);
        let resid = match form {
            ScoreForm::Consistent => lead - base * theta.c[h - 1].transpose(),
            ScoreForm::Literal => lead.into_owned(),
        };
        let w = base * &sigma_inv;
        let off = ThetaVector::c_offset(n, h);
        for j in 0..n {
            for i in 0..n {
                let col = off + i + n * j;
                for t in 0..m {
                    rows[(t, col)] = resid[(t, i)] * w[(t, j)];
                }
            }
        }
    }

    let zc = centered_instrument(aligned_instrument(res, z)?);
    let prod = shock_products(eta, shock);
    let mean = prod.row_mean();
    let off = ThetaVector::gamma_offset(n, h1);
    for j in 0..n {
        for t in 0..m {
            rows[(t, off + j)] = (prod[(t, j)] - mean[j]) * zc[t];
        }
    }

    for mut col in rows.column_iter_mut() {
        let mu = col.mean();
        col.add_scalar_mut(-mu);
    }
    Ok(ScorePanel { rows, n, h1, t_first: res.blocks[0].t_first })
}

/// `round(0.75 T^{1/3})` with halves rounded up, at least 1.
pub fn default_bandwidth(t_len: usize) -> usize {
    // the small offset keeps an exact half from rounding down after cbrt
    (0.75 * (t_len as f64).cbrt() + 0.5 + 1e-9).floor().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Bartlett,
    Truncated,
}

/// What the lag is divided by inside the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelScale {
    /// `K(l / B_T)`, the weights implied by the bootstrap multipliers.
    #[default]
    Bandwidth,
    /// `K(l / T)` for `|l| <= B_T`; for comparison only.
    SampleSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: usize,
    #[serde(default)]
    pub scale: KernelScale,
}

impl KernelSpec {
    pub fn bartlett(bandwidth: usize) -> Self {
        KernelSpec { kind: KernelKind::Bartlett, bandwidth, scale: KernelScale::Bandwidth }
    }

    pub fn truncated(bandwidth: usize) -> Self {
        KernelSpec { kind: KernelKind::Truncated, bandwidth, scale: KernelScale::Bandwidth }
    }

    /// Weight at lag `l`; `t_len` is only used by `KernelScale::SampleSize`.
    pub fn weight(&self, lag: usize, t_len: usize) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        if lag > self.bandwidth {
            return 0.0;
        }
        let denom = match self.scale {
            KernelScale::Bandwidth => self.bandwidth as f64,
            KernelScale::SampleSize => t_len as f64,
        };
        match self.kind {
            KernelKind::Bartlett => (1.0 - lag as f64 / denom).max(0.0),
            KernelKind::Truncated => 1.0,
        }
    }
}

/// Kernel-weighted long-run covariance of the score rows.
pub fn hac(scores: &ScorePanel, kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    let m = scores.m();
    if kernel.bandwidth >= m {
        return Err(Error::BandwidthTooLarge { bandwidth: kernel.bandwidth, rows: m });
    }
    let x = &scores.rows;
    let t_len = m + scores.t_first - 1 + scores.h1;
    let mut omega = x.transpose() * x / m as f64;
    for lag in 1..=kernel.bandwidth {
        let w = kernel.weight(lag, t_len);
        if w == 0.0 {
            continue;
        }
        let g = x.rows(0, m - lag).transpose() * x.rows(lag, m - lag) / (m - lag) as f64;
        omega += (&g + g.transpose()) * w;
    }
    let sym = (&omega + omega.transpose()) * 0.5;
    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::estimate_theta;
    use crate::numeric::DesignSpec;
    use crate::sim::{simulate, SimConfig, VolatilityProcess};
    use nalgebra::DVector;

    #[test]
    fn bandwidth_rule() {
        assert_eq!(default_bandwidth(512), 6);
        assert_eq!(default_bandwidth(1000), 8);
        assert_eq!(default_bandwidth(1), 1);
        assert_eq!(default_bandwidth(160), 4);
    }

    fn example_scores(form: ScoreForm) -> (ScorePanel, ThetaVector) {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]);
        let lags = vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4])];
        let mut cfg = SimConfig::var(lags, b, 300, 7);
        cfg.volatility = VolatilityProcess::fourfold(2, 0, 0.7);
        let out = simulate(&cfg).unwrap();
        let spec = DesignSpec::new(1, 0, 3, 3);
        let est = estimate_theta(&out.panel, &out.instrument, &spec, 0).unwrap();
        let s = compute_scores(&est.residuals, &out.instrument, &est.theta, 0, form).unwrap();
        (s, est.theta)
    }

    #[test]
    fn scores_are_centered_with_theta_layout() {
        for form in [ScoreForm::Consistent, ScoreForm::Literal] {
            let (s, theta) = example_scores(form);
            assert_eq!(s.d(), theta.dim());
            assert_eq!(s.m(), 300 - 1 - 3);
            for col in s.rows.column_iter() {
                assert!(col.mean().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn consistent_response_scores_solve_the_normal_equations() {
        // the uncentered response-block scores sum to zero when C_h comes from the same rows
        let b = DMatrix::identity(2, 2);
        let lags = vec![DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.2, 0.1])];
        let out = simulate(&SimConfig::var(lags, b, 200, 3)).unwrap();
        let spec = DesignSpec::new(1, 0, 1, 1);
        let est = estimate_theta(&out.panel, &out.instrument, &spec, 0).unwrap();
        let s = compute_scores(&est.residuals, &out.instrument, &est.theta, 0, ScoreForm::Consistent).unwrap();
        assert_eq!(s.m(), est.residuals.blocks[1].rows());
        let blk = &est.residuals.blocks[1];
        let r = &blk.lead - &blk.base * est.theta.c[0].transpose();
        assert!((blk.base.transpose() * r).amax() < 1e-9);
    }

    #[test]
    fn hac_zero_bandwidth_is_second_moment() {
        let (s, _) = example_scores(ScoreForm::Consistent);
        let o = hac(&s, &KernelSpec::bartlett(0)).unwrap();
        let direct = s.rows.transpose() * &s.rows / s.m() as f64;
        assert!((o - direct).amax() < 1e-12);
    }

    #[test]
    fn hac_bartlett_is_psd_and_bandwidth_checked() {
        let (s, _) = example_scores(ScoreForm::Consistent);
        let o = hac(&s, &KernelSpec::bartlett(5)).unwrap();
        let eig = o.clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() >= -1e-10 * o.norm());
        assert!(matches!(
            hac(&s, &KernelSpec::bartlett(s.m())),
            Err(Error::BandwidthTooLarge { .. })
        ));
    }

    #[test]
    fn kernel_weights() {
        let k = KernelSpec::bartlett(4);
        assert_eq!(k.weight(0, 100), 1.0);
        assert_eq!(k.weight(2, 100), 0.5);
        assert_eq!(k.weight(4, 100), 0.0);
        let t = KernelSpec::truncated(4);
        assert_eq!(t.weight(4, 100), 1.0);
        assert_eq!(t.weight(5, 100), 0.0);
        let lit = KernelSpec { scale: KernelScale::SampleSize, ..k };
        assert_eq!(lit.weight(2, 100), 0.98);
    }

    #[test]
    fn scalar_hac_on_iid_scores() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let m = 100_000;
        let mut v: DVector<f64> = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let mu = v.mean();
        v.add_scalar_mut(-mu);
        let s = ScorePanel { rows: DMatrix::from_column_slice(m, 1, v.as_slice()), n: 1, h1: 0, t_first: 1 };
        let o = hac(&s, &KernelSpec::bartlett(default_bandwidth(m))).unwrap();
        assert!((o[(0, 0)] - 1.0).abs() < 0.05);
    }
}
