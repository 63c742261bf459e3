//! Dependent wild bootstrap over the score rows.
//!
//! Draw `s` uses its own ChaCha stream keyed by `(seed, s)`, so the draws do not
//! depend on how the work is split across threads.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scores::ScorePanel;
use crate::error::{Error, Result};
use crate::lp::ThetaVector;

/// Draws processed per multiplication; bounds the memory held by the multipliers.
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSet {
    /// `S x d`, one bootstrap parameter vector per row.
    #[serde(with = "crate::serde_rows")]
    pub draws: DMatrix<f64>,
    pub base: ThetaVector,
    pub seed: u64,
    pub bandwidth: usize,
    /// Number of score rows the draws were built from.
    pub rows: usize,
}

impl DrawSet {
    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.nrows() == 0
    }

    pub fn theta(&self, s: usize) -> Result<ThetaVector> {
        let row: Vec<f64> = self.draws.row(s).iter().copied().collect();
        ThetaVector::from_flat(self.base.n(), self.base.h1(), &row)
    }
}

pub fn draw_rng(seed: u64, draw: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    rng
}

/// Multipliers `u_1..u_m` of one draw: moving sums of `B` consecutive
/// `N(0, 1/B)` variables, so each `u_t` has unit variance and neighbours
/// within `B` periods are correlated with Bartlett weights.
pub fn multipliers(seed: u64, draw: usize, m: usize, bandwidth: usize) -> Vec<f64> {
    let mut rng = draw_rng(seed, draw);
    let scale = (1.0 / bandwidth as f64).sqrt();
    let zeta: Vec<f64> = (0..m + bandwidth - 1)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    zeta.windows(bandwidth).map(|w| w.iter().sum()).collect()
}

pub fn wild_draws(
    scores: &ScorePanel,
    theta: &ThetaVector,
    draws: usize,
    bandwidth: usize,
    seed: u64,
) -> Result<DrawSet> {
    if draws == 0 {
        return Err(Error::Invalid("number of bootstrap draws must be positive".into()));
    }
    if bandwidth == 0 {
        return Err(Error::Invalid("bootstrap bandwidth must be at least 1".into()));
    }
    let m = scores.m();
    let d = scores.d();
    if d != theta.dim() {
        return Err(Error::Invalid("scores do not match theta".into()));
    }
    if bandwidth >= m {
        return Err(Error::BandwidthTooLarge { bandwidth, rows: m });
    }
    let base = theta.to_flat();
    let xt = scores.rows.transpose() / m as f64;
    let mut out = DMatrix::zeros(draws, d);
    for start in (0..draws).step_by(CHUNK) {
        let len = CHUNK.min(draws - start);
        let cols: Vec<Vec<f64>> = (start..start + len)
            .into_par_iter()
            .map(|s| multipliers(seed, s, m, bandwidth))
            .collect();
        let u = DMatrix::from_iterator(m, len, cols.into_iter().flatten());
        let shift = &xt * u;
        for k in 0..len {
            for j in 0..d {
                out[(start + k, j)] = base[j] + shift[(j, k)];
            }
        }
    }
    Ok(DrawSet { draws: out, base: theta.clone(), seed, bandwidth, rows: m })
}
