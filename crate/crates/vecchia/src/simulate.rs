//! Unconditional draws, kriging, and conditional simulation through the
//! sparse triangular factor.
//!
//! With `Z` standard normal, `Y = Gamma^{-1} Z` is an approximate draw from
//! the model, obtained by one forward substitution. Partitioning a joint
//! factor over observed-then-prediction positions into blocks `Gamma_21`,
//! `Gamma_22`, the approximate conditional expectation of the predictions is
//! `-Gamma_22^{-1} Gamma_21 y_1`, and a conditional draw costs one
//! unconditional draw plus one such solve.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::covariance::{CovarianceModel, LocationSet, Metric};
use crate::error::{Error, Result};
use crate::grouping::group_blocks;
use crate::likelihood::{build_gamma_tilde, Conditioning, SparseInverseCholesky};
use crate::neighbor::nn_ordered_fast_with_m;
use crate::ordering::{order_ammd, order_random, Permutation};

/// Mean-zero draw `Y = Gamma^{-1} Z` in ordering space.
///
/// Randomness comes from a ChaCha20 generator seeded with `seed` on stream 0;
/// the same seed reproduces the same draw bit-for-bit on any platform. Use
/// [`unconditional_draw_stream`] for independent ensemble members.
pub fn unconditional_draw(gamma: &SparseInverseCholesky, seed: u64) -> Vec<f64> {
    unconditional_draw_stream(gamma, seed, 0)
}

/// Stream `s` of the seeded generator: member `s` of an ensemble rooted at
/// `seed`, independent across streams.
pub fn unconditional_draw_stream(
    gamma: &SparseInverseCholesky,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let z: Vec<f64> = (0..gamma.n())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    gamma.forward_solve(&z)
}

/// How prediction points are ordered among themselves (observations always
/// come first in the joint ordering).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredOrdering {
    Ammd,
    Random,
}

/// Options for building a [`PredictionSetup`].
#[derive(Debug, Clone)]
pub struct PredictionConfig {
    /// Neighbors for observation positions.
    pub m_obs: usize,
    /// Neighbors for prediction positions (may draw on both observations and
    /// earlier predictions).
    pub m_pred: usize,
    pub grouping: bool,
    pub pred_ordering: PredOrdering,
    /// Seed for the random prediction ordering.
    pub seed: u64,
    pub metric: Metric,
    pub points_per_box: usize,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            m_obs: 30,
            m_pred: 30,
            grouping: true,
            pred_ordering: PredOrdering::Random,
            seed: 0,
            metric: Metric::Full,
            points_per_box: 16,
        }
    }
}

/// Joint factor over observations followed by prediction locations, ready
/// for kriging and conditional simulation.
pub struct PredictionSetup {
    model: CovarianceModel,
    n_obs: usize,
    n_pred: usize,
    perm: Permutation,
    gamma: SparseInverseCholesky,
}

/// Ensemble summary in original prediction order.
#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Per-member draws when requested (members x predictions).
    pub draws: Option<Vec<Vec<f64>>>,
}

impl PredictionSetup {
    /// Build the joint ordering (observations keep `obs_perm`, predictions
    /// are appended in their own ordering), find joint neighbor sets, and
    /// factor once. The factor is immutable afterwards and shared by all
    /// prediction operations.
    pub fn new(
        model: &CovarianceModel,
        obs: &LocationSet,
        obs_perm: &Permutation,
        preds: &LocationSet,
        config: &PredictionConfig,
    ) -> Result<Self> {
        model.validate()?;
        let n_obs = obs.len();
        let n_pred = preds.len();
        if obs_perm.len() != n_obs {
            return Err(Error::DimensionMismatch(format!(
                "observation permutation of length {} for {n_obs} observations",
                obs_perm.len()
            )));
        }
        if n_obs == 0 || n_pred == 0 {
            return Err(Error::InvalidArgument(
                "need at least one observation and one prediction location".into(),
            ));
        }
        let joint = obs.concat(preds)?;
        let pred_perm = match config.pred_ordering {
            PredOrdering::Ammd => order_ammd(preds, config.metric, config.points_per_box)?,
            PredOrdering::Random => order_random(n_pred, config.seed),
        };
        let mut forward = obs_perm.forward().to_vec();
        forward.extend(pred_perm.forward().iter().map(|&k| n_obs + k));
        let perm = Permutation::from_forward(forward)?;
        let m_per: Vec<usize> = (0..n_obs + n_pred)
            .map(|pos| {
                if pos < n_obs {
                    config.m_obs
                } else {
                    config.m_pred
                }
            })
            .collect();
        let (sets, _) = nn_ordered_fast_with_m(&joint, &perm, &m_per, config.metric)?;
        let gamma = if config.grouping {
            let part = group_blocks(&sets, config.m_obs.max(config.m_pred));
            build_gamma_tilde(model, &joint, &perm, Conditioning::Grouped(&part))?
        } else {
            build_gamma_tilde(model, &joint, &perm, Conditioning::Ungrouped(&sets))?
        };
        Ok(Self {
            model: model.clone(),
            n_obs,
            n_pred,
            perm,
            gamma,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_pred(&self) -> usize {
        self.n_pred
    }

    /// The joint factor (observations first, predictions after, each in
    /// their chosen ordering).
    pub fn gamma(&self) -> &SparseInverseCholesky {
        &self.gamma
    }

    pub fn joint_permutation(&self) -> &Permutation {
        &self.perm
    }

    /// Centered observations in ordering space.
    fn center_obs(&self, y_obs: &[f64]) -> Result<Vec<f64>> {
        if y_obs.len() != self.n_obs {
            return Err(Error::DimensionMismatch(format!(
                "{} observations, setup holds {}",
                y_obs.len(),
                self.n_obs
            )));
        }
        Ok((0..self.n_obs)
            .map(|pos| y_obs[self.perm.original(pos)] - self.model.mean)
            .collect())
    }

    /// Solve `Gamma_22 w = -Gamma_21 r` for centered permuted observations
    /// `r`; returns `w` in prediction-ordering space.
    fn solve_predictions(&self, r_obs_perm: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n_pred];
        for pos in self.n_obs..(self.n_obs + self.n_pred) {
            let (cols, vals) = self.gamma.row(pos);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals).take(cols.len() - 1) {
                acc += if j < self.n_obs {
                    v * r_obs_perm[j]
                } else {
                    v * w[j - self.n_obs]
                };
            }
            w[pos - self.n_obs] = -acc / vals[cols.len() - 1];
        }
        w
    }

    /// Map prediction-ordering space back to the caller's prediction order,
    /// adding the model mean.
    fn finish(&self, w: Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_pred];
        for (ppos, value) in w.into_iter().enumerate() {
            let orig = self.perm.original(self.n_obs + ppos) - self.n_obs;
            out[orig] = value + self.model.mean;
        }
        out
    }

    /// Kriging: approximate `E(Y_pred | y_obs)`, inputs and outputs in the
    /// caller's original orders.
    pub fn conditional_expectation(&self, y_obs: &[f64]) -> Result<Vec<f64>> {
        let r = self.center_obs(y_obs)?;
        Ok(self.finish(self.solve_predictions(&r)))
    }

    /// One conditional draw: an unconditional joint draw corrected by the
    /// kriging solve applied to `y_obs - y_obs_draw`.
    pub fn conditional_draw(&self, y_obs: &[f64], seed: u64) -> Result<Vec<f64>> {
        self.conditional_draw_stream(y_obs, seed, 0)
    }

    pub fn conditional_draw_stream(
        &self,
        y_obs: &[f64],
        seed: u64,
        stream: u64,
    ) -> Result<Vec<f64>> {
        let r = self.center_obs(y_obs)?;
        let star = unconditional_draw_stream(&self.gamma, seed, stream);
        let delta: Vec<f64> = r
            .iter()
            .zip(&star[..self.n_obs])
            .map(|(a, b)| a - b)
            .collect();
        let mut w = self.solve_predictions(&delta);
        for (ppos, v) in w.iter_mut().enumerate() {
            *v += star[self.n_obs + ppos];
        }
        Ok(self.finish(w))
    }

    /// Ensemble of conditional draws with per-member generator streams
    /// (member `k` uses stream `k`); mean and sample standard deviation per
    /// prediction point, plus the raw draws on request.
    pub fn conditional_ensemble(
        &self,
        y_obs: &[f64],
        members: usize,
        seed: u64,
        keep_draws: bool,
    ) -> Result<EnsembleSummary> {
        if members < 2 {
            return Err(Error::InvalidArgument(
                "ensemble needs at least two members".into(),
            ));
        }
        let draws: Vec<Vec<f64>> = (0..members)
            .into_par_iter()
            .map(|k| self.conditional_draw_stream(y_obs, seed, k as u64))
            .collect::<Result<_>>()?;
        let np = self.n_pred;
        let mut mean = vec![0.0; np];
        for d in &draws {
            for (m, v) in mean.iter_mut().zip(d) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= members as f64;
        }
        let mut sd = vec![0.0; np];
        for d in &draws {
            for ((s, v), m) in sd.iter_mut().zip(d).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut sd {
            *s = (*s / (members - 1) as f64).sqrt();
        }
        Ok(EnsembleSummary {
            mean,
            sd,
            draws: keep_draws.then_some(draws),
        })
    }
}
