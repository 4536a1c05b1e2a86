//! Exact dense oracle and approximation-quality criteria.
//!
//! Two deterministic criteria compare an approximate model against the
//! target: the Kullback-Leibler divergence between the implied mean-zero
//! Gaussians, and asymptotic relative efficiencies for covariance-parameter
//! estimation derived from the misspecified-likelihood (Godambe) information
//! `H = E(hess) E(score score^T)^{-1} E(hess)`. Block-independent and
//! tapered-covariance baselines are included for reference comparisons.
//!
//! Everything here materializes `n x n` matrices and is gated by an oracle
//! cap; it is tooling for studies at desk scale, not part of the scalable
//! approximation path.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::covariance::{build_cov_matrix, CovarianceModel, KernelEval, LocationSet};
use crate::error::{Error, Result};
use crate::likelihood::{build_gamma_tilde, Conditioning, MeanSpec, SparseInverseCholesky};
use crate::optimize::NelderMead;
use crate::ordering::Permutation;

/// Default ceiling on dense-oracle problem sizes.
pub const DEFAULT_ORACLE_CAP: usize = 4096;

const LN_2PI: f64 = 1.8378770664093453;

/// A dense mean-zero Gaussian: covariance, its Cholesky factor, and the
/// log-determinant.
pub struct DenseGaussian {
    sigma: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
}

impl DenseGaussian {
    /// Assemble the exact covariance over all locations (original order).
    pub fn from_model(
        model: &CovarianceModel,
        locs: &LocationSet,
        cap: Option<usize>,
    ) -> Result<Self> {
        let idx: Vec<usize> = (0..locs.len()).collect();
        let sigma = build_cov_matrix(model, locs, &idx)?;
        Self::from_matrix(sigma, cap)
    }

    pub fn from_matrix(sigma: DMatrix<f64>, cap: Option<usize>) -> Result<Self> {
        let cap = cap.unwrap_or(DEFAULT_ORACLE_CAP);
        let n = sigma.nrows();
        if n > cap {
            return Err(Error::OracleTooLarge { n, cap });
        }
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::Factorization { unit: 0 })?;
        let logdet = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        Ok(Self {
            sigma,
            chol,
            logdet,
        })
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn log_det(&self) -> f64 {
        self.logdet
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Exact Gaussian log density of `y` under this covariance.
    pub fn loglik(&self, y: &[f64], mean: &MeanSpec<'_>) -> Result<f64> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for a dense model of size {}",
                y.len(),
                self.n()
            )));
        }
        let centered = match mean {
            MeanSpec::Zero => y.to_vec(),
            MeanSpec::Constant(mu) => y.iter().map(|v| v - mu).collect(),
            MeanSpec::Linear(x, beta) => y
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v - x
                        .row(i)
                        .iter()
                        .zip(beta.iter())
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .collect(),
        };
        let r = DVector::from_column_slice(&centered);
        let quad = r.dot(&self.solve_vec(&r));
        Ok(-0.5 * self.n() as f64 * LN_2PI - 0.5 * self.logdet - 0.5 * quad)
    }

    /// Generalized least squares `(X' S^-1 X)^-1 X' S^-1 y`.
    pub fn gls_beta(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
        let sx = self.solve_mat(x);
        let xtx = x.transpose() * &sx;
        let xty = sx.transpose() * DVector::from_column_slice(y);
        let chol = Cholesky::new(xtx)
            .ok_or_else(|| Error::RankDeficient("X' S^-1 X is singular".into()))?;
        Ok(chol.solve(&xty).iter().copied().collect())
    }
}

/// `KL(N(0, sigma0) || N(0, sigma1))
///   = (tr(sigma1^-1 sigma0) - n + log det sigma1 - log det sigma0) / 2`.
pub fn kl_divergence_general(sigma0: &DMatrix<f64>, sigma1: &DMatrix<f64>) -> Result<f64> {
    if sigma0.nrows() != sigma1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "covariances of size {} and {}",
            sigma0.nrows(),
            sigma1.nrows()
        )));
    }
    let n = sigma0.nrows() as f64;
    let d0 = DenseGaussian::from_matrix(sigma0.clone(), Some(usize::MAX))?;
    let d1 = DenseGaussian::from_matrix(sigma1.clone(), Some(usize::MAX))?;
    let trace = d1.solve_mat(sigma0).trace();
    Ok(0.5 * (trace - n + d1.log_det() - d0.log_det()))
}

/// KL divergence from the exact model to its ordered-conditional
/// approximation built at the same parameters.
///
/// Both quadratic-form expectations equal `n` and cancel, leaving
/// `KL = -sum_i log Gamma_ii - log det sigma0 / 2`.
pub fn kl_divergence_vecchia(
    model: &CovarianceModel,
    locs: &LocationSet,
    perm: &Permutation,
    cond: Conditioning<'_>,
    cap: Option<usize>,
) -> Result<f64> {
    let dense = DenseGaussian::from_model(model, locs, cap)?;
    kl_divergence_vecchia_given(&dense, model, locs, perm, cond)
}

/// [`kl_divergence_vecchia`] against a precomputed dense oracle, for sweeps
/// that vary only the ordering or the conditioning sets.
pub fn kl_divergence_vecchia_given(
    dense: &DenseGaussian,
    model: &CovarianceModel,
    locs: &LocationSet,
    perm: &Permutation,
    cond: Conditioning<'_>,
) -> Result<f64> {
    let gamma = build_gamma_tilde(model, locs, perm, cond)?;
    Ok(-gamma.log_det() - 0.5 * dense.log_det())
}

/// Fisher and misspecified-likelihood information for a parameter subset,
/// with per-parameter relative efficiencies.
#[derive(Debug, Clone)]
pub struct Information {
    /// Indices into [`CovarianceModel::params`] that were varied.
    pub params: Vec<usize>,
    /// Fisher information of the exact likelihood (log-parameter scale).
    pub fisher: DMatrix<f64>,
    /// Godambe information `H` of the approximate likelihood (same scale).
    pub godambe: DMatrix<f64>,
    /// Expected approximate score at the evaluation point; zero when the
    /// approximation is built at the data-generating parameters.
    pub expected_score: Vec<f64>,
    /// `diag(fisher^-1) / diag(godambe^-1)`, in `(0, 1]` up to numerics.
    pub relative_efficiency: Vec<f64>,
}

/// Relative FD step on the log-parameter scale.
const FD_STEP: f64 = 1e-4;

/// Information matrices of the approximate likelihood
/// `l(theta; y) = c(theta) - y' Q(theta) y / 2` with `Q = Gamma' Gamma`,
/// computed by central finite differences in log-parameters against the
/// dense covariance at `model`.
///
/// * `E(score_i) = d_i c - tr(d_i Q sigma0) / 2 = d_i g`,
/// * `E(score score')_ij = E(score_i) E(score_j) + tr(d_iQ sigma0 d_jQ sigma0) / 2`,
/// * `E(hess)_ij = d_ij g`,
///
/// where `g(theta) = c(theta) - tr(Q(theta) sigma0)/2` is the expected
/// approximate log-likelihood, differentiated as a scalar. `H` follows the
/// sandwich formula and equals the Fisher information when the approximation
/// is exact.
pub fn godambe_information(
    model: &CovarianceModel,
    locs: &LocationSet,
    perm: &Permutation,
    cond: Conditioning<'_>,
    params: &[usize],
    cap: Option<usize>,
) -> Result<Information> {
    model.validate()?;
    let theta0 = model.params();
    if params.iter().any(|&k| k >= theta0.len()) {
        return Err(Error::InvalidArgument(
            "parameter index out of range".into(),
        ));
    }
    let p = params.len();
    let n = locs.len();
    let cap_val = cap.unwrap_or(DEFAULT_ORACLE_CAP);
    if n > cap_val {
        return Err(Error::OracleTooLarge { n, cap: cap_val });
    }
    // dense covariance in ordering space, shared by every trace below
    let sigma0p = build_cov_matrix(model, locs, perm.forward())?;
    let chol0 = Cholesky::new(sigma0p.clone()).ok_or(Error::Factorization { unit: 0 })?;
    let l0 = chol0.l();

    let model_at = |shift: &[f64]| -> Result<CovarianceModel> {
        let mut th = theta0.clone();
        for (j, &k) in params.iter().enumerate() {
            th[k] *= shift[j].exp();
        }
        model.with_params(&th)
    };
    let gamma_at = |shift: &[f64]| -> Result<SparseInverseCholesky> {
        build_gamma_tilde(&model_at(shift)?, locs, perm, cond)
    };
    // g(theta) = c(theta) - tr(Q sigma0)/2, with tr(Q sigma0) = |Gamma L0|_F^2
    let g_at = |shift: &[f64]| -> Result<f64> {
        let gamma = gamma_at(shift)?;
        let mut trace = 0.0;
        for i in 0..n {
            let (cols, vals) = gamma.row(i);
            for c in 0..n {
                // (Gamma L0)_{ic}; L0 lower triangular so j >= c contribute
                let mut acc = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    if j >= c {
                        acc += v * l0[(j, c)];
                    }
                }
                trace += acc * acc;
            }
        }
        let c_theta = -0.5 * n as f64 * LN_2PI + gamma.log_det();
        Ok(c_theta - 0.5 * trace)
    };

    // expected score: fourth-order central differences of g
    let mut score = vec![0.0; p];
    for j in 0..p {
        let mut shift = vec![0.0; p];
        let mut g = [0.0; 4];
        for (slot, mult) in [(0, 2.0), (1, 1.0), (2, -1.0), (3, -2.0)] {
            shift[j] = mult * FD_STEP;
            g[slot] = g_at(&shift)?;
        }
        score[j] = (-g[0] + 8.0 * g[1] - 8.0 * g[2] + g[3]) / (12.0 * FD_STEP);
    }

    // expected Hessian: central second differences of g
    let g0 = g_at(&vec![0.0; p])?;
    let mut hess = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut shift = vec![0.0; p];
        shift[j] = FD_STEP;
        let gp = g_at(&shift)?;
        shift[j] = -FD_STEP;
        let gm = g_at(&shift)?;
        hess[(j, j)] = (gp - 2.0 * g0 + gm) / (FD_STEP * FD_STEP);
    }
    for j in 0..p {
        for k in (j + 1)..p {
            let mut g = [0.0; 4];
            for (slot, (sj, sk)) in [
                (0, (1.0, 1.0)),
                (1, (1.0, -1.0)),
                (2, (-1.0, 1.0)),
                (3, (-1.0, -1.0)),
            ] {
                let mut shift = vec![0.0; p];
                shift[j] = sj * FD_STEP;
                shift[k] = sk * FD_STEP;
                g[slot] = g_at(&shift)?;
            }
            let v = (g[0] - g[1] - g[2] + g[3]) / (4.0 * FD_STEP * FD_STEP);
            hess[(j, k)] = v;
            hess[(k, j)] = v;
        }
    }

    // score covariance: dQ_j by central differences, then tr(dQ S dQ S)/2
    let mut dq_sigma: Vec<DMatrix<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut shift = vec![0.0; p];
        shift[j] = FD_STEP;
        let qp = gamma_at(&shift)?.gram();
        shift[j] = -FD_STEP;
        let qm = gamma_at(&shift)?.gram();
        let dq = (qp - qm) / (2.0 * FD_STEP);
        dq_sigma.push(dq * &sigma0p);
    }
    let mut score_cov = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in j..p {
            let mut tr = 0.0;
            for a in 0..n {
                for b in 0..n {
                    tr += dq_sigma[j][(a, b)] * dq_sigma[k][(b, a)];
                }
            }
            let v = score[j] * score[k] + 0.5 * tr;
            score_cov[(j, k)] = v;
            score_cov[(k, j)] = v;
        }
    }

    let b_chol = Cholesky::new(score_cov.clone())
        .ok_or_else(|| Error::RankDeficient("score covariance is not positive definite".into()))?;
    let godambe = &hess * b_chol.solve(&hess);

    // Fisher information of the exact likelihood, same log scale:
    // I_jk = tr(S^-1 dS_j S^-1 dS_k) / 2 with dS by central differences
    let mut s_inv_ds: Vec<DMatrix<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut shift = vec![0.0; p];
        shift[j] = FD_STEP;
        let sp = build_cov_matrix(&model_at(&shift)?, locs, perm.forward())?;
        shift[j] = -FD_STEP;
        let sm = build_cov_matrix(&model_at(&shift)?, locs, perm.forward())?;
        let ds = (sp - sm) / (2.0 * FD_STEP);
        s_inv_ds.push(chol0.solve(&ds));
    }
    let mut fisher = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in j..p {
            let mut tr = 0.0;
            for a in 0..n {
                for b in 0..n {
                    tr += s_inv_ds[j][(a, b)] * s_inv_ds[k][(b, a)];
                }
            }
            fisher[(j, k)] = 0.5 * tr;
            fisher[(k, j)] = 0.5 * tr;
        }
    }

    let fisher_inv = Cholesky::new(fisher.clone())
        .ok_or_else(|| Error::RankDeficient("Fisher information is not positive definite".into()))?
        .inverse();
    let godambe_inv = Cholesky::new(godambe.clone())
        .ok_or_else(|| Error::RankDeficient("Godambe information is not positive definite".into()))?
        .inverse();
    let relative_efficiency: Vec<f64> = (0..p)
        .map(|j| fisher_inv[(j, j)] / godambe_inv[(j, j)])
        .collect();

    Ok(Information {
        params: params.to_vec(),
        fisher,
        godambe,
        expected_score: score,
        relative_efficiency,
    })
}

/// KL divergence of the block-independent baseline: the covariance restricted
/// to a block-diagonal by the given block assignment (one entry per point).
pub fn baseline_block_independent_assign(
    model: &CovarianceModel,
    locs: &LocationSet,
    assign: &[usize],
    cap: Option<usize>,
) -> Result<f64> {
    if assign.len() != locs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} block labels for {} points",
            assign.len(),
            locs.len()
        )));
    }
    let dense = DenseGaussian::from_model(model, locs, cap)?;
    let sigma0 = dense.sigma();
    let n = locs.len();
    let mut sigma1 = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            if assign[a] == assign[b] {
                sigma1[(a, b)] = sigma0[(a, b)];
            }
        }
    }
    kl_divergence_general(sigma0, &sigma1)
}

/// Block-independent baseline over a regular spatial tiling of the bounding
/// box, `tiles[k]` cells along metric axis `k`.
pub fn baseline_block_independent(
    model: &CovarianceModel,
    locs: &LocationSet,
    tiles: &[usize],
    cap: Option<usize>,
) -> Result<f64> {
    if tiles.is_empty() || tiles.contains(&0) {
        return Err(Error::InvalidArgument(
            "tile counts must be positive".into(),
        ));
    }
    if tiles.len() != locs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} tile counts for dimension {}",
            tiles.len(),
            locs.dim()
        )));
    }
    let n = locs.len();
    let d = locs.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..n {
        for (k, &v) in locs.point(i).iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let assign: Vec<usize> = (0..n)
        .map(|i| {
            let p = locs.point(i);
            let mut id = 0usize;
            for k in 0..d {
                let len = hi[k] - lo[k];
                let cell = if len <= 0.0 {
                    0
                } else {
                    (((p[k] - lo[k]) / len * tiles[k] as f64) as usize).min(tiles[k] - 1)
                };
                id = id * tiles[k] + cell;
            }
            id
        })
        .collect();
    baseline_block_independent_assign(model, locs, &assign, cap)
}

/// Wendland-1 compactly supported correlation, `(1 - t)^4 (4t + 1)` inside
/// the taper range and zero beyond it.
pub fn wendland1(r: f64, range: f64) -> f64 {
    let t = r / range;
    if t >= 1.0 {
        0.0
    } else {
        let u = 1.0 - t;
        let u2 = u * u;
        u2 * u2 * (4.0 * t + 1.0)
    }
}

/// KL divergence of a tapered-covariance baseline: elementwise product of the
/// model kernel (free variance and range) with a Wendland-1 taper at the
/// given range. With `optimize`, variance and range are tuned to minimize
/// the divergence, mirroring how such approximations are used in practice;
/// the nugget and taper support stay fixed.
pub fn baseline_taper(
    model: &CovarianceModel,
    locs: &LocationSet,
    taper_range: f64,
    optimize: bool,
    cap: Option<usize>,
) -> Result<f64> {
    if !taper_range.is_finite() || taper_range <= 0.0 {
        return Err(Error::Domain(format!(
            "taper range must be positive, got {taper_range}"
        )));
    }
    let dense = DenseGaussian::from_model(model, locs, cap)?;
    let sigma0 = dense.sigma();
    let n = locs.len();

    let tapered_sigma = |variance: f64, range: f64| -> Result<DMatrix<f64>> {
        let mut m = model.clone();
        m.variance = variance;
        m.range = range;
        let eval = KernelEval::new(&m)?;
        let mut s = DMatrix::zeros(n, n);
        for a in 0..n {
            s[(a, a)] = variance + model.nugget + model.jitter;
            for b in (a + 1)..n {
                let r = locs.distance(a, b, crate::covariance::Metric::Full);
                let v = eval.cov(locs.point(a), locs.point(b)) * wendland1(r, taper_range);
                s[(a, b)] = v;
                s[(b, a)] = v;
            }
        }
        Ok(s)
    };
    let kl_at = |variance: f64, range: f64| -> Result<f64> {
        kl_divergence_general(sigma0, &tapered_sigma(variance, range)?)
    };
    if !optimize {
        return kl_at(model.variance, model.range);
    }
    let nm = NelderMead {
        max_evals: 400,
        ftol: 1e-9,
        ..Default::default()
    };
    let out = nm.minimize(
        |x| kl_at(x[0].exp(), x[1].exp()).unwrap_or(f64::INFINITY),
        &[model.variance.ln(), model.range.ln()],
    );
    if !out.converged {
        return Err(Error::NonConvergence { evals: out.evals });
    }
    Ok(out.fx)
}
