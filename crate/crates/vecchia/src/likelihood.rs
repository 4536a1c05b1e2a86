//! The sparse approximate inverse Cholesky factor and the ordered-conditional
//! log-likelihood.
//!
//! Row `i` of the factor encodes the conditional density of the `i`-th
//! ordered observation given its conditioning set: the coefficients are the
//! last relevant row of the inverse Cholesky factor of the conditioning
//! covariance, so the diagonal entry is the reciprocal residual standard
//! deviation of the best linear predictor. With grouping, one factorization
//! per block produces every member row at once.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::covariance::KernelEval;
use crate::covariance::{CovarianceModel, LocationSet};
use crate::error::{Error, Result};
use crate::grouping::BlockPartition;
use crate::neighbor::NeighborSets;
use crate::ordering::Permutation;

const LN_2PI: f64 = 1.8378770664093453;

/// Row-sparse lower-triangular approximation to the inverse Cholesky factor
/// of the permuted covariance matrix, stored CSR-style. Column indices of
/// row `i` are its conditioning set (ascending, last entry `i` itself).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInverseCholesky {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl SparseInverseCholesky {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and coefficients of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    /// Diagonal entry `Gamma_ii > 0` (reciprocal residual standard deviation).
    pub fn diag(&self, i: usize) -> f64 {
        self.data[self.indptr[i + 1] - 1]
    }

    /// `log det Gamma = sum_i log Gamma_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.diag(i).ln()).sum()
    }

    /// Sparse matrix-vector product `Gamma x` (ordering space).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// Solve the lower-triangular system `Gamma y = b` by forward
    /// substitution in `O(nnz)` operations.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = b[i];
            for (&j, &v) in cols.iter().zip(vals).take(cols.len() - 1) {
                acc -= v * y[j];
            }
            y[i] = acc / vals[cols.len() - 1];
        }
        y
    }

    /// Dense materialization (tests and small oracles only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Dense `Q = Gamma^T Gamma`, the implied precision matrix (ordering
    /// space; tests and information-matrix computations only).
    pub fn gram(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (a, &ca) in cols.iter().enumerate() {
                for (b, &cb) in cols.iter().enumerate() {
                    q[(ca, cb)] += vals[a] * vals[b];
                }
            }
        }
        q
    }
}

/// Which conditioning sets drive the factor construction.
#[derive(Debug, Clone, Copy)]
pub enum Conditioning<'a> {
    /// One unit per observation, conditioning on `J_i`.
    Ungrouped(&'a NeighborSets),
    /// One unit per block, members conditioning on their expanded sets.
    Grouped(&'a BlockPartition),
}

/// Mean specification for likelihood evaluation (original index order).
#[derive(Debug, Clone, Copy)]
pub enum MeanSpec<'a> {
    Zero,
    Constant(f64),
    /// Design matrix and coefficient vector, `mean = X beta`.
    Linear(&'a DMatrix<f64>, &'a [f64]),
}

impl MeanSpec<'_> {
    fn subtract(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            MeanSpec::Zero => Ok(y.to_vec()),
            MeanSpec::Constant(mu) => Ok(y.iter().map(|v| v - mu).collect()),
            MeanSpec::Linear(x, beta) => {
                if x.nrows() != y.len() || x.ncols() != beta.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "design {}x{} against {} observations and {} coefficients",
                        x.nrows(),
                        x.ncols(),
                        y.len(),
                        beta.len()
                    )));
                }
                Ok(y.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v - x
                            .row(i)
                            .iter()
                            .zip(beta.iter())
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    })
                    .collect())
            }
        }
    }
}

/// Build the sparse inverse Cholesky factor for the given model, ordering,
/// and conditioning sets.
///
/// For each unit (an observation with its `J_i`, or a block with its `U_k`)
/// the covariance of the unit's conditioning union is assembled and
/// factorized once; the rows of its inverse Cholesky factor belonging to the
/// unit's members are copied into the output. Units are processed in
/// parallel; cost is `O(sum_k |U_k|^3)` flops and `O(max_k |U_k|^2)`
/// workspace per thread.
pub fn build_gamma_tilde(
    model: &CovarianceModel,
    locs: &LocationSet,
    perm: &Permutation,
    cond: Conditioning<'_>,
) -> Result<SparseInverseCholesky> {
    let n = perm.len();
    if locs.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {n} over {} locations",
            locs.len()
        )));
    }
    let eval = KernelEval::new(model)?;
    let diag_boost = model.nugget + model.jitter;

    // (union, members) per unit, in ordering space
    let units: Vec<(&[usize], &[usize])> = match cond {
        Conditioning::Ungrouped(sets) => {
            if sets.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} conditioning sets for {n} positions",
                    sets.n()
                )));
            }
            (0..n)
                .map(|i| {
                    let s = sets.set(i);
                    (s, &s[s.len() - 1..])
                })
                .collect()
        }
        Conditioning::Grouped(part) => {
            if part.expanded_sets().len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "partition over {} positions used with {n} locations",
                    part.expanded_sets().len()
                )));
            }
            (0..part.num_blocks())
                .map(|k| (part.union(k), part.blocks()[k].as_slice()))
                .collect()
        }
    };

    // row sizes are known up front: |J_i| ungrouped, |Jbar_i| grouped
    let row_len: Vec<usize> = match cond {
        Conditioning::Ungrouped(sets) => (0..n).map(|i| sets.set(i).len()).collect(),
        Conditioning::Grouped(part) => (0..n).map(|i| part.expanded(i).len()).collect(),
    };
    let mut indptr = vec![0usize; n + 1];
    for i in 0..n {
        indptr[i + 1] = indptr[i] + row_len[i];
    }
    let nnz = indptr[n];

    // per unit: the member rows as (row index, coefficients)
    type UnitRows = Vec<(usize, Vec<f64>)>;
    let computed: Vec<Result<UnitRows>> = units
        .par_iter()
        .enumerate()
        .map_init(
            || (Vec::<f64>::new(), Vec::<f64>::new()),
            |(a_buf, u_buf), (unit_id, &(union, members))| {
                let s = union.len();
                a_buf.clear();
                a_buf.resize(s * s, 0.0);
                // covariance of the conditioning union, ordered by index
                for r in 0..s {
                    let pr = locs.point(perm.original(union[r]));
                    a_buf[r * s + r] = eval.cov(pr, pr) + diag_boost;
                    for c in (r + 1)..s {
                        let v = eval.cov(pr, locs.point(perm.original(union[c])));
                        a_buf[r * s + c] = v;
                        a_buf[c * s + r] = v;
                    }
                }
                cholesky_in_place(a_buf, s).map_err(|_| Error::Factorization { unit: unit_id })?;
                let mut rows = Vec::with_capacity(members.len());
                for &i in members {
                    let p = union.partition_point(|&j| j < i);
                    debug_assert_eq!(union[p], i);
                    u_buf.clear();
                    u_buf.resize(p + 1, 0.0);
                    inverse_cholesky_row(a_buf, s, p, u_buf);
                    rows.push((i, u_buf.clone()));
                }
                Ok(rows)
            },
        )
        .collect();

    let mut indices = vec![0usize; nnz];
    let mut data = vec![0.0; nnz];
    for (unit, &(union, _)) in computed.into_iter().zip(units.iter()) {
        for (i, vals) in unit? {
            let start = indptr[i];
            debug_assert_eq!(vals.len(), indptr[i + 1] - start);
            indices[start..start + vals.len()].copy_from_slice(&union[..vals.len()]);
            data[start..start + vals.len()].copy_from_slice(&vals);
        }
    }
    Ok(SparseInverseCholesky {
        n,
        indptr,
        indices,
        data,
    })
}

/// In-place lower Cholesky factorization of a row-major `s x s` buffer.
/// Returns the offending column on a non-positive pivot.
fn cholesky_in_place(a: &mut [f64], s: usize) -> std::result::Result<(), usize> {
    for j in 0..s {
        let mut d = a[j * s + j];
        let row_j = j * s;
        for t in 0..j {
            d -= a[row_j + t] * a[row_j + t];
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(j);
        }
        let ljj = d.sqrt();
        a[row_j + j] = ljj;
        let inv = 1.0 / ljj;
        for i in (j + 1)..s {
            let row_i = i * s;
            let mut v = a[row_i + j];
            for t in 0..j {
                v -= a[row_i + t] * a[row_j + t];
            }
            a[row_i + j] = v * inv;
        }
    }
    Ok(())
}

/// Row `p` of `L^{-1}` for a row-major lower factor `l`, i.e. the solution of
/// `L^T u = e_p`, written into `out[0..=p]`.
fn inverse_cholesky_row(l: &[f64], s: usize, p: usize, out: &mut [f64]) {
    out[p] = 1.0 / l[p * s + p];
    for j in (0..p).rev() {
        let mut acc = 0.0;
        for t in (j + 1)..=p {
            acc += l[t * s + j] * out[t];
        }
        out[j] = -acc / l[j * s + j];
    }
}

/// Ordered-conditional log-likelihood
/// `-(n/2) log 2 pi + log det Gamma - ||Gamma (y - mean)||^2 / 2`,
/// with `y` and the mean given in original index order.
pub fn loglik(
    gamma: &SparseInverseCholesky,
    perm: &Permutation,
    y: &[f64],
    mean: &MeanSpec<'_>,
) -> Result<f64> {
    if y.len() != gamma.n() || perm.len() != gamma.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} observations against factor of size {}",
            y.len(),
            gamma.n()
        )));
    }
    let centered = mean.subtract(y)?;
    let z = gamma.matvec(&perm.permute(&centered));
    let quad: f64 = z.iter().map(|v| v * v).sum();
    Ok(-0.5 * gamma.n() as f64 * LN_2PI + gamma.log_det() - 0.5 * quad)
}

/// Profile out linear mean parameters: the generalized-least-squares
/// estimate under the approximate model,
/// `beta = [(GX)^T GX]^{-1} (GX)^T (Gy)`, computed column by column, plus
/// the log-likelihood at the profiled mean.
pub fn profile_beta(
    gamma: &SparseInverseCholesky,
    perm: &Permutation,
    x: &DMatrix<f64>,
    y: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let n = gamma.n();
    let p = x.ncols();
    if x.nrows() != n || y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design {}x{} with {} observations against factor of size {n}",
            x.nrows(),
            p,
            y.len()
        )));
    }
    let mut gx = DMatrix::zeros(n, p);
    for c in 0..p {
        let col: Vec<f64> = (0..n).map(|r| x[(r, c)]).collect();
        let gcol = gamma.matvec(&perm.permute(&col));
        for r in 0..n {
            gx[(r, c)] = gcol[r];
        }
    }
    let gy = gamma.matvec(&perm.permute(y));
    let gy_vec = nalgebra::DVector::from_vec(gy);
    let xtx = gx.transpose() * &gx;
    let xty = gx.transpose() * &gy_vec;
    let chol = nalgebra::Cholesky::new(xtx)
        .ok_or_else(|| Error::RankDeficient("Gamma X does not have full column rank".into()))?;
    let beta = chol.solve(&xty);
    let resid = gy_vec - gx * &beta;
    let quad: f64 = resid.iter().map(|v| v * v).sum();
    let ll = -0.5 * n as f64 * LN_2PI + gamma.log_det() - 0.5 * quad;
    Ok((beta.iter().copied().collect(), ll))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{build_cov_matrix, Metric};
    use crate::grouping::group_blocks;
    use crate::neighbor::{nn_ordered_brute, nn_ordered_fast};
    use crate::ordering::{order_random, order_sorted_coordinate, Axis};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_locs(rng: &mut ChaCha20Rng, n: usize, d: usize) -> LocationSet {
        let coords: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
        LocationSet::from_flat(coords, d).unwrap()
    }

    fn full_sets(n: usize) -> NeighborSets {
        NeighborSets::from_sets((0..n).map(|i| (0..=i).collect()).collect()).unwrap()
    }

    /// Dense mean-zero Gaussian log density via nalgebra (independent path).
    fn dense_loglik(sigma: &DMatrix<f64>, y: &[f64]) -> f64 {
        let n = y.len();
        let chol = nalgebra::Cholesky::new(sigma.clone()).unwrap();
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let yv = nalgebra::DVector::from_column_slice(y);
        let sol = chol.solve(&yv);
        -0.5 * n as f64 * LN_2PI - 0.5 * logdet - 0.5 * yv.dot(&sol)
    }

    #[test]
    fn scalar_case() {
        let model = CovarianceModel::matern(2.0, 0.1, 0.5, 0.5);
        let locs = LocationSet::from_flat(vec![0.3], 1).unwrap();
        let perm = Permutation::identity(1);
        let sets = full_sets(1);
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        assert_relative_eq!(g.diag(0), 1.0 / 2.5f64.sqrt(), max_relative = 1e-14);
        // n = 1, y = mu: loglik = -log(2 pi)/2 - log(s2 + t2)/2
        let ll = loglik(&g, &perm, &[7.0], &MeanSpec::Constant(7.0)).unwrap();
        assert_relative_eq!(ll, -0.5 * LN_2PI - 0.5 * 2.5f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn full_conditioning_matches_dense_inverse_cholesky() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let model = CovarianceModel::matern(1.4, 0.3, 1.0, 0.1);
        let locs = random_locs(&mut rng, 28, 2);
        let perm = order_random(28, 3);
        let sets = full_sets(28);
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        let sigma_perm = build_cov_matrix(&model, &locs, perm.forward()).unwrap();
        let l = nalgebra::Cholesky::new(sigma_perm).unwrap().l();
        let gamma_dense = l.try_inverse().unwrap();
        let got = g.to_dense();
        for i in 0..28 {
            for j in 0..28 {
                assert_relative_eq!(got[(i, j)], gamma_dense[(i, j)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn full_conditioning_loglik_matches_dense() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let model = CovarianceModel::matern(1.0, 0.25, 1.5, 0.05);
        let locs = random_locs(&mut rng, 40, 2);
        let perm = order_random(40, 17);
        let sets = full_sets(40);
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        let y: Vec<f64> = (0..40).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ll = loglik(&g, &perm, &y, &MeanSpec::Zero).unwrap();
        let idx: Vec<usize> = (0..40).collect();
        let sigma = build_cov_matrix(&model, &locs, &idx).unwrap();
        let exact = dense_loglik(&sigma, &y);
        assert_relative_eq!(ll, exact, max_relative = 1e-8);
    }

    #[test]
    fn one_dimensional_markov_exactness() {
        // exponential kernel, sorted coordinate, single nearest neighbor:
        // the approximation is the exact likelihood
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let model = CovarianceModel::matern(1.0, 0.2, 0.5, 0.0);
        let locs = random_locs(&mut rng, 60, 1);
        let perm = order_sorted_coordinate(&locs, Axis::Coord(0)).unwrap();
        let sets = nn_ordered_brute(&locs, &perm, 1, Metric::Full).unwrap();
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        let y: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
        let ll = loglik(&g, &perm, &y, &MeanSpec::Zero).unwrap();
        let idx: Vec<usize> = (0..60).collect();
        let sigma = build_cov_matrix(&model, &locs, &idx).unwrap();
        assert_relative_eq!(ll, dense_loglik(&sigma, &y), max_relative = 1e-9);
    }

    #[test]
    fn grouped_with_singleton_blocks_is_bit_identical() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let model = CovarianceModel::matern(1.0, 0.15, 0.5, 0.01);
        let locs = random_locs(&mut rng, 50, 2);
        let perm = order_random(50, 1);
        let sets = nn_ordered_fast(&locs, &perm, 6, Metric::Full).unwrap();
        let g1 = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        let singles = BlockPartition::singletons(&sets);
        let g2 = build_gamma_tilde(&model, &locs, &perm, Conditioning::Grouped(&singles)).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn grouped_equals_ungrouped_on_expanded_sets() {
        // evaluating the expanded sets through the ungrouped path must give
        // the same factor as the blockwise path
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let model = CovarianceModel::matern(2.0, 0.2, 1.5, 0.1);
        let locs = random_locs(&mut rng, 70, 2);
        let perm = order_random(70, 2);
        let sets = nn_ordered_fast(&locs, &perm, 8, Metric::Full).unwrap();
        let part = group_blocks(&sets, 8);
        let grouped =
            build_gamma_tilde(&model, &locs, &perm, Conditioning::Grouped(&part)).unwrap();
        let expanded = part.to_expanded_neighbor_sets();
        let via_sets =
            build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&expanded)).unwrap();
        assert_eq!(grouped.indptr, via_sets.indptr);
        assert_eq!(grouped.indices, via_sets.indices);
        for (a, b) in grouped.data.iter().zip(&via_sets.data) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        let y: Vec<f64> = (0..70).map(|_| rng.random::<f64>()).collect();
        let la = loglik(&grouped, &perm, &y, &MeanSpec::Zero).unwrap();
        let lb = loglik(&via_sets, &perm, &y, &MeanSpec::Zero).unwrap();
        assert_relative_eq!(la, lb, max_relative = 1e-12);
    }

    #[test]
    fn decorrelation_moments_at_true_parameters() {
        // Var(Gamma Y)_i = (Gamma Sigma Gamma^T)_ii = 1 and the expected
        // quadratic form tr(Gamma^T Gamma Sigma) = n, both analytic
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let model = CovarianceModel::matern(1.7, 0.3, 0.5, 0.0);
        let locs = random_locs(&mut rng, 45, 2);
        let perm = order_random(45, 9);
        let sets = nn_ordered_fast(&locs, &perm, 7, Metric::Full).unwrap();
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        let sigma_perm = build_cov_matrix(&model, &locs, perm.forward()).unwrap();
        let gd = g.to_dense();
        let gsg = &gd * &sigma_perm * gd.transpose();
        let mut trace = 0.0;
        for i in 0..45 {
            assert_relative_eq!(gsg[(i, i)], 1.0, max_relative = 1e-10);
            trace += gsg[(i, i)];
        }
        assert_relative_eq!(trace, 45.0, max_relative = 1e-10);
    }

    #[test]
    fn diagonal_monotone_in_conditioning_sets() {
        // J1 subset J2 implies Gamma1_ii <= Gamma2_ii (BLUP variance cannot
        // increase with more predictors)
        let mut rng = ChaCha20Rng::seed_from_u64(16);
        let model = CovarianceModel::matern(1.0, 0.3, 1.0, 0.0);
        let locs = random_locs(&mut rng, 35, 2);
        let perm = order_random(35, 4);
        let j2: Vec<Vec<usize>> = (0..35)
            .map(|i| {
                let mut s: Vec<usize> = (0..i).filter(|_| rng.random::<f64>() < 0.5).collect();
                s.push(i);
                s
            })
            .collect();
        let j1: Vec<Vec<usize>> = j2
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut t: Vec<usize> = s[..s.len() - 1]
                    .iter()
                    .copied()
                    .filter(|_| rng.random::<f64>() < 0.6)
                    .collect();
                t.push(i);
                t
            })
            .collect();
        let s1 = NeighborSets::from_sets(j1).unwrap();
        let s2 = NeighborSets::from_sets(j2).unwrap();
        let g1 = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&s1)).unwrap();
        let g2 = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&s2)).unwrap();
        for i in 0..35 {
            assert!(g1.diag(i) <= g2.diag(i) + 1e-12, "row {i}");
        }
    }

    #[test]
    fn profile_beta_matches_gls_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let model = CovarianceModel::matern(1.2, 0.3, 0.5, 0.1);
        let n = 30;
        let locs = random_locs(&mut rng, n, 2);
        let perm = order_random(n, 21);
        let sets = full_sets(n);
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 3.0).collect();
        let x = DMatrix::from_element(n, 1, 1.0);
        let (beta, _) = profile_beta(&g, &perm, &x, &y).unwrap();
        // dense GLS: (1' S^-1 1)^-1 1' S^-1 y
        let idx: Vec<usize> = (0..n).collect();
        let sigma = build_cov_matrix(&model, &locs, &idx).unwrap();
        let chol = nalgebra::Cholesky::new(sigma).unwrap();
        let ones = nalgebra::DVector::from_element(n, 1.0);
        let yv = nalgebra::DVector::from_column_slice(&y);
        let s_inv_one = chol.solve(&ones);
        let gls = ones.dot(&chol.solve(&yv)) / ones.dot(&s_inv_one);
        assert_relative_eq!(beta[0], gls, max_relative = 1e-8);
    }

    #[test]
    fn profile_beta_exact_recovery_and_ols_limit() {
        // y exactly in the span of X: beta recovered, residual term zero
        let mut rng = ChaCha20Rng::seed_from_u64(18);
        let model = CovarianceModel::matern(1.0, 0.2, 0.5, 0.0);
        let n = 25;
        let locs = random_locs(&mut rng, n, 1);
        let perm = Permutation::identity(n);
        let sets = nn_ordered_brute(&locs, &perm, 3, Metric::Full).unwrap();
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        let mut x = DMatrix::zeros(n, 2);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = locs.point(i)[0];
        }
        let beta0 = [2.0, -0.7];
        let y: Vec<f64> = (0..n)
            .map(|i| beta0[0] + beta0[1] * locs.point(i)[0])
            .collect();
        let (beta, ll) = profile_beta(&g, &perm, &x, &y).unwrap();
        assert_relative_eq!(beta[0], beta0[0], max_relative = 1e-9);
        assert_relative_eq!(beta[1], beta0[1], max_relative = 1e-9);
        assert_relative_eq!(
            ll,
            -0.5 * n as f64 * LN_2PI + g.log_det(),
            max_relative = 1e-12
        );

        // p = 1 with Gamma = identity reduces to ordinary least squares
        let ident_sigma = CovarianceModel::matern(1.0, 1e-9, 0.5, 0.0);
        let far: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let far_locs = LocationSet::from_flat(far.clone(), 1).unwrap();
        let sets1 = nn_ordered_brute(&far_locs, &perm, 1, Metric::Full).unwrap();
        let gi = build_gamma_tilde(
            &ident_sigma,
            &far_locs,
            &perm,
            Conditioning::Ungrouped(&sets1),
        )
        .unwrap();
        let xcol = DMatrix::from_fn(n, 1, |i, _| far[i]);
        let yy: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (b, _) = profile_beta(&gi, &perm, &xcol, &yy).unwrap();
        let ols: f64 = far.iter().zip(&yy).map(|(a, b)| a * b).sum::<f64>()
            / far.iter().map(|a| a * a).sum::<f64>();
        assert_relative_eq!(b[0], ols, max_relative = 1e-10);
    }

    #[test]
    fn factorization_failure_reports_unit() {
        // coincident points, zero nugget, full conditioning: singular
        let model = CovarianceModel::matern(1.0, 0.1, 0.5, 0.0);
        let locs = LocationSet::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let perm = Permutation::identity(2);
        let sets = full_sets(2);
        let err =
            build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap_err();
        assert!(matches!(err, Error::Factorization { unit: 1 }));
        // jitter rescues it
        let jittered = model.with_jitter(1e-8);
        assert!(build_gamma_tilde(&jittered, &locs, &perm, Conditioning::Ungrouped(&sets)).is_ok());
    }

    #[test]
    fn forward_solve_matches_dense_triangular_solve() {
        let mut rng = ChaCha20Rng::seed_from_u64(19);
        let model = CovarianceModel::matern(1.0, 0.25, 1.0, 0.05);
        let locs = random_locs(&mut rng, 80, 2);
        let perm = order_random(80, 30);
        let sets = nn_ordered_fast(&locs, &perm, 10, Metric::Full).unwrap();
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        let b: Vec<f64> = (0..80).map(|_| rng.random::<f64>() - 0.5).collect();
        let y = g.forward_solve(&b);
        let dense = g.to_dense();
        let sol = dense
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&b))
            .unwrap();
        for i in 0..80 {
            assert!(
                (y[i] - sol[i]).abs() <= 1e-10,
                "row {i}: {} vs {}",
                y[i],
                sol[i]
            );
        }
    }

    #[test]
    fn length_mismatch_is_reported() {
        let model = CovarianceModel::matern(1.0, 0.1, 0.5, 0.0);
        let locs = LocationSet::from_flat(vec![0.0, 1.0], 1).unwrap();
        let perm = Permutation::identity(2);
        let sets = full_sets(2);
        let g = build_gamma_tilde(&model, &locs, &perm, Conditioning::Ungrouped(&sets)).unwrap();
        assert!(loglik(&g, &perm, &[1.0], &MeanSpec::Zero).is_err());
    }
}
