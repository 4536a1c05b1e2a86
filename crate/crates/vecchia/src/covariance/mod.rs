//! Covariance models (Matérn family and its space-time variant), observation
//! locations, and dense covariance-matrix assembly.

mod bessel;

pub use bessel::bessel_k;

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Which kernel family a [`CovarianceModel`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// Isotropic Matérn on the full coordinate vector.
    MaternIsotropic,
    /// Matérn evaluated on the scaled space-time distance
    /// `sqrt(|dx|^2/a1^2 + dt^2/a2^2)`, isotropic in space and stationary in
    /// time with separate spatial and temporal ranges.
    MaternSpaceTime,
}

/// Covariance parameters: `M(r) = s2 / (Gamma(v) 2^{v-1}) (r/a)^v K_v(r/a)`
/// plus an additive nugget on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub family: KernelFamily,
    /// Marginal variance sigma^2 (> 0).
    pub variance: f64,
    /// Range `a` (spatial range `a1` for the space-time family; > 0).
    pub range: f64,
    /// Temporal range `a2` (> 0; only read by the space-time family).
    pub time_range: f64,
    /// Smoothness `v` (> 0).
    pub smoothness: f64,
    /// Nugget variance tau^2 (>= 0), attached to observation indices.
    pub nugget: f64,
    /// Constant mean, used when no design matrix is supplied.
    pub mean: f64,
    /// Extra diagonal mass added during matrix assembly to stabilize
    /// factorizations of near-duplicate locations. Not a model parameter.
    pub jitter: f64,
}

impl CovarianceModel {
    pub fn matern(variance: f64, range: f64, smoothness: f64, nugget: f64) -> Self {
        Self {
            family: KernelFamily::MaternIsotropic,
            variance,
            range,
            time_range: 1.0,
            smoothness,
            nugget,
            mean: 0.0,
            jitter: 0.0,
        }
    }

    pub fn matern_spacetime(
        variance: f64,
        spatial_range: f64,
        time_range: f64,
        smoothness: f64,
        nugget: f64,
    ) -> Self {
        Self {
            family: KernelFamily::MaternSpaceTime,
            variance,
            range: spatial_range,
            time_range,
            smoothness,
            nugget,
            mean: 0.0,
            jitter: 0.0,
        }
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("variance", self.variance),
            ("range", self.range),
            ("smoothness", self.smoothness),
        ];
        for (name, v) in pos {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.family == KernelFamily::MaternSpaceTime
            && (!self.time_range.is_finite() || self.time_range <= 0.0)
        {
            return Err(Error::Domain(format!(
                "time_range must be positive, got {}",
                self.time_range
            )));
        }
        if !self.nugget.is_finite() || self.nugget < 0.0 {
            return Err(Error::Domain(format!(
                "nugget must be nonnegative, got {}",
                self.nugget
            )));
        }
        Ok(())
    }

    /// Free-parameter vector in a fixed order:
    /// isotropic `[variance, range, smoothness, nugget]`,
    /// space-time `[variance, range, time_range, smoothness, nugget]`.
    pub fn params(&self) -> Vec<f64> {
        match self.family {
            KernelFamily::MaternIsotropic => {
                vec![self.variance, self.range, self.smoothness, self.nugget]
            }
            KernelFamily::MaternSpaceTime => vec![
                self.variance,
                self.range,
                self.time_range,
                self.smoothness,
                self.nugget,
            ],
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self.family {
            KernelFamily::MaternIsotropic => &["variance", "range", "smoothness", "nugget"],
            KernelFamily::MaternSpaceTime => {
                &["variance", "range", "time_range", "smoothness", "nugget"]
            }
        }
    }

    /// Copy of the model with the parameter vector replaced (same order as
    /// [`CovarianceModel::params`]).
    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let mut m = self.clone();
        match self.family {
            KernelFamily::MaternIsotropic => {
                if p.len() != 4 {
                    return Err(Error::InvalidArgument(format!(
                        "expected 4 parameters, got {}",
                        p.len()
                    )));
                }
                [m.variance, m.range, m.smoothness, m.nugget] = [p[0], p[1], p[2], p[3]];
            }
            KernelFamily::MaternSpaceTime => {
                if p.len() != 5 {
                    return Err(Error::InvalidArgument(format!(
                        "expected 5 parameters, got {}",
                        p.len()
                    )));
                }
                [m.variance, m.range, m.time_range, m.smoothness, m.nugget] =
                    [p[0], p[1], p[2], p[3], p[4]];
            }
        }
        Ok(m)
    }
}

/// Distance convention used by orderings and neighbor searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// Euclidean distance over every coordinate.
    #[default]
    Full,
    /// Euclidean distance over the spatial coordinates only, ignoring the
    /// time coordinate when one is present.
    Spatial,
}

/// A set of `n` observation locations in `R^d`, optionally carrying a time
/// coordinate as the last axis (space-time and sphere-time data).
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSet {
    coords: Vec<f64>, // row-major, n x dim
    n: usize,
    dim: usize,
    time_axis: Option<usize>,
}

impl LocationSet {
    /// Build from row-major flat coordinates.
    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "dimension must be at least 1".into(),
            ));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not fill rows of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coordinates must be finite".into()));
        }
        let n = coords.len() / dim;
        Ok(Self {
            coords,
            n,
            dim,
            time_axis: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("rows of unequal dimension".into()));
        }
        Self::from_flat(rows.concat(), dim)
    }

    /// Spatial points plus a time coordinate stored as the last axis.
    pub fn with_time(spatial: Vec<f64>, dim: usize, times: Vec<f64>) -> Result<Self> {
        let base = Self::from_flat(spatial, dim)?;
        if times.len() != base.n {
            return Err(Error::DimensionMismatch(format!(
                "{} time stamps for {} points",
                times.len(),
                base.n
            )));
        }
        let mut coords = Vec::with_capacity(base.n * (dim + 1));
        for (i, t) in times.iter().enumerate() {
            coords.extend_from_slice(base.point(i));
            coords.push(*t);
        }
        let mut out = Self::from_flat(coords, dim + 1)?;
        out.time_axis = Some(dim);
        Ok(out)
    }

    /// (lon, lat, t) triples in degrees, converted to unit 3-vectors so that
    /// spatial distance is Euclidean (chordal) distance on the sphere.
    pub fn sphere_time(points: &[(f64, f64, f64)]) -> Result<Self> {
        let mut spatial = Vec::with_capacity(points.len() * 3);
        let mut times = Vec::with_capacity(points.len());
        for &(lon, lat, t) in points {
            let (lam, phi) = (lon.to_radians(), lat.to_radians());
            spatial.extend_from_slice(&[phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]);
            times.push(t);
        }
        Self::with_time(spatial, 3, times)
    }

    /// Regular grid in the unit cube, one entry in `shape` per dimension.
    /// Along each axis the coordinates are `0, 1/(g-1), ..., 1`.
    pub fn regular_grid(shape: &[usize]) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidArgument(
                "grid shape must be nonempty and positive".into(),
            ));
        }
        let d = shape.len();
        let n: usize = shape.iter().product();
        let mut coords = Vec::with_capacity(n * d);
        let mut idx = vec![0usize; d];
        for _ in 0..n {
            for (k, &g) in idx.iter().zip(shape) {
                coords.push(if g == 1 {
                    0.5
                } else {
                    *k as f64 / (g - 1) as f64
                });
            }
            for ax in (0..d).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self::from_flat(coords, d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time_axis(&self) -> Option<usize> {
        self.time_axis
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Axes participating in distance under `metric`.
    pub fn metric_axes(&self, metric: Metric) -> std::ops::Range<usize> {
        match (metric, self.time_axis) {
            (Metric::Spatial, Some(t)) => 0..t,
            _ => 0..self.dim,
        }
    }

    pub fn dist2(&self, i: usize, j: usize, metric: Metric) -> f64 {
        let (a, b) = (self.point(i), self.point(j));
        let mut s = 0.0;
        for ax in self.metric_axes(metric) {
            let d = a[ax] - b[ax];
            s += d * d;
        }
        s
    }

    pub fn distance(&self, i: usize, j: usize, metric: Metric) -> f64 {
        self.dist2(i, j, metric).sqrt()
    }

    /// Coordinate mean over the metric axes.
    pub fn mean_point(&self, metric: Metric) -> Vec<f64> {
        let axes = self.metric_axes(metric);
        let mut mean = vec![0.0; axes.len()];
        for i in 0..self.n {
            let p = self.point(i);
            for (m, ax) in mean.iter_mut().zip(axes.clone()) {
                *m += p[ax];
            }
        }
        for m in &mut mean {
            *m /= self.n.max(1) as f64;
        }
        mean
    }

    /// Concatenate two sets with identical layout (used to append prediction
    /// locations after observations).
    pub fn concat(&self, other: &LocationSet) -> Result<LocationSet> {
        if self.dim != other.dim || self.time_axis != other.time_axis {
            return Err(Error::DimensionMismatch(
                "cannot concatenate location sets with different layouts".into(),
            ));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut out = LocationSet::from_flat(coords, self.dim)?;
        out.time_axis = self.time_axis;
        Ok(out)
    }
}

/// Covariance between two points. Value-identical arguments are treated as
/// the same observation and receive the nugget; matrix assembly applies the
/// nugget by index instead, so coincident but distinct observations share
/// only the smooth part.
pub fn kernel(model: &CovarianceModel, p1: &[f64], p2: &[f64]) -> Result<f64> {
    model.validate()?;
    let eval = KernelEval::new(model)?;
    let expected = match model.family {
        KernelFamily::MaternIsotropic => p1.len(),
        KernelFamily::MaternSpaceTime => {
            if p1.len() < 2 {
                return Err(Error::DimensionMismatch(
                    "space-time kernel needs at least one spatial and one time coordinate".into(),
                ));
            }
            p1.len()
        }
    };
    if p1.len() != p2.len() || p2.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "points of dimension {} and {}",
            p1.len(),
            p2.len()
        )));
    }
    let smooth = eval.cov(p1, p2);
    Ok(if p1 == p2 {
        smooth + model.nugget
    } else {
        smooth
    })
}

/// Precomputed kernel evaluator; hoists the Matérn normalization and the
/// half-integer fast path out of inner assembly loops.
#[derive(Debug, Clone)]
pub(crate) struct KernelEval {
    family: KernelFamily,
    variance: f64,
    inv_range: f64,
    inv_time_range: f64,
    form: MaternForm,
}

#[derive(Debug, Clone)]
enum MaternForm {
    /// corr(z) = e^{-z} sum_k coeff[k] z^k  (half-integer smoothness)
    HalfInteger { coeffs: Vec<f64> },
    /// corr(z) = norm z^v K_v(z)
    General { nu: f64, norm: f64 },
}

impl KernelEval {
    pub(crate) fn new(model: &CovarianceModel) -> Result<Self> {
        model.validate()?;
        let nu = model.smoothness;
        let form = match bessel::half_integer_order(nu) {
            Some(p) => {
                // corr(z) = e^{-z} sum_{k=0}^{p} a_{p-k} p! 2^{k} / (2p)! z^{k}
                // with a_j = (p+j)!/(j!(p-j)!) from the closed-form K_{p+1/2}.
                let p = p as usize;
                let mut a = vec![0.0; p + 1];
                a[0] = 1.0;
                for j in 0..p {
                    let (jf, pf) = (j as f64, p as f64);
                    a[j + 1] = a[j] * (pf + jf + 1.0) * (pf - jf) / (jf + 1.0);
                }
                let mut coeffs = vec![0.0; p + 1];
                let mut scale = 1.0; // p! 2^{p-k} / (2p)! built iteratively
                for j in (p + 1)..=(2 * p) {
                    scale /= j as f64;
                }
                // scale now = p!/(2p)!; the z^k coefficient is a_{p-k} scale 2^k
                for k in 0..=p {
                    coeffs[k] = a[p - k] * scale * (2.0f64).powi(k as i32);
                }
                MaternForm::HalfInteger { coeffs }
            }
            None => {
                let norm = (-ln_gamma(nu) - (nu - 1.0) * std::f64::consts::LN_2).exp();
                MaternForm::General { nu, norm }
            }
        };
        Ok(Self {
            family: model.family,
            variance: model.variance,
            inv_range: 1.0 / model.range,
            inv_time_range: 1.0 / model.time_range,
            form,
        })
    }

    /// Matérn correlation at unit range; `corr(0) = 1`, `corr(z) <= 1`.
    pub(crate) fn correlation(&self, z: f64) -> f64 {
        // The z -> 0 limit of z^v K_v(z) is handled by an explicit branch;
        // below 1e-25 the correlation deficit is under f64 resolution for
        // any smoothness above 0.3.
        if z < 1e-25 {
            return 1.0;
        }
        match &self.form {
            MaternForm::HalfInteger { coeffs } => {
                let mut poly = 0.0;
                for &c in coeffs.iter().rev() {
                    poly = poly * z + c;
                }
                (-z).exp() * poly
            }
            MaternForm::General { nu, norm } => {
                if z > 705.0 {
                    return 0.0; // e^{-z} underflows; correlation is zero to f64
                }
                norm * z.powf(*nu) * bessel::bessel_k_general(*nu, z)
            }
        }
    }

    /// Scaled distance entering the Matérn: plain `r/range` for the isotropic
    /// family, `sqrt(|dx|^2/a1^2 + dt^2/a2^2)` for space-time.
    fn scaled_distance(&self, p1: &[f64], p2: &[f64]) -> f64 {
        match self.family {
            KernelFamily::MaternIsotropic => {
                let mut s = 0.0;
                for (a, b) in p1.iter().zip(p2) {
                    let d = a - b;
                    s += d * d;
                }
                s.sqrt() * self.inv_range
            }
            KernelFamily::MaternSpaceTime => {
                let t = p1.len() - 1;
                let mut s = 0.0;
                for (a, b) in p1[..t].iter().zip(&p2[..t]) {
                    let d = a - b;
                    s += d * d;
                }
                let dt = (p1[t] - p2[t]) * self.inv_time_range;
                (s * self.inv_range * self.inv_range + dt * dt).sqrt()
            }
        }
    }

    /// Smooth covariance (no nugget) between two points.
    pub(crate) fn cov(&self, p1: &[f64], p2: &[f64]) -> f64 {
        self.variance * self.correlation(self.scaled_distance(p1, p2))
    }
}

/// Dense covariance matrix over the listed location indices: entry `(a, b)`
/// is the kernel between `locs[idx[a]]` and `locs[idx[b]]`, with nugget and
/// jitter on the diagonal. Warns once when distinct indices share a location
/// and there is no nugget or jitter to keep the matrix nonsingular.
pub fn build_cov_matrix(
    model: &CovarianceModel,
    locs: &LocationSet,
    idx: &[usize],
) -> Result<DMatrix<f64>> {
    let eval = KernelEval::new(model)?;
    let k = idx.len();
    if let Some(&bad) = idx.iter().find(|&&i| i >= locs.len()) {
        return Err(Error::InvalidArgument(format!(
            "index {bad} out of bounds for {} locations",
            locs.len()
        )));
    }
    let mut out = DMatrix::zeros(k, k);
    let mut warned = false;
    for a in 0..k {
        let pa = locs.point(idx[a]);
        out[(a, a)] = model.variance + model.nugget + model.jitter;
        for b in (a + 1)..k {
            let v = eval.cov(pa, locs.point(idx[b]));
            if !warned
                && model.nugget == 0.0
                && model.jitter == 0.0
                && idx[a] != idx[b]
                && pa == locs.point(idx[b])
            {
                log::warn!(
                    "duplicate locations at indices {} and {} with zero nugget; \
                     the covariance matrix is singular (consider a jitter)",
                    idx[a],
                    idx[b]
                );
                warned = true;
            }
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_zero_distance_is_variance_plus_nugget() {
        let m = CovarianceModel::matern(1.0, 0.1, 0.5, 0.0);
        let v = kernel(&m, &[0.3, 0.4], &[0.3, 0.4]).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        let m = CovarianceModel::matern(2.5, 0.1, 1.7, 0.3);
        let v = kernel(&m, &[0.3, 0.4], &[0.3, 0.4]).unwrap();
        assert_relative_eq!(v, 2.8, max_relative = 1e-12);
    }

    #[test]
    fn kernel_exponential_closed_form() {
        // v = 1/2: sigma^2 exp(-r/a)
        let m = CovarianceModel::matern(1.0, 0.1, 0.5, 0.0);
        let v = kernel(&m, &[0.0], &[0.1]).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp(), max_relative = 1e-14);
        assert!((v - 0.3678794).abs() < 5e-8);
    }

    #[test]
    fn kernel_matern_32_closed_form() {
        // v = 3/2: sigma^2 (1 + r/a) exp(-r/a)
        let m = CovarianceModel::matern(2.0, 0.2, 1.5, 0.0);
        let v = kernel(&m, &[0.0, 0.0], &[0.2, 0.0]).unwrap();
        assert_relative_eq!(v, 2.0 * 2.0 * (-1.0f64).exp(), max_relative = 1e-14);
        assert!((v - 1.4715178).abs() < 5e-8);
    }

    #[test]
    fn general_smoothness_matches_half_integer_forms() {
        // The general Bessel path, probed at exactly half-integer smoothness,
        // agrees with the closed forms over a wide range of scaled distances.
        type ClosedForm = fn(f64) -> f64;
        let cases: [(f64, ClosedForm); 3] = [
            (0.5, |z| (-z).exp()),
            (1.5, |z| (1.0 + z) * (-z).exp()),
            (2.5, |z| (1.0 + z + z * z / 3.0) * (-z).exp()),
        ];
        for (nu, cf) in cases {
            let norm = (-ln_gamma(nu) - (nu - 1.0) * std::f64::consts::LN_2).exp();
            let mut z: f64 = 1e-6;
            while z <= 20.0 {
                let general = norm * z.powf(nu) * bessel::bessel_k_general(nu, z);
                let closed = cf(z);
                assert!(
                    ((general - closed) / closed).abs() < 1e-9,
                    "nu={nu} z={z}: general {general} closed {closed}"
                );
                z *= 3.7;
            }
        }
    }

    #[test]
    fn correlation_monotone_decreasing() {
        for &nu in &[0.5, 1.0, 1.5] {
            let eval = KernelEval::new(&CovarianceModel::matern(1.0, 1.0, nu, 0.0)).unwrap();
            let mut prev = eval.correlation(1e-9);
            assert!(prev <= 1.0 + 1e-15);
            let mut z = 1e-4;
            while z < 30.0 {
                let c = eval.correlation(z);
                assert!(c <= prev + 1e-15, "nu={nu} z={z}");
                assert!(c <= 1.0);
                prev = c;
                z *= 1.31;
            }
        }
    }

    #[test]
    fn spacetime_kernel_uses_scaled_distance() {
        let m = CovarianceModel::matern_spacetime(1.0, 0.5, 2.0, 0.5, 0.0);
        // pure spatial offset r: corr = exp(-r/a1)
        let locs = LocationSet::with_time(vec![0.0, 0.0, 0.25, 0.0], 2, vec![0.0, 0.0]).unwrap();
        let v = kernel(&m, locs.point(0), locs.point(1)).unwrap();
        assert_relative_eq!(v, (-0.5f64).exp(), max_relative = 1e-13);
        // pure temporal offset dt: corr = exp(-dt/a2)
        let locs = LocationSet::with_time(vec![0.0, 0.0, 0.0, 0.0], 2, vec![0.0, 1.0]).unwrap();
        let v = kernel(&m, locs.point(0), locs.point(1)).unwrap();
        assert_relative_eq!(v, (-0.5f64).exp(), max_relative = 1e-13);
        // mixed: d12 = sqrt(r^2/a1^2 + dt^2/a2^2)
        let locs = LocationSet::with_time(vec![0.0, 0.0, 0.3, 0.4], 2, vec![0.0, 1.5]).unwrap();
        let d12 = (1.0f64 + 0.5625).sqrt();
        let v = kernel(&m, locs.point(0), locs.point(1)).unwrap();
        assert_relative_eq!(v, (-d12).exp(), max_relative = 1e-13);
    }

    #[test]
    fn cov_matrix_single_index_and_coincident_pair() {
        let m = CovarianceModel::matern(1.5, 0.1, 0.5, 0.25);
        let locs = LocationSet::from_rows(&[vec![0.1, 0.2], vec![0.1, 0.2]]).unwrap();
        let one = build_cov_matrix(&m, &locs, &[0]).unwrap();
        assert_eq!(one.nrows(), 1);
        assert_relative_eq!(one[(0, 0)], 1.75, max_relative = 1e-14);
        // coincident points: nugget on the diagonal only
        let two = build_cov_matrix(&m, &locs, &[0, 1]).unwrap();
        assert_relative_eq!(two[(0, 1)], 1.5, max_relative = 1e-14);
        assert_relative_eq!(two[(1, 1)], 1.75, max_relative = 1e-14);
        assert_eq!(two[(0, 1)], two[(1, 0)]);
    }

    #[test]
    fn exponential_inverse_is_tridiagonal_in_one_dimension() {
        // Markov property of the exponential kernel on a line: the dense
        // inverse (computed by an independent nalgebra solve) has zero
        // in the far corners.
        let m = CovarianceModel::matern(1.3, 0.4, 0.5, 0.0);
        let locs = LocationSet::from_rows(&[vec![0.0], vec![0.25], vec![0.5]]).unwrap();
        let sigma = build_cov_matrix(&m, &locs, &[0, 1, 2]).unwrap();
        let inv = sigma.try_inverse().unwrap();
        let scale = inv[(1, 1)].abs();
        assert!(inv[(0, 2)].abs() < 1e-12 * scale, "corner {}", inv[(0, 2)]);
        assert!(inv[(2, 0)].abs() < 1e-12 * scale);
    }

    #[test]
    fn cov_matrix_symmetric_and_factorizable() {
        let m = CovarianceModel::matern(2.0, 0.3, 1.2, 0.1);
        let locs = LocationSet::regular_grid(&[4, 4]).unwrap();
        let idx: Vec<usize> = (0..locs.len()).collect();
        let sigma = build_cov_matrix(&m, &locs, &idx).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(sigma[(a, b)], sigma[(b, a)]);
            }
        }
        assert!(nalgebra::Cholesky::new(sigma).is_some());
    }

    #[test]
    fn sphere_time_conversion() {
        let locs = LocationSet::sphere_time(&[(0.0, 0.0, 3.5), (90.0, 0.0, 4.0)]).unwrap();
        let p = locs.point(0);
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(p[2], 0.0, epsilon = 1e-15);
        assert_relative_eq!(p[3], 3.5, epsilon = 1e-15);
        let q = locs.point(1);
        assert_relative_eq!(q[1], 1.0, epsilon = 1e-15);
        // spatial-only metric ignores the time axis
        assert_relative_eq!(locs.dist2(0, 1, Metric::Spatial), 2.0, epsilon = 1e-12);
        assert_relative_eq!(locs.dist2(0, 1, Metric::Full), 2.25, epsilon = 1e-12);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(CovarianceModel::matern(0.0, 0.1, 0.5, 0.0)
            .validate()
            .is_err());
        assert!(CovarianceModel::matern(1.0, -0.1, 0.5, 0.0)
            .validate()
            .is_err());
        assert!(CovarianceModel::matern(1.0, 0.1, 0.0, 0.0)
            .validate()
            .is_err());
        assert!(CovarianceModel::matern(1.0, 0.1, 0.5, -1e-9)
            .validate()
            .is_err());
        assert!(CovarianceModel::matern_spacetime(1.0, 0.1, 0.0, 0.5, 0.0)
            .validate()
            .is_err());
        assert!(CovarianceModel::matern(1.0, 0.1, 0.5, 0.0)
            .validate()
            .is_ok());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = CovarianceModel::matern(1.0, 0.1, 0.5, 0.0);
        assert!(kernel(&m, &[0.0, 0.0], &[0.0]).is_err());
    }
}
