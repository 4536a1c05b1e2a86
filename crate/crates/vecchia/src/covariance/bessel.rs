//! Modified Bessel function of the second kind, `K_nu(x)`, for real order.
//!
//! Half-integer orders use the exact finite-sum closed form. All other
//! orders combine Temme's series (`x <= 2`) with a Steed continued fraction
//! (`x > 2`) for an order reduced to `[-1/2, 1/2]`, followed by the stable
//! upward recurrence `K_{v+1} = K_{v-1} + (2v/x) K_v`. Relative accuracy is
//! near machine precision over `nu in (0, 10]`, `x in (1e-8, 50]`.

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 1000;

/// Tolerance inside which an order counts as a half-integer.
pub const HALF_INTEGER_TOL: f64 = 1e-12;

/// `K_nu(x)` for `nu > 0`, `x > 0`.
///
/// Fails with a domain error outside that range and with an overflow error
/// when the result is not representable in an `f64` (tiny `x` at large
/// order). Underflow toward zero for very large `x` is returned as-is.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("bessel_k requires x > 0, got {x}")));
    }
    if !nu.is_finite() || nu <= 0.0 {
        return Err(Error::Domain(format!("bessel_k requires nu > 0, got {nu}")));
    }
    let value = match half_integer_order(nu) {
        Some(p) => bessel_k_half_integer(p, x),
        None => bessel_k_general(nu, x),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow(format!(
            "bessel_k({nu}, {x}) is not representable; no scaled variant is implemented"
        )))
    }
}

/// Returns `p` when `nu` is within [`HALF_INTEGER_TOL`] of `p + 1/2`.
pub(crate) fn half_integer_order(nu: f64) -> Option<u32> {
    let p = (nu - 0.5).round();
    if p >= 0.0 && (nu - 0.5 - p).abs() <= HALF_INTEGER_TOL {
        Some(p as u32)
    } else {
        None
    }
}

/// Closed form for `K_{p+1/2}(x)`:
/// `sqrt(pi/(2x)) e^{-x} sum_{k=0}^{p} (p+k)!/(k!(p-k)!) (2x)^{-k}`.
pub(crate) fn bessel_k_half_integer(p: u32, x: f64) -> f64 {
    let mut coeff = 1.0;
    let mut sum = 1.0;
    let inv2x = 0.5 / x;
    for k in 0..p {
        let (kf, pf) = (k as f64, p as f64);
        coeff *= (pf + kf + 1.0) * (pf - kf) / (kf + 1.0);
        sum += coeff * inv2x.powi(k as i32 + 1);
    }
    (std::f64::consts::PI * inv2x).sqrt() * (-x).exp() * sum
}

/// General-order evaluation: reduce to `mu in [-1/2, 1/2)`, evaluate the pair
/// `(K_mu, K_{mu+1})`, then recur upward. Exposed to the crate so tests can
/// pit it against the half-integer closed forms at exactly half-integer order.
pub(crate) fn bessel_k_general(nu: f64, x: f64) -> f64 {
    let steps = (nu + 0.5).floor() as usize;
    let mu = nu - steps as f64;
    let (mut k0, mut k1) = if x <= 2.0 {
        temme_series(mu, x)
    } else {
        steed_cf2(mu, x)
    };
    for l in 1..=steps {
        let next = k0 + 2.0 * (mu + l as f64) / x * k1;
        k0 = k1;
        k1 = next;
    }
    k0
}

/// Temme's series for `(K_mu(x), K_{mu+1}(x))`, `|mu| <= 1/2`, `0 < x <= 2`.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = std::f64::consts::PI * mu;
    let fact = if pimu.abs() < EPS {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let log_term = -x2.ln();
    let e = mu * log_term;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, inv_gamma_1p, inv_gamma_1m) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * log_term);
    let mut sum = ff;
    let e_exp = e.exp();
    let mut p = 0.5 * e_exp / inv_gamma_1p;
    let mut q = 0.5 / (e_exp * inv_gamma_1m);
    let mut c = 1.0;
    let d = x2 * x2;
    let mut sum1 = p;
    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= d / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// Steed's continued fraction CF2 for `(K_mu(x), K_{mu+1}(x))`, `x > 2`.
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (mu + x + 0.5 - h) / x;
    (k0, k1)
}

/// Coefficients of `1/Gamma(z) = sum c_k z^k`, published digit strings kept
/// verbatim.
#[allow(clippy::excessive_precision)]
const INV_GAMMA_COEFFS: [f64; 26] = [
    1.000000000000000000,
    0.577215664901532861,
    -0.655878071520253881,
    -0.042002635034095236,
    0.166538611382291490,
    -0.042197734555544337,
    -0.009621971527876974,
    0.007218943246663100,
    -0.001165167591859065,
    -0.000215241674114951,
    0.000128050282388116,
    -0.000020134854780788,
    -0.000001250493482143,
    0.000001133027231981,
    -0.000000205633841698,
    0.000000006116095104,
    0.000000005002007644,
    -0.000000001181274570,
    0.000000000104342671,
    0.000000000007782263,
    -0.000000000003696806,
    0.000000000000510037,
    -0.000000000000020583,
    -0.000000000000005348,
    0.000000000000001227,
    -0.000000000000000118,
];

/// Auxiliary gamma combinations for Temme's series, free of the `mu -> 0`
/// cancellation:
/// `gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu)`, `gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2`,
/// plus `1/Gamma(1+mu)` and `1/Gamma(1-mu)` themselves.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    // 1/Gamma(1 +/- mu) = sum_k c_k (+/-mu)^{k-1}; split into even/odd parts in mu.
    let u = mu * mu;
    let mut even = 0.0; // c_1 + c_3 mu^2 + ...
    let mut odd = 0.0; // c_2 + c_4 mu^2 + ...
    for k in (0..INV_GAMMA_COEFFS.len()).rev() {
        if k % 2 == 0 {
            even = even * u + INV_GAMMA_COEFFS[k];
        } else {
            odd = odd * u + INV_GAMMA_COEFFS[k];
        }
    }
    let gam1 = -odd;
    let gam2 = even;
    let inv_gamma_1p = gam2 - mu * gam1;
    let inv_gamma_1m = gam2 + mu * gam1;
    (gam1, gam2, inv_gamma_1p, inv_gamma_1m)
}
