//! Derivative-free simplex (Nelder-Mead) minimization.
//!
//! Used for maximizing approximate likelihoods over log-transformed
//! covariance parameters and for tuning baseline approximations. Objectives
//! may return `f64::INFINITY` to reject a point (failed factorizations and
//! the like); the simplex simply moves away from it.

/// Nelder-Mead settings. `init_step` is the absolute coordinate offset used
/// to build the initial simplex around the starting point (parameters are
/// typically logs, so 0.25 perturbs by ~28%).
#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_evals: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub init_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            ftol: 1e-10,
            xtol: 1e-6,
            init_step: 0.25,
        }
    }
}

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimize `f` starting from `x0`. The best point seen is always
    /// returned, converged or not, and is never worse than `f(x0)`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> OptimOutcome {
        let dim = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        if dim == 0 {
            let fx = eval(x0, &mut evals);
            return OptimOutcome {
                x: x0.to_vec(),
                fx,
                evals,
                converged: true,
            };
        }

        // simplex of dim + 1 vertices
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for i in 0..dim {
            let mut v = x0.to_vec();
            v[i] += self.init_step;
            simplex.push(v);
        }
        let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut converged = false;
        while evals < self.max_evals {
            // order ascending by objective
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
            let best = order[0];
            let worst = order[dim];
            let second_worst = order[dim - 1];

            let f_spread = fvals[worst] - fvals[best];
            let x_spread = simplex
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
                .fold(0.0f64, f64::max);
            if fvals[best].is_finite()
                && (f_spread <= self.ftol * (1.0 + fvals[best].abs())
                    || x_spread <= self.xtol * (1.0 + max_abs(&simplex[best])))
            {
                converged = true;
                break;
            }
            if !fvals[best].is_finite() {
                break; // nothing evaluable anywhere near the simplex
            }

            // centroid of all but the worst
            let mut centroid = vec![0.0; dim];
            for (k, v) in simplex.iter().enumerate() {
                if k != worst {
                    for (c, x) in centroid.iter_mut().zip(v) {
                        *c += x;
                    }
                }
            }
            for c in &mut centroid {
                *c /= dim as f64;
            }

            let blend = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[worst])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let reflected = blend(alpha);
            let f_ref = eval(&reflected, &mut evals);
            if f_ref < fvals[best] {
                let expanded = blend(gamma);
                let f_exp = eval(&expanded, &mut evals);
                if f_exp < f_ref {
                    simplex[worst] = expanded;
                    fvals[worst] = f_exp;
                } else {
                    simplex[worst] = reflected;
                    fvals[worst] = f_ref;
                }
            } else if f_ref < fvals[second_worst] {
                simplex[worst] = reflected;
                fvals[worst] = f_ref;
            } else {
                let contracted = if f_ref < fvals[worst] {
                    blend(rho)
                } else {
                    blend(-rho)
                };
                let f_con = eval(&contracted, &mut evals);
                if f_con < fvals[worst].min(f_ref) {
                    simplex[worst] = contracted;
                    fvals[worst] = f_con;
                } else {
                    // shrink toward the best vertex
                    let best_x = simplex[best].clone();
                    for k in 0..=dim {
                        if k == best {
                            continue;
                        }
                        for (x, b) in simplex[k].iter_mut().zip(&best_x) {
                            *x = b + sigma * (*x - b);
                        }
                        fvals[k] = eval(&simplex[k].clone(), &mut evals);
                    }
                }
            }
        }
        let mut best = 0;
        for k in 1..=dim {
            if fvals[k] < fvals[best] {
                best = k;
            }
        }
        OptimOutcome {
            x: simplex[best].clone(),
            fx: fvals[best],
            evals,
            converged,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let nm = NelderMead::default();
        let out = nm.minimize(
            |x| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2),
            &[0.0, 0.0],
        );
        assert!(out.converged);
        assert!((out.x[0] - 3.0).abs() < 1e-5, "{:?}", out.x);
        assert!((out.x[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let nm = NelderMead {
            max_evals: 5000,
            ..Default::default()
        };
        let out = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-4, "{:?}", out.x);
        assert!((out.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn never_returns_worse_than_start() {
        let nm = NelderMead {
            max_evals: 12,
            ..Default::default()
        };
        let f = |x: &[f64]| x[0].sin() + x[0] * x[0] * 0.1;
        let start = 2.0;
        let out = nm.minimize(f, &[start]);
        assert!(out.fx <= f(&[start]));
    }

    #[test]
    fn tolerates_infinite_regions() {
        // objective undefined (infinite) for x < 0; minimum at x = 1
        let nm = NelderMead::default();
        let out = nm.minimize(
            |x| {
                if x[0] < 0.0 {
                    f64::INFINITY
                } else {
                    (x[0] - 1.0).powi(2)
                }
            },
            &[0.2],
        );
        assert!((out.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn reports_non_convergence_on_tiny_budget() {
        let nm = NelderMead {
            max_evals: 4,
            ..Default::default()
        };
        let out = nm.minimize(|x| (x[0] - 5.0).powi(2), &[0.0]);
        assert!(!out.converged);
    }
}
