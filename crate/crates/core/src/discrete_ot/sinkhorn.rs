use alloc::vec;
use alloc::vec::Vec;

use super::{Coupling, PointCloud};
use crate::error::{invalid, numerical, Error, Result};
use crate::linalg::Matrix;
use crate::math::{exp, ln};

/// Entropic solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl SinkhornParams {
    /// `epsilon = 0.05 * mean(C)`, 1000 iterations, tolerance 1e-6.
    pub fn default_for(cost: &Matrix) -> Self {
        let n = cost.as_slice().len().max(1);
        let mean = cost.as_slice().iter().sum::<f64>() / n as f64;
        Self {
            epsilon: 0.05 * mean.max(f64::MIN_POSITIVE),
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

// log Σ exp(v), skipping -inf terms.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.map(|v| exp(v - max)).sum();
    max + ln(s)
}

/// Entropy-regularized transport by alternating marginal scaling of the dual
/// potentials in the log domain. The returned cost is `⟨plan, C⟩` without the
/// entropy term.
pub fn sinkhorn(
    source: &PointCloud,
    target: &PointCloud,
    cost: &Matrix,
    params: SinkhornParams,
) -> Result<Coupling> {
    sinkhorn_interruptible(source, target, cost, params, &mut || false)
}

/// [`sinkhorn`] polling `interrupt` once per iteration; a `true` aborts with
/// `Error::Interrupted`.
pub fn sinkhorn_interruptible(
    source: &PointCloud,
    target: &PointCloud,
    cost: &Matrix,
    params: SinkhornParams,
    interrupt: &mut dyn FnMut() -> bool,
) -> Result<Coupling> {
    let a = source.weights();
    let b = target.weights();
    let (ns, nt) = (a.len(), b.len());
    if cost.shape() != (ns, nt) {
        return Err(invalid!(
            "cost matrix is {}x{} but clouds have {ns} and {nt} points",
            cost.rows(),
            cost.cols()
        ));
    }
    if !(params.epsilon > 0.0) || !params.epsilon.is_finite() {
        return Err(invalid!("epsilon must be positive, got {}", params.epsilon));
    }
    if !(params.tol > 0.0) {
        return Err(invalid!("tolerance must be positive, got {}", params.tol));
    }
    let eps = params.epsilon;
    let log_a: Vec<f64> = a.iter().map(|&w| if w > 0.0 { ln(w) } else { f64::NEG_INFINITY }).collect();
    let log_b: Vec<f64> = b.iter().map(|&w| if w > 0.0 { ln(w) } else { f64::NEG_INFINITY }).collect();

    // Potentials f, g with plan_ij = exp((f_i + g_j - C_ij) / eps).
    let mut f = vec![0.0; ns];
    let mut g = vec![0.0; nt];
    let c = cost;

    let mut violation = f64::INFINITY;
    for iter in 1..=params.max_iter {
        if interrupt() {
            return Err(Error::Interrupted);
        }
        for i in 0..ns {
            if log_a[i] == f64::NEG_INFINITY {
                f[i] = f64::NEG_INFINITY;
                continue;
            }
            let row = c.row(i);
            let lse = log_sum_exp((0..nt).map(|j| (g[j] - row[j]) / eps));
            f[i] = eps * (log_a[i] - lse);
        }
        for j in 0..nt {
            if log_b[j] == f64::NEG_INFINITY {
                g[j] = f64::NEG_INFINITY;
                continue;
            }
            let lse = log_sum_exp((0..ns).map(|i| (f[i] - c[(i, j)]) / eps));
            g[j] = eps * (log_b[j] - lse);
        }
        if f.iter().chain(&g).any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(numerical!("Sinkhorn potentials became non-finite at iteration {iter}"));
        }
        // Columns are exact after the g update; only rows can be off.
        violation = 0.0;
        for i in 0..ns {
            let row = c.row(i);
            let s: f64 = (0..nt).map(|j| plan_entry(f[i], g[j], row[j], eps)).sum();
            violation = violation.max((s - a[i]).abs());
        }
        if violation <= params.tol {
            let plan = build_plan(&f, &g, c, eps);
            let coupling = Coupling {
                cost: plan.as_slice().iter().zip(c.as_slice()).map(|(p, c)| p * c).sum(),
                plan,
            };
            let full = coupling.marginal_violation(a, b);
            if !full.is_finite() {
                return Err(numerical!("Sinkhorn plan is not finite"));
            }
            if full > params.tol {
                return Err(numerical!(
                    "Sinkhorn plan violates marginals by {full:e} after convergence"
                ));
            }
            return Ok(coupling);
        }
    }
    Err(Error::NotConverged {
        iterations: params.max_iter,
        violation,
    })
}

#[inline]
fn plan_entry(f: f64, g: f64, c: f64, eps: f64) -> f64 {
    let v = (f + g - c) / eps;
    if v == f64::NEG_INFINITY {
        0.0
    } else {
        exp(v)
    }
}

fn build_plan(f: &[f64], g: &[f64], c: &Matrix, eps: f64) -> Matrix {
    let mut plan = Matrix::zeros(f.len(), g.len());
    for i in 0..f.len() {
        let row = c.row(i);
        for (j, p) in plan.row_mut(i).iter_mut().enumerate() {
            *p = plan_entry(f[i], g[j], row[j], eps);
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete_ot::{cost_matrix, exact_emd};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, d: usize, rng: &mut ChaCha8Rng) -> PointCloud {
        let mut m = Matrix::zeros(n, d);
        m.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-1.0..1.0));
        PointCloud::uniform(m).unwrap()
    }

    #[test]
    fn large_epsilon_gives_independent_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_cloud(4, 2, &mut rng);
        let t = random_cloud(5, 2, &mut rng);
        let c = cost_matrix(s.points(), t.points()).unwrap();
        let params = SinkhornParams {
            epsilon: 1e4 * c.max_abs(),
            max_iter: 1000,
            tol: 1e-9,
        };
        let cp = sinkhorn(&s, &t, &c, params).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                assert!((cp.plan[(i, j)] - 0.25 * 0.2).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn small_epsilon_approaches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_cloud(4, 2, &mut rng);
        let t = random_cloud(4, 2, &mut rng);
        let c = cost_matrix(s.points(), t.points()).unwrap();
        let exact = exact_emd(&s, &t, &c).unwrap();
        let params = SinkhornParams {
            epsilon: 1e-3 * c.max_abs(),
            max_iter: 100_000,
            tol: 1e-9,
        };
        let cp = sinkhorn(&s, &t, &c, params).unwrap();
        assert!((cp.cost - exact.cost).abs() <= 0.01 * exact.cost);
        assert!(exact.cost <= cp.cost + 1e-8);
    }

    #[test]
    fn marginals_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_cloud(10, 3, &mut rng);
        let t = random_cloud(7, 3, &mut rng);
        let c = cost_matrix(s.points(), t.points()).unwrap();
        let params = SinkhornParams::default_for(&c);
        let cp = sinkhorn(&s, &t, &c, params).unwrap();
        assert!(cp.marginal_violation(s.weights(), t.weights()) <= params.tol);
    }

    #[test]
    fn reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_cloud(10, 3, &mut rng);
        let t = random_cloud(7, 3, &mut rng);
        let c = cost_matrix(s.points(), t.points()).unwrap();
        let params = SinkhornParams {
            epsilon: 1e-4,
            max_iter: 2,
            tol: 1e-12,
        };
        assert!(matches!(
            sinkhorn(&s, &t, &c, params),
            Err(Error::NotConverged { iterations: 2, .. })
        ));
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_cloud(3, 1, &mut rng);
        let c = cost_matrix(s.points(), s.points()).unwrap();
        let mut p = SinkhornParams::default_for(&c);
        p.epsilon = 0.0;
        assert!(sinkhorn(&s, &s, &c, p).is_err());
        let mut p = SinkhornParams::default_for(&c);
        p.tol = -1.0;
        assert!(sinkhorn(&s, &s, &c, p).is_err());
    }

    #[test]
    fn zero_weight_points_receive_nothing() {
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let s = PointCloud::new(pts.clone(), vec![0.5, 0.0, 0.5]).unwrap();
        let t = PointCloud::uniform(pts).unwrap();
        let c = cost_matrix(s.points(), t.points()).unwrap();
        let cp = sinkhorn(&s, &t, &c, SinkhornParams { epsilon: 0.5, max_iter: 5000, tol: 1e-9 }).unwrap();
        assert!(cp.plan.row(1).iter().all(|&p| p == 0.0));
    }
}
