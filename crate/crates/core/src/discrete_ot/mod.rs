//! Kantorovich optimal transport between weighted point clouds.

mod simplex;
mod sinkhorn;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::linalg::{squared_distance, Matrix};

pub use sinkhorn::{sinkhorn, sinkhorn_interruptible, SinkhornParams};

/// Points with a probability weight each.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Matrix,
    weights: Vec<f64>,
}

impl PointCloud {
    /// Weights must be non-negative and sum to 1 within 1e-10.
    pub fn new(points: Matrix, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != points.rows() {
            return Err(invalid!(
                "{} weights for {} points",
                weights.len(),
                points.rows()
            ));
        }
        if !points.is_finite() {
            return Err(invalid!("point coordinates must be finite"));
        }
        check_weights(&weights)?;
        Ok(Self { points, weights })
    }

    /// Every point gets weight `1/n`.
    pub fn uniform(points: Matrix) -> Result<Self> {
        let n = points.rows();
        if n == 0 {
            return Err(invalid!("point cloud is empty"));
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(invalid!("weight vector is empty"));
    }
    if let Some(bad) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(invalid!("weights must be finite and non-negative, found {bad}"));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(invalid!("weights sum to {total}, expected 1"));
    }
    Ok(())
}

/// A transport plan and its cost `⟨plan, C⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub plan: Matrix,
    pub cost: f64,
}

impl Coupling {
    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.plan.cols()];
        for r in self.plan.row_iter() {
            out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// Largest deviation of a row or column sum from the given marginals.
    pub fn marginal_violation(&self, a: &[f64], b: &[f64]) -> f64 {
        let (rows, cols) = (self.row_sums(), self.col_sums());
        let dev = |s: &[f64], w: &[f64]| s.iter().zip(w).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max);
        dev(&rows, a).max(dev(&cols, b))
    }
}

/// Squared Euclidean distances between the rows of `xs` and `xt`.
pub fn cost_matrix(xs: &Matrix, xt: &Matrix) -> Result<Matrix> {
    if xs.cols() != xt.cols() {
        return Err(invalid!(
            "dimension mismatch: {} vs {} columns",
            xs.cols(),
            xt.cols()
        ));
    }
    let mut c = Matrix::zeros(xs.rows(), xt.rows());
    for i in 0..xs.rows() {
        let xi = xs.row(i);
        for (o, j) in c.row_mut(i).iter_mut().zip(0..xt.rows()) {
            *o = squared_distance(xi, xt.row(j));
        }
    }
    Ok(c)
}

/// Limits for the exact solver.
pub struct EmdOptions<'a> {
    pub max_pivots: u64,
    /// Polled periodically; returning `true` aborts with `Error::Interrupted`.
    pub interrupt: Option<&'a mut dyn FnMut() -> bool>,
}

impl Default for EmdOptions<'_> {
    fn default() -> Self {
        Self {
            max_pivots: u64::MAX,
            interrupt: None,
        }
    }
}

/// Default pivot budget for a problem with `nodes` supply plus demand nodes.
fn default_pivot_budget(nodes: usize) -> u64 {
    100_000 + 1_000 * nodes as u64
}

/// Exact optimal plan between two weighted clouds for an arbitrary cost matrix.
pub fn exact_emd(source: &PointCloud, target: &PointCloud, cost: &Matrix) -> Result<Coupling> {
    emd_weights(source.weights(), target.weights(), cost, EmdOptions::default())
}

/// Exact optimal plan between weight vectors `a` (rows) and `b` (columns).
pub fn emd_weights(a: &[f64], b: &[f64], cost: &Matrix, options: EmdOptions<'_>) -> Result<Coupling> {
    if cost.shape() != (a.len(), b.len()) {
        return Err(invalid!(
            "cost matrix is {}x{} but marginals have lengths {} and {}",
            cost.rows(),
            cost.cols(),
            a.len(),
            b.len()
        ));
    }
    if a.is_empty() || b.is_empty() {
        return Err(invalid!("marginals must be non-empty"));
    }
    for w in [a, b] {
        if let Some(bad) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(invalid!("weights must be finite and non-negative, found {bad}"));
        }
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if (sa - sb).abs() > 1e-8 {
        return Err(invalid!("marginals carry different mass: {sa} vs {sb}"));
    }
    if !cost.is_finite() {
        return Err(invalid!("cost matrix has non-finite entries"));
    }
    let max_pivots = if options.max_pivots == u64::MAX {
        default_pivot_budget(a.len() + b.len())
    } else {
        options.max_pivots
    };
    let mut never = || false;
    let interrupt: &mut dyn FnMut() -> bool = match options.interrupt {
        Some(f) => f,
        None => &mut never,
    };
    let solver = simplex::TransportSimplex::new(a, b, cost.as_slice());
    let solution = solver.run(max_pivots, interrupt)?;
    let plan = Matrix::from_vec(a.len(), b.len(), solution.plan)?;
    let total = plan
        .as_slice()
        .iter()
        .zip(cost.as_slice())
        .filter(|(p, _)| **p != 0.0)
        .map(|(p, c)| p * c)
        .sum();
    Ok(Coupling { plan, cost: total })
}

/// Maps each source point to the plan-weighted mean of the target points it sends mass to.
pub fn barycentric_map(coupling: &Coupling, target_points: &Matrix) -> Result<Matrix> {
    let plan = &coupling.plan;
    if plan.cols() != target_points.rows() {
        return Err(invalid!(
            "plan has {} columns but there are {} target points",
            plan.cols(),
            target_points.rows()
        ));
    }
    let d = target_points.cols();
    let mut out = Matrix::zeros(plan.rows(), d);
    for i in 0..plan.rows() {
        let row = plan.row(i);
        let mass: f64 = row.iter().sum();
        if !(mass > 0.0) {
            return Err(invalid!("source point {i} carries no mass in the plan"));
        }
        let o = out.row_mut(i);
        for (j, &p) in row.iter().enumerate() {
            if p != 0.0 {
                o.iter_mut()
                    .zip(target_points.row(j))
                    .for_each(|(o, y)| *o += p * y);
            }
        }
        o.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(out)
}

/// Exact squared 2-Wasserstein distance between two uniformly weighted samples.
pub fn w2_empirical(xs: &Matrix, xt: &Matrix) -> Result<f64> {
    Ok(w2_empirical_plan(xs, xt)?.cost)
}

/// Same as [`w2_empirical`] but also returns the optimal plan.
pub fn w2_empirical_plan(xs: &Matrix, xt: &Matrix) -> Result<Coupling> {
    let source = PointCloud::uniform(xs.clone())?;
    let target = PointCloud::uniform(xt.clone())?;
    let c = cost_matrix(xs, xt)?;
    let mut coupling = exact_emd(&source, &target, &c)?;
    coupling.cost = coupling.cost.max(0.0);
    Ok(coupling)
}
