//! Closed-form optimal transport between Gaussian approximations of samples.
//!
//! For the quadratic cost the Wasserstein distance between `N(m_S, Σ_S)` and
//! `N(m_T, Σ_T)` is the Bures-Wasserstein distance, and the optimal map is the
//! affine map `x ↦ A x + b` with
//!
//! ```text
//! A = Σ_T^{1/2} (Σ_T^{1/2} Σ_S Σ_T^{1/2})^{-1/2} Σ_T^{1/2},   b = m_T - A m_S.
//! ```
//!
//! All matrix functions go through a symmetric eigendecomposition.

use alloc::vec::Vec;

use crate::error::{invalid, numerical, Result};
use crate::linalg::{self, Matrix, SymmetricEigen};
use crate::math::sqrt;

/// Eigenvalues are floored at this multiple of the largest eigenvalue before a
/// matrix function is applied.
pub const DEFAULT_REL_EIG_FLOOR: f64 = 1e-10;

/// Ridge added to both covariances when fitting maps on learned embeddings.
pub const DEFAULT_COV_REG: f64 = 1e-6;

/// Relative asymmetry accepted by the symmetric matrix functions.
const SYMMETRY_TOL: f64 = 1e-8;

/// Negative Bures values down to `-BURES_NEG_TOL * scale` are round-off and clamp to 0.
const BURES_NEG_TOL: f64 = 1e-8;

/// Empirical mean and biased covariance of a sample.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianStats {
    mean: Vec<f64>,
    cov: Matrix,
    n: usize,
}

impl GaussianStats {
    /// Validates shape, symmetry (relative 1e-10) and positive semi-definiteness.
    pub fn new(mean: Vec<f64>, cov: Matrix, n: usize) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(invalid!("statistics need at least one dimension"));
        }
        if cov.shape() != (d, d) {
            return Err(invalid!(
                "covariance is {}x{} but mean has length {d}",
                cov.rows(),
                cov.cols()
            ));
        }
        if n == 0 {
            return Err(invalid!("sample count must be at least 1"));
        }
        if !cov.is_finite() || mean.iter().any(|x| !x.is_finite()) {
            return Err(invalid!("statistics contain non-finite values"));
        }
        if cov.asymmetry() > 1e-10 {
            return Err(invalid!("covariance is not symmetric"));
        }
        let eig = SymmetricEigen::new(&cov)?;
        let top = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if eig.values[0] < -1e-8 * top {
            return Err(invalid!(
                "covariance is not positive semi-definite (eigenvalue {:e})",
                eig.values[0]
            ));
        }
        Ok(Self { mean, cov, n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// The affine map `x ↦ A x + b`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineMap {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl AffineMap {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if a.shape() != (b.len(), b.len()) {
            return Err(invalid!(
                "map matrix is {}x{} but offset has length {}",
                a.rows(),
                a.cols(),
                b.len()
            ));
        }
        Ok(Self { a, b })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            a: Matrix::identity(d),
            b: alloc::vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Maps a single point.
    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.a.mul_vec(x);
        y.iter_mut().zip(&self.b).for_each(|(y, b)| *y += b);
        y
    }
}

/// Inverse of an affine map together with `‖A⁻¹‖₂`.
#[derive(Debug, Clone)]
pub struct InvertedMap {
    pub map: AffineMap,
    pub inverse_spectral_norm: f64,
}

/// Column mean and biased (divide-by-n) covariance of the rows of `sample`.
pub fn estimate_stats(sample: &Matrix) -> Result<GaussianStats> {
    let (n, d) = sample.shape();
    if n == 0 || d == 0 {
        return Err(invalid!("cannot estimate statistics of an empty {n}x{d} sample"));
    }
    if !sample.is_finite() {
        return Err(invalid!("sample contains non-finite entries"));
    }
    let mut mean = alloc::vec![0.0; d];
    for row in sample.row_iter() {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    // Upper triangle only; mirrored afterwards.
    let mut cov = Matrix::zeros(d, d);
    let mut centered = alloc::vec![0.0; d];
    for row in sample.row_iter() {
        centered
            .iter_mut()
            .zip(row.iter().zip(&mean))
            .for_each(|(c, (x, m))| *c = x - m);
        let acc = cov.as_mut_slice();
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let out = &mut acc[i * d + i..(i + 1) * d];
            for (o, &cj) in out.iter_mut().zip(&centered[i..]) {
                *o += ci * cj;
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(GaussianStats { mean, cov, n })
}

#[derive(Clone, Copy)]
enum Floor {
    Absolute(f64),
    /// Multiple of the largest eigenvalue.
    Relative(f64),
}

/// Applies `f` to the eigenvalues of a symmetric matrix after flooring them.
fn sym_function(m: &Matrix, floor: Floor, f: impl Fn(f64) -> f64) -> Result<(Matrix, SymmetricEigen, f64)> {
    if !m.is_square() {
        return Err(invalid!("expected a square matrix, got {}x{}", m.rows(), m.cols()));
    }
    if m.asymmetry() > SYMMETRY_TOL {
        return Err(invalid!(
            "matrix is not symmetric (relative asymmetry {:e})",
            m.asymmetry()
        ));
    }
    let eig = SymmetricEigen::new(&m.symmetrized())?;
    let eig_floor = match floor {
        Floor::Absolute(v) => v,
        Floor::Relative(r) => r * eig.values.last().copied().unwrap_or(0.0).max(0.0),
    };
    if !(eig_floor >= 0.0) {
        return Err(invalid!("eigenvalue floor must be non-negative, got {eig_floor}"));
    }
    let out = eig.reconstruct_with(|l| f(l.max(eig_floor)));
    Ok((out, eig, eig_floor))
}

fn inv_sqrt(l: f64) -> f64 {
    if l > 0.0 {
        1.0 / sqrt(l)
    } else {
        f64::INFINITY
    }
}

/// Principal square root `V diag(max(λ, eig_floor))^{1/2} Vᵀ` of a symmetric matrix.
pub fn matrix_sqrt_sym(m: &Matrix, eig_floor: f64) -> Result<Matrix> {
    sym_function(m, Floor::Absolute(eig_floor), sqrt).map(|(r, _, _)| r)
}

/// Inverse square root with the same flooring. Fails when no eigenvalue is
/// positive after flooring.
pub fn matrix_inv_sqrt_sym(m: &Matrix, eig_floor: f64) -> Result<Matrix> {
    inv_sqrt_floored(m, Floor::Absolute(eig_floor))
}

fn inv_sqrt_floored(m: &Matrix, floor: Floor) -> Result<Matrix> {
    let (r, eig, eig_floor) = sym_function(m, floor, inv_sqrt)?;
    let top = eig.values.last().copied().unwrap_or(0.0).max(eig_floor);
    if !(top > 0.0) || !r.is_finite() {
        return Err(numerical!("matrix is not invertible; eigenvalues {:?}", eig.values));
    }
    Ok(r)
}

fn sqrt_default(m: &Matrix) -> Result<Matrix> {
    sym_function(m, Floor::Relative(DEFAULT_REL_EIG_FLOOR), sqrt).map(|(r, _, _)| r)
}

fn check_same_dim(s: &GaussianStats, t: &GaussianStats) -> Result<()> {
    if s.dim() != t.dim() {
        return Err(invalid!("dimension mismatch: {} vs {}", s.dim(), t.dim()));
    }
    Ok(())
}

/// Squared Bures-Wasserstein distance
/// `‖m_S − m_T‖² + tr Σ_S + tr Σ_T − 2 tr (Σ_T^{1/2} Σ_S Σ_T^{1/2})^{1/2}`.
pub fn bures_wasserstein_sq(s: &GaussianStats, t: &GaussianStats) -> Result<f64> {
    check_same_dim(s, t)?;
    let mean_term = linalg::squared_distance(s.mean(), t.mean());
    let t_half = sqrt_default(t.cov())?;
    let inner = t_half.matmul(s.cov()).matmul(&t_half).symmetrized();
    let cross = sqrt_default(&inner)?.trace();
    let tr_s = s.cov().trace();
    let tr_t = t.cov().trace();
    let value = mean_term + tr_s + tr_t - 2.0 * cross;
    let scale = 1.0_f64.max(mean_term + tr_s + tr_t);
    if value >= 0.0 {
        Ok(value)
    } else if value >= -BURES_NEG_TOL * scale {
        Ok(0.0)
    } else {
        Err(numerical!(
            "Bures-Wasserstein value {value:e} is negative beyond round-off"
        ))
    }
}

/// Closed-form linear Monge map from `s` to `t`; `cov_reg · I` is added to both
/// covariances first.
pub fn fit_linear_monge(s: &GaussianStats, t: &GaussianStats, cov_reg: f64) -> Result<AffineMap> {
    check_same_dim(s, t)?;
    if !(cov_reg >= 0.0) {
        return Err(invalid!("cov_reg must be non-negative, got {cov_reg}"));
    }
    let cov_s = s.cov().add_diag(cov_reg);
    let cov_t = t.cov().add_diag(cov_reg);
    let t_half = sqrt_default(&cov_t)?;
    let inner = t_half.matmul(&cov_s).matmul(&t_half).symmetrized();
    let inner_inv_half = inv_sqrt_floored(&inner, Floor::Relative(DEFAULT_REL_EIG_FLOOR))?;
    let a = t_half.matmul(&inner_inv_half).matmul(&t_half).symmetrized();
    if !a.is_finite() {
        return Err(numerical!("fitted map has non-finite entries"));
    }
    let am = a.mul_vec(s.mean());
    let b = t.mean().iter().zip(&am).map(|(mt, am)| mt - am).collect();
    Ok(AffineMap { a, b })
}

/// Row-wise `A xᵢ + b`.
pub fn apply_map(map: &AffineMap, x: &Matrix) -> Result<Matrix> {
    if x.cols() != map.dim() && !(x.rows() == 0) {
        return Err(invalid!(
            "points have {} columns but the map acts on dimension {}",
            x.cols(),
            map.dim()
        ));
    }
    let mut out = x.matmul_t(&map.a);
    for i in 0..out.rows() {
        out.row_mut(i)
            .iter_mut()
            .zip(&map.b)
            .for_each(|(y, b)| *y += b);
    }
    Ok(out)
}

/// `(A⁻¹, −A⁻¹ b)` plus the spectral norm of `A⁻¹`; refuses condition numbers ≥ 1e12.
pub fn invert_map(map: &AffineMap) -> Result<InvertedMap> {
    let gram = map.a.t_matmul(&map.a).symmetrized();
    let eig = SymmetricEigen::new(&gram)?;
    let lo = eig.values[0];
    let hi = *eig.values.last().unwrap();
    if !(lo > 0.0) || sqrt(hi / lo) >= 1e12 {
        return Err(numerical!(
            "map matrix is singular or ill-conditioned (singular values {:e}..{:e})",
            sqrt(lo.max(0.0)),
            sqrt(hi.max(0.0))
        ));
    }
    let a_inv = map.a.inverse()?;
    let b_inv = a_inv.mul_vec(&map.b).into_iter().map(|v| -v).collect();
    Ok(InvertedMap {
        map: AffineMap { a: a_inv, b: b_inv },
        inverse_spectral_norm: 1.0 / sqrt(lo),
    })
}

/// Statistics of the pushforward of `s` through `map`: `(A m + b, A Σ Aᵀ)`.
pub fn pushforward_stats(s: &GaussianStats, map: &AffineMap) -> Result<GaussianStats> {
    if s.dim() != map.dim() {
        return Err(invalid!("dimension mismatch: {} vs {}", s.dim(), map.dim()));
    }
    let mean = map.apply_point(s.mean());
    let cov = map.a.matmul(s.cov()).matmul_t(&map.a).symmetrized();
    Ok(GaussianStats { mean, cov, n: s.n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn stats(mean: &[f64], cov: Matrix) -> GaussianStats {
        GaussianStats::new(mean.to_vec(), cov, 10).unwrap()
    }

    fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let mut g = Matrix::zeros(d, d);
        for v in g.as_mut_slice() {
            *v = StandardNormal.sample(rng);
        }
        g.matmul_t(&g).scale(1.0 / d as f64).add_diag(0.1)
    }

    #[test]
    fn stats_of_symmetric_pair() {
        let s = estimate_stats(&Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(s.mean(), &[0.0, 0.0]);
        assert_eq!(s.cov(), &Matrix::from_diag(&[1.0, 0.0]));
    }

    #[test]
    fn stats_of_single_point() {
        let s = estimate_stats(&Matrix::from_rows(&[[5.0]]).unwrap()).unwrap();
        assert_eq!(s.mean(), &[5.0]);
        assert_eq!(s.cov(), &Matrix::zeros(1, 1));
        assert_eq!(s.n(), 1);
    }

    #[test]
    fn stats_reject_bad_samples() {
        assert!(estimate_stats(&Matrix::zeros(0, 3)).is_err());
        let bad = Matrix::from_rows(&[[1.0, f64::NAN]]).unwrap();
        assert!(matches!(estimate_stats(&bad), Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn stats_match_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x = Matrix::zeros(1000, 2);
        for i in 0..1000 {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x[(i, 0)] = 2.0 * a;
            x[(i, 1)] = b;
        }
        let s = estimate_stats(&x).unwrap();
        assert!(s.cov().sub(&Matrix::from_diag(&[4.0, 1.0])).frobenius_norm() < 0.5);
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let r = matrix_sqrt_sym(&Matrix::identity(3), 0.0).unwrap();
        assert!(r.sub(&Matrix::identity(3)).max_abs() < 1e-15);
        let r = matrix_sqrt_sym(&Matrix::from_diag(&[4.0, 9.0]), 0.0).unwrap();
        assert!(r.sub(&Matrix::from_diag(&[2.0, 3.0])).max_abs() < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_spd(5, &mut rng);
        let r = matrix_sqrt_sym(&m, 0.0).unwrap();
        let err = r.matmul(&r).sub(&m).frobenius_norm() / m.frobenius_norm();
        assert!(err < 1e-8, "{err}");
        assert!(r.asymmetry() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_asymmetric() {
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(matrix_sqrt_sym(&m, 0.0), Err(crate::Error::InvalidInput(_))));
        assert!(matrix_sqrt_sym(&Matrix::identity(2), -1.0).is_err());
    }

    #[test]
    fn bures_of_identical_is_zero() {
        let s = stats(&[1.0, 2.0], Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]).unwrap());
        assert!(bures_wasserstein_sq(&s, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bures_one_dimensional() {
        // (0 - 3)^2 + (1 - 2)^2
        let s = stats(&[0.0], Matrix::from_diag(&[1.0]));
        let t = stats(&[3.0], Matrix::from_diag(&[4.0]));
        assert!((bures_wasserstein_sq(&s, &t).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn bures_commuting_diagonal() {
        let s = stats(&[0.0, 0.0], Matrix::from_diag(&[4.0, 1.0]));
        let t = stats(&[3.0, 0.0], Matrix::from_diag(&[1.0, 4.0]));
        assert!((bures_wasserstein_sq(&s, &t).unwrap() - 11.0).abs() < 1e-12);
        assert!((bures_wasserstein_sq(&t, &s).unwrap() - 11.0).abs() < 1e-12);
    }

    #[test]
    fn bures_rejects_dimension_mismatch() {
        let s = stats(&[0.0], Matrix::from_diag(&[1.0]));
        let t = stats(&[0.0, 0.0], Matrix::identity(2));
        assert!(matches!(bures_wasserstein_sq(&s, &t), Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn monge_identity() {
        let s = stats(&[1.0, -1.0], Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]).unwrap());
        let m = fit_linear_monge(&s, &s, 0.0).unwrap();
        assert!(m.a.sub(&Matrix::identity(2)).max_abs() < 1e-8);
        assert!(m.b.iter().all(|b| b.abs() < 1e-8));
    }

    #[test]
    fn monge_one_dimensional() {
        let s = stats(&[2.0], Matrix::from_diag(&[4.0]));
        let t = stats(&[5.0], Matrix::from_diag(&[1.0]));
        let m = fit_linear_monge(&s, &t, 0.0).unwrap();
        assert!((m.a[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((m.b[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn monge_commuting_diagonal() {
        let s = stats(&[0.0, 0.0], Matrix::from_diag(&[4.0, 1.0]));
        let t = stats(&[0.0, 0.0], Matrix::from_diag(&[1.0, 4.0]));
        let m = fit_linear_monge(&s, &t, 0.0).unwrap();
        assert!(m.a.sub(&Matrix::from_diag(&[0.5, 2.0])).max_abs() < 1e-8);
        assert!(m.b.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn monge_fails_on_zero_covariances() {
        let s = stats(&[0.0, 0.0], Matrix::zeros(2, 2));
        let t = stats(&[1.0, 0.0], Matrix::zeros(2, 2));
        assert!(matches!(
            fit_linear_monge(&s, &t, 0.0),
            Err(crate::Error::NumericalFailure(_))
        ));
        // A ridge makes it well posed again.
        let m = fit_linear_monge(&s, &t, 1e-6).unwrap();
        assert!(m.a.sub(&Matrix::identity(2)).max_abs() < 1e-8);
    }

    #[test]
    fn monge_pushforward_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [1, 2, 3, 8] {
            let s = stats(&vec![0.5; d], random_spd(d, &mut rng));
            let t = stats(&vec![-1.0; d], random_spd(d, &mut rng));
            let m = fit_linear_monge(&s, &t, 0.0).unwrap();
            let p = pushforward_stats(&s, &m).unwrap();
            let rel = p.cov().sub(t.cov()).frobenius_norm() / t.cov().frobenius_norm();
            assert!(rel < 1e-6, "d={d} rel={rel}");
            assert!(linalg::squared_distance(p.mean(), t.mean()) < 1e-16);
            assert!(bures_wasserstein_sq(&p, &t).unwrap() < 1e-8);
            assert!(m.a.asymmetry() < 1e-8);
        }
    }

    #[test]
    fn apply_map_arithmetic() {
        let map = AffineMap::new(Matrix::from_diag(&[0.5, 2.0]), vec![1.0, 1.0]).unwrap();
        let y = apply_map(&map, &Matrix::from_rows(&[[2.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(y.row(0), &[2.0, 3.0]);
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(apply_map(&AffineMap::identity(2), &x).unwrap(), x);
        assert!(apply_map(&map, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn apply_fitted_map_to_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs = Matrix::zeros(500, 2);
        let mut xt = Matrix::zeros(500, 2);
        for i in 0..500 {
            for j in 0..2 {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                xs[(i, j)] = a * (1.0 + j as f64);
                xt[(i, j)] = 3.0 + b;
            }
        }
        let s = estimate_stats(&xs).unwrap();
        let t = estimate_stats(&xt).unwrap();
        let m = fit_linear_monge(&s, &t, 0.0).unwrap();
        let pushed = estimate_stats(&apply_map(&m, &xs).unwrap()).unwrap();
        assert!(pushed.cov().sub(t.cov()).frobenius_norm() < 1e-8);
        assert!(linalg::squared_distance(pushed.mean(), t.mean()) < 1e-16);
    }

    #[test]
    fn invert_simple_maps() {
        let inv = invert_map(&AffineMap::identity(3)).unwrap();
        assert_eq!(inv.map.a, Matrix::identity(3));
        let map = AffineMap::new(Matrix::from_diag(&[0.5, 2.0]), vec![1.0, 1.0]).unwrap();
        let inv = invert_map(&map).unwrap();
        assert!(inv.map.a.sub(&Matrix::from_diag(&[2.0, 0.5])).max_abs() < 1e-15);
        assert!((inv.map.b[0] + 2.0).abs() < 1e-15 && (inv.map.b[1] + 0.5).abs() < 1e-15);
        assert!((inv.inverse_spectral_norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invert_twice_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let map = AffineMap::new(random_spd(4, &mut rng), vec![0.3, -0.2, 1.0, 2.0]).unwrap();
        let back = invert_map(&invert_map(&map).unwrap().map).unwrap().map;
        assert!(back.a.sub(&map.a).max_abs() < 1e-8);
        assert!(back.b.iter().zip(&map.b).all(|(x, y)| (x - y).abs() < 1e-8));
        let p = [0.1, 0.2, -0.3, 0.4];
        let q = invert_map(&map).unwrap().map.apply_point(&map.apply_point(&p));
        assert!(q.iter().zip(&p).all(|(x, y)| (x - y).abs() < 1e-8));
    }

    #[test]
    fn invert_singular_fails() {
        let map = AffineMap::new(Matrix::from_diag(&[1.0, 0.0]), vec![0.0, 0.0]).unwrap();
        assert!(matches!(invert_map(&map), Err(crate::Error::NumericalFailure(_))));
    }

    #[test]
    fn stats_constructor_checks_invariants() {
        let asym = Matrix::from_rows(&[[1.0, 0.2], [0.0, 1.0]]).unwrap();
        assert!(GaussianStats::new(vec![0.0, 0.0], asym, 3).is_err());
        let indefinite = Matrix::from_diag(&[1.0, -1.0]);
        assert!(GaussianStats::new(vec![0.0, 0.0], indefinite, 3).is_err());
        assert!(GaussianStats::new(vec![0.0], Matrix::identity(1), 0).is_err());
    }
}
