//! Seeded synthetic tasks.
//!
//! Each task has a fixed geometry (class means, rotations, affine links)
//! drawn from [`STRUCTURE_SEED`] and a per-run sampling seed. The returned
//! `parameters` block records everything needed to regenerate the data.

use std::fmt;
use std::str::FromStr;

use laot_core::gaussian_ot::AffineMap;
use laot_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::Dataset;

pub const STRUCTURE_SEED: u64 = 1234;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Toy3d,
    GaussAffine,
    NonlinearDa,
    /// 20D source, 30D nonlinear target.
    HeteroDa,
    LargeN { n: usize, d: usize },
}

impl Task {
    pub fn default_size(&self) -> usize {
        match self {
            Task::Toy3d => 500,
            Task::GaussAffine => 1000,
            Task::NonlinearDa | Task::HeteroDa => 1000,
            Task::LargeN { n, .. } => *n,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Toy3d => f.write_str("toy3d"),
            Task::GaussAffine => f.write_str("gauss_affine"),
            Task::NonlinearDa => f.write_str("nonlinear_da"),
            Task::HeteroDa => f.write_str("hetero_da"),
            Task::LargeN { n, d } => write!(f, "large_n:{n}x{d}"),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    /// `toy3d`, `gauss_affine`, `nonlinear_da`, `hetero_da` or `large_n:<n>x<d>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy3d" => Ok(Task::Toy3d),
            "gauss_affine" => Ok(Task::GaussAffine),
            "nonlinear_da" => Ok(Task::NonlinearDa),
            "hetero_da" => Ok(Task::HeteroDa),
            _ => {
                let bad = || Error::invalid(format!("unknown task `{s}`"));
                let rest = s.strip_prefix("large_n:").ok_or_else(bad)?;
                let (n, d) = rest.split_once('x').ok_or_else(bad)?;
                let n: usize = n.parse().map_err(|_| bad())?;
                let d: usize = d.parse().map_err(|_| bad())?;
                if n == 0 || d == 0 {
                    return Err(Error::invalid(format!("large_n needs n, d >= 1, got `{s}`")));
                }
                Ok(Task::LargeN { n, d })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub task: Task,
    pub source: Dataset,
    pub target: Dataset,
    pub num_classes: Option<usize>,
    /// Target points per class whose labels the classifier may use.
    pub labeled_per_class: usize,
    pub parameters: serde_json::Value,
}

/// Draws `n` points per domain (the task default when `None`).
pub fn generate(task: Task, seed: u64, n: Option<usize>) -> Result<Synthetic> {
    let n = n.unwrap_or_else(|| task.default_size());
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (source, target, num_classes, extra) = match task {
        Task::Toy3d => toy3d(n, &mut rng),
        Task::GaussAffine => gauss_affine(n, &mut rng),
        Task::NonlinearDa => nonlinear_da(&NonlinearDa::default(), n, None, &mut rng),
        Task::HeteroDa => nonlinear_da(&NonlinearDa::default(), n, Some(HETERO_DIM), &mut rng),
        Task::LargeN { d, .. } => large_n(n, d, &mut rng),
    };
    let labeled_per_class = if task == Task::HeteroDa { HETERO_LABELED_PER_CLASS } else { 0 };
    let mut parameters = json!({
        "task": task.to_string(),
        "seed": seed,
        "n": n,
        "structure_seed": STRUCTURE_SEED,
        "labeled_per_class": labeled_per_class,
    });
    if let (Some(obj), serde_json::Value::Object(extra)) = (parameters.as_object_mut(), extra) {
        obj.extend(extra);
    }
    Ok(Synthetic {
        task,
        source,
        target,
        num_classes,
        labeled_per_class,
        parameters,
    })
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Haar-ish orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
pub fn random_rotation(d: usize, rng: &mut impl Rng) -> Matrix {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        for u in &q {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        q.push(v);
    }
    Matrix::from_rows(&q).expect("square")
}

fn dataset(rows: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Dataset {
    Dataset {
        features: Matrix::from_rows(&rows).expect("rectangular rows"),
        labels,
    }
}

type Drawn = (Dataset, Dataset, Option<usize>, serde_json::Value);

// Two curved sheets over the same 2D latent square; four classes by quadrant.
fn toy3d(n: usize, rng: &mut ChaCha8Rng) -> Drawn {
    const NOISE: f64 = 0.02;
    let sample = |rng: &mut ChaCha8Rng, target: bool| {
        let u: f64 = rng.random_range(-1.0..1.0);
        let h: f64 = rng.random_range(-1.0..1.0);
        let y = usize::from(u > 0.0) + 2 * usize::from(h > 0.0);
        let x = if target {
            let t = 1.5 * core::f64::consts::PI * u;
            vec![t.sin(), h + 0.3 * u * u, t.cos() - 1.0]
        } else {
            vec![u, h, u * u + 0.5 * h * h]
        };
        (x.into_iter().map(|v| v + NOISE * normal(rng)).collect::<Vec<_>>(), y)
    };
    let (s, ys): (Vec<_>, Vec<_>) = (0..n).map(|_| sample(rng, false)).unzip();
    let (t, yt): (Vec<_>, Vec<_>) = (0..n).map(|_| sample(rng, true)).unzip();
    (
        dataset(s, Some(ys)),
        dataset(t, Some(yt)),
        Some(4),
        json!({"classes": 4, "noise": NOISE}),
    )
}

pub const GAUSS_AFFINE_DIM: usize = 5;
const GAUSS_AFFINE_CLASSES: usize = 3;

/// The fixed SPD-affine link of the `gauss_affine` task.
pub fn gauss_affine_map() -> AffineMap {
    let d = GAUSS_AFFINE_DIM;
    let mut g = ChaCha8Rng::seed_from_u64(STRUCTURE_SEED ^ 0xA1);
    let q = random_rotation(d, &mut g);
    let mut diag = Matrix::zeros(d, d);
    for i in 0..d {
        diag[(i, i)] = 0.5 + 1.5 * i as f64 / (d - 1) as f64;
    }
    let a = q.t_matmul(&diag).matmul(&q).symmetrized();
    let b = (0..d).map(|_| 2.0 * normal(&mut g)).collect();
    AffineMap::new(a, b).expect("square map")
}

fn gauss_affine_means() -> Vec<Vec<f64>> {
    let mut g = ChaCha8Rng::seed_from_u64(STRUCTURE_SEED ^ 0xA2);
    (0..GAUSS_AFFINE_CLASSES)
        .map(|_| (0..GAUSS_AFFINE_DIM).map(|_| 3.0 * normal(&mut g)).collect())
        .collect()
}

// Source: isotropic 3-class mixture. Target: an independent draw from the
// same mixture pushed through the fixed SPD affine map.
fn gauss_affine(n: usize, rng: &mut ChaCha8Rng) -> Drawn {
    let map = gauss_affine_map();
    let means = gauss_affine_means();
    let draw = |rng: &mut ChaCha8Rng| {
        let y = rng.random_range(0..GAUSS_AFFINE_CLASSES);
        let x: Vec<f64> = means[y].iter().map(|m| m + normal(rng)).collect();
        (x, y)
    };
    let (s, ys): (Vec<_>, Vec<_>) = (0..n).map(|_| draw(rng)).unzip();
    let (t, yt): (Vec<_>, Vec<_>) = (0..n)
        .map(|_| {
            let (x, y) = draw(rng);
            let mut z = map.a.mul_vec(&x);
            z.iter_mut().zip(&map.b).for_each(|(v, b)| *v += b);
            (z, y)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .unzip();
    (
        dataset(s, Some(ys)),
        dataset(t, Some(yt)),
        Some(GAUSS_AFFINE_CLASSES),
        json!({
            "dim": GAUSS_AFFINE_DIM,
            "classes": GAUSS_AFFINE_CLASSES,
            "class_means": means,
            "a0": map.a.as_slice(),
            "b0": map.b,
        }),
    )
}

/// Generator settings of the `nonlinear_da` family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearDa {
    pub dim: usize,
    pub classes: usize,
    /// Dimension of the subspace holding the class structure.
    pub latent: usize,
    pub separation: f64,
    pub noise: f64,
    /// Class `i` has weight `1 + imbalance * i`.
    pub imbalance: f64,
    /// Angle of the planar rotations applied after the nonlinearity.
    pub theta: f64,
}

impl Default for NonlinearDa {
    fn default() -> Self {
        Self {
            dim: 20,
            classes: 10,
            latent: 4,
            separation: 4.0,
            noise: 1.0,
            imbalance: 4.0,
            theta: 0.7,
        }
    }
}

pub const HETERO_DIM: usize = 30;
/// Labeled target points per class in `hetero_da` (semi-supervised protocol).
pub const HETERO_LABELED_PER_CLASS: usize = 3;

struct NonlinearStructure {
    means: Vec<Vec<f64>>,
    embed: Matrix,
    rotation: Matrix,
    lift: Option<Matrix>,
}

fn nonlinear_structure(p: &NonlinearDa, hetero: Option<usize>) -> NonlinearStructure {
    let d = p.dim;
    let mut g = ChaCha8Rng::seed_from_u64(STRUCTURE_SEED);
    let means = (0..p.classes)
        .map(|_| (0..p.latent).map(|_| p.separation * normal(&mut g)).collect())
        .collect();
    let basis = random_rotation(d, &mut g);
    let embed = basis.select_rows(&(0..p.latent).collect::<Vec<_>>()).scale((d as f64 / p.latent as f64).sqrt());
    let r0 = random_rotation(d, &mut g);
    let mut giv = Matrix::identity(d);
    let (c, s) = (p.theta.cos(), p.theta.sin());
    for q in 0..d / 2 {
        giv[(2 * q, 2 * q)] = c;
        giv[(2 * q, 2 * q + 1)] = -s;
        giv[(2 * q + 1, 2 * q)] = s;
        giv[(2 * q + 1, 2 * q + 1)] = c;
    }
    let rotation = r0.t_matmul(&giv).matmul(&r0);
    let lift = hetero.map(|dt| {
        let w: Vec<Vec<f64>> = (0..dt)
            .map(|_| (0..d).map(|_| normal(&mut g) / (d as f64).sqrt()).collect())
            .collect();
        Matrix::from_rows(&w).expect("rectangular")
    });
    NonlinearStructure {
        means,
        embed,
        rotation,
        lift,
    }
}

// Imbalanced Gaussian blobs on a low-dimensional subspace of R^d plus
// isotropic noise. The target is tanh applied element-wise, then a partial
// rotation (or, for the heterogeneous variant, a fixed random lift to a wider
// space followed by tanh).
fn nonlinear_da(p: &NonlinearDa, n: usize, hetero: Option<usize>, rng: &mut ChaCha8Rng) -> Drawn {
    let st = nonlinear_structure(p, hetero);
    let c = p.classes;
    let weights: Vec<f64> = (0..c).map(|i| 1.0 + p.imbalance * i as f64).collect();
    let total: f64 = weights.iter().sum();
    let draw = |rng: &mut ChaCha8Rng| {
        let mut r = rng.random::<f64>() * total;
        let mut y = c - 1;
        for (i, w) in weights.iter().enumerate() {
            if r < *w {
                y = i;
                break;
            }
            r -= w;
        }
        let sd = 1.0 + 0.5 * p.imbalance.min(1.0) * (y as f64 / (c - 1).max(1) as f64 - 0.5);
        let u: Vec<f64> = st.means[y].iter().map(|m| m + sd * normal(rng)).collect();
        let mut x = st.embed.t_matmul(&Matrix::from_vec(p.latent, 1, u).expect("column")).into_vec();
        x.iter_mut().for_each(|v| *v += p.noise * normal(rng));
        (x, y)
    };
    let (s, ys): (Vec<_>, Vec<_>) = (0..n).map(|_| draw(rng)).unzip();
    let (t, yt): (Vec<_>, Vec<_>) = (0..n)
        .map(|_| {
            let (x, y) = draw(rng);
            let z = match &st.lift {
                Some(w) => w.mul_vec(&x).into_iter().map(f64::tanh).collect(),
                None => {
                    let phi: Vec<f64> = x.into_iter().map(f64::tanh).collect();
                    st.rotation.mul_vec(&phi)
                }
            };
            (z, y)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .unzip();
    let mut params = serde_json::to_value(p).expect("plain struct");
    params["nonlinearity"] = json!("tanh");
    params["target_dim"] = json!(hetero.unwrap_or(p.dim));
    (dataset(s, Some(ys)), dataset(t, Some(yt)), Some(c), params)
}

/// Class construction of the `nonlinear_da` generator applied to `n` points
/// with their latent coordinates, used to check that classes are separable
/// before the nonlinearity.
pub fn nonlinear_da_latents(seed: u64, n: usize) -> (Matrix, Vec<usize>) {
    let p = NonlinearDa::default();
    let st = nonlinear_structure(&p, None);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, ys): (Vec<Vec<f64>>, Vec<usize>) = (0..n)
        .map(|_| {
            let y = rng.random_range(0..p.classes);
            (st.means[y].iter().map(|m| m + normal(&mut rng)).collect(), y)
        })
        .unzip();
    (Matrix::from_rows(&rows).expect("rectangular"), ys)
}

// Source N(0, I); target N(1, diag(1 + j/d)). Unlabelled.
fn large_n(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Drawn {
    let s: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(rng)).collect()).collect();
    let t: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|j| 1.0 + (1.0 + j as f64 / d as f64).sqrt() * normal(rng))
                .collect()
        })
        .collect();
    (dataset(s, None), dataset(t, None), None, json!({"dim": d}))
}
