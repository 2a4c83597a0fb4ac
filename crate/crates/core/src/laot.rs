//! Coupled autoencoders trained to produce linearly alignable embeddings.
//!
//! Each domain gets an encoder `d → d/2 → k` and a mirrored decoder. A training
//! step minimises `L_rec + λ·L_la`, where `L_la` is the exact squared W2
//! between the source batch pushed through the closed-form Monge map fitted
//! on batch statistics and the target batch. The map `(A, b)` and the optimal
//! plan are treated as constants when differentiating `L_la`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::discrete_ot::{cost_matrix, sinkhorn, w2_empirical_plan, PointCloud, SinkhornParams};
use crate::error::{invalid, Error, Result};
use crate::gaussian_ot::{apply_map, estimate_stats, fit_linear_monge, AffineMap, DEFAULT_COV_REG};
use crate::linalg::Matrix;
use crate::math::sqrt;
use crate::nn::{self, Activation, AdamState, Gradients, MlpParams};
use crate::rng::{self, tags};

/// Solver used for the batch-level alignment cost.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LaSolver {
    Exact,
    /// Sinkhorn with `epsilon` relative to the mean batch cost.
    Entropic(f64),
}

impl fmt::Display for LaSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LaSolver::Exact => f.write_str("exact"),
            LaSolver::Entropic(eps) => write!(f, "entropic:{eps}"),
        }
    }
}

impl FromStr for LaSolver {
    type Err = Error;

    /// `exact`, `entropic` (ε = 0.05) or `entropic:<ε>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(LaSolver::Exact),
            "entropic" => Ok(LaSolver::Entropic(0.05)),
            _ => {
                let eps = s
                    .strip_prefix("entropic:")
                    .and_then(|e| e.parse::<f64>().ok())
                    .ok_or_else(|| invalid!("unknown alignment solver `{s}`"))?;
                if !(eps > 0.0) || !eps.is_finite() {
                    return Err(invalid!("entropic epsilon must be positive, got {eps}"));
                }
                Ok(LaSolver::Entropic(eps))
            }
        }
    }
}

/// How the alignment term feeds back into the encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MapGradientMode {
    /// Map and plan frozen; gradient flows through the embeddings in the cost.
    StopGradient,
    /// The alignment term is computed and logged but sends no gradient.
    None,
}

impl fmt::Display for MapGradientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapGradientMode::StopGradient => "stop_gradient",
            MapGradientMode::None => "none",
        })
    }
}

impl FromStr for MapGradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stop_gradient" => Ok(MapGradientMode::StopGradient),
            "none" => Ok(MapGradientMode::None),
            _ => Err(invalid!("unknown map gradient mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ExperimentConfig {
    pub latent_dim: usize,
    pub lambda: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub cov_reg: f64,
    pub grad_clip: f64,
    pub la_solver: LaSolver,
    pub map_gradient_mode: MapGradientMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            lambda: 1.0,
            batch_size: 64,
            learning_rate: 1e-3,
            epochs: 20,
            seed: 0,
            cov_reg: DEFAULT_COV_REG,
            grad_clip: 1.0,
            la_solver: LaSolver::Exact,
            map_gradient_mode: MapGradientMode::StopGradient,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(invalid!("latent_dim must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(invalid!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid!("lambda must be finite and non-negative, got {}", self.lambda));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.cov_reg >= 0.0) || !self.cov_reg.is_finite() {
            return Err(invalid!("cov_reg must be finite and non-negative, got {}", self.cov_reg));
        }
        if !(self.grad_clip > 0.0) {
            return Err(invalid!("grad_clip must be positive, got {}", self.grad_clip));
        }
        if let LaSolver::Entropic(eps) = self.la_solver {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(invalid!("entropic epsilon must be positive, got {eps}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaotModel {
    pub enc_s: MlpParams,
    pub dec_s: MlpParams,
    pub enc_t: MlpParams,
    pub dec_t: MlpParams,
    pub fitted_map: Option<AffineMap>,
    pub config: ExperimentConfig,
}

/// `[d, max(d/2, 1), k]` with a ReLU hidden layer and linear output.
pub fn encoder_dims(input_dim: usize, latent_dim: usize) -> [usize; 3] {
    [input_dim, (input_dim / 2).max(1), latent_dim]
}

const ACTIVATIONS: [Activation; 2] = [Activation::Relu, Activation::Linear];

impl LaotModel {
    /// Fresh networks; each one is initialised from its own seed derived from
    /// `config.seed`.
    pub fn new(source_dim: usize, target_dim: usize, config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let k = config.latent_dim;
        let net = |dims: [usize; 3], tag| nn::init_params(&dims, &ACTIVATIONS, rng::derive_seed(config.seed, tag));
        let rev = |[a, b, c]: [usize; 3]| [c, b, a];
        // Equal input widths: both domains start from the same networks.
        let tag_t = |shared, own| if source_dim == target_dim { shared } else { own };
        Ok(Self {
            enc_s: net(encoder_dims(source_dim, k), tags::ENC_S)?,
            dec_s: net(rev(encoder_dims(source_dim, k)), tags::DEC_S)?,
            enc_t: net(encoder_dims(target_dim, k), tag_t(tags::ENC_S, tags::ENC_T))?,
            dec_t: net(rev(encoder_dims(target_dim, k)), tag_t(tags::DEC_S, tags::DEC_T))?,
            fitted_map: None,
            config,
        })
    }

    pub fn source_dim(&self) -> usize {
        self.enc_s.in_dim()
    }

    pub fn target_dim(&self) -> usize {
        self.enc_t.in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.enc_s.out_dim()
    }

    /// Checks the structural invariants (shared latent width, mirrored decoders).
    pub fn validate(&self) -> Result<()> {
        let k = self.config.latent_dim;
        if self.enc_s.out_dim() != k || self.enc_t.out_dim() != k {
            return Err(invalid!("encoders must both output {k} values"));
        }
        let mut rs = self.dec_s.dims();
        let mut rt = self.dec_t.dims();
        rs.reverse();
        rt.reverse();
        if rs != self.enc_s.dims() || rt != self.enc_t.dims() {
            return Err(invalid!("decoder widths must mirror the encoder widths"));
        }
        if let Some(map) = &self.fitted_map {
            if map.dim() != k {
                return Err(invalid!("fitted map has dimension {} but latent_dim is {k}", map.dim()));
            }
        }
        Ok(())
    }

    fn nets(&self, domain: Domain) -> (&MlpParams, &MlpParams) {
        match domain {
            Domain::Source => (&self.enc_s, &self.dec_s),
            Domain::Target => (&self.enc_t, &self.dec_t),
        }
    }
}

pub fn encode(model: &LaotModel, x: &Matrix, domain: Domain) -> Result<Matrix> {
    Ok(nn::forward(model.nets(domain).0, x)?.0)
}

pub fn decode(model: &LaotModel, z: &Matrix, domain: Domain) -> Result<Matrix> {
    Ok(nn::forward(model.nets(domain).1, z)?.0)
}

/// Source samples encoded and pushed into the target embedding space.
pub fn transfer(model: &LaotModel, xs: &Matrix) -> Result<Matrix> {
    let map = model
        .fitted_map
        .as_ref()
        .ok_or_else(|| Error::InvalidState("model has no fitted map; train it first".into()))?;
    if xs.rows() == 0 {
        if xs.cols() != model.source_dim() {
            return Err(invalid!("input has {} columns, expected {}", xs.cols(), model.source_dim()));
        }
        return Ok(Matrix::zeros(0, model.latent_dim()));
    }
    apply_map(map, &encode(model, xs, Domain::Source)?)
}

fn mean_squared_error(x: &Matrix, y: &Matrix) -> f64 {
    let n = x.rows().max(1) as f64;
    x.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n
}

/// `E‖x − dec(enc(x))‖²` over each batch, summed over both domains.
pub fn reconstruction_loss(model: &LaotModel, xs: &Matrix, xt: &Matrix) -> Result<f64> {
    let mut total = 0.0;
    for (x, domain) in [(xs, Domain::Source), (xt, Domain::Target)] {
        let r = decode(model, &encode(model, x, domain)?, domain)?;
        total += mean_squared_error(&r, x);
    }
    Ok(total)
}

/// Everything computed while evaluating the alignment term on one batch.
#[derive(Debug, Clone)]
pub struct AlignmentEval {
    pub loss: f64,
    pub map: AffineMap,
    pub pushed: Matrix,
    pub plan: Matrix,
}

impl AlignmentEval {
    /// Gradient of `Σᵢⱼ γᵢⱼ‖A zᵢ + b − zⱼ‖²` w.r.t. `zs` and `zt`, with map and
    /// plan held fixed.
    pub fn gradients(&self, zt: &Matrix) -> (Matrix, Matrix) {
        let a_mat = &self.map.a;
        let plan = &self.plan;
        let y = &self.pushed;
        let rows = plan.row_iter().map(|r| r.iter().sum::<f64>());
        // Σⱼ γᵢⱼ (yᵢ − zⱼ) = rᵢ yᵢ − (γ Zt)ᵢ
        let mut resid_s = plan.matmul(zt).scale(-1.0);
        for (i, r) in rows.enumerate() {
            resid_s.row_mut(i).iter_mut().zip(y.row(i)).for_each(|(v, y)| *v += r * y);
        }
        let grad_s = resid_s.matmul(a_mat).scale(2.0);
        // Σᵢ γᵢⱼ (yᵢ − zⱼ) = (γᵀ Y)ⱼ − cⱼ zⱼ
        let mut resid_t = plan.t_matmul(y);
        let mut cols = alloc::vec![0.0; plan.cols()];
        for r in plan.row_iter() {
            cols.iter_mut().zip(r).for_each(|(c, p)| *c += p);
        }
        for (j, c) in cols.iter().enumerate() {
            resid_t.row_mut(j).iter_mut().zip(zt.row(j)).for_each(|(v, z)| *v -= c * z);
        }
        (grad_s, resid_t.scale(-2.0))
    }
}

fn check_batches(zs: &Matrix, zt: &Matrix) -> Result<()> {
    if zs.cols() != zt.cols() {
        return Err(invalid!("embedding widths differ: {} vs {}", zs.cols(), zt.cols()));
    }
    if zs.rows() < 2 || zt.rows() < 2 {
        return Err(invalid!(
            "alignment needs at least two points per batch, got {} and {}",
            zs.rows(),
            zt.rows()
        ));
    }
    Ok(())
}

fn transport(pushed: &Matrix, zt: &Matrix, solver: LaSolver) -> Result<(f64, Matrix)> {
    match solver {
        LaSolver::Exact => {
            let c = w2_empirical_plan(pushed, zt)?;
            Ok((c.cost, c.plan))
        }
        LaSolver::Entropic(rel_eps) => {
            let cost = cost_matrix(pushed, zt)?;
            let mut params = SinkhornParams::default_for(&cost);
            params.epsilon *= rel_eps / 0.05;
            let c = sinkhorn(
                &PointCloud::uniform(pushed.clone())?,
                &PointCloud::uniform(zt.clone())?,
                &cost,
                params,
            )?;
            Ok((c.cost.max(0.0), c.plan))
        }
    }
}

/// Fits the Monge map on batch statistics, pushes `zs` and transports.
pub fn la_evaluate(zs: &Matrix, zt: &Matrix, cov_reg: f64, solver: LaSolver) -> Result<AlignmentEval> {
    check_batches(zs, zt)?;
    let describe = |e: Error| match e {
        Error::NumericalFailure(msg) => Error::NumericalFailure(format!(
            "{msg} (batch sizes {} and {}, latent width {}, cov_reg {cov_reg:e})",
            zs.rows(),
            zt.rows(),
            zs.cols()
        )),
        other => other,
    };
    let s = estimate_stats(zs).map_err(describe)?;
    let t = estimate_stats(zt).map_err(describe)?;
    let map = fit_linear_monge(&s, &t, cov_reg).map_err(describe)?;
    let pushed = apply_map(&map, zs)?;
    let (loss, plan) = transport(&pushed, zt, solver)?;
    Ok(AlignmentEval {
        loss,
        map,
        pushed,
        plan,
    })
}

/// Alignment term with the identity in place of the fitted map.
pub fn invariant_evaluate(zs: &Matrix, zt: &Matrix, solver: LaSolver) -> Result<AlignmentEval> {
    check_batches(zs, zt)?;
    let (loss, plan) = transport(zs, zt, solver)?;
    Ok(AlignmentEval {
        loss,
        map: AffineMap::identity(zs.cols()),
        pushed: zs.clone(),
        plan,
    })
}

/// Exact alignment loss and the batch map.
pub fn la_loss(zs: &Matrix, zt: &Matrix, cov_reg: f64) -> Result<(f64, AffineMap)> {
    let e = la_evaluate(zs, zt, cov_reg, LaSolver::Exact)?;
    Ok((e.loss, e.map))
}

/// Gradients of the exact alignment loss with map and plan frozen.
pub fn la_loss_grad(
    zs: &Matrix,
    zt: &Matrix,
    cov_reg: f64,
    mode: MapGradientMode,
) -> Result<(Matrix, Matrix)> {
    if mode != MapGradientMode::StopGradient {
        return Err(invalid!("only the stop_gradient mode has a gradient"));
    }
    Ok(la_evaluate(zs, zt, cov_reg, LaSolver::Exact)?.gradients(zt))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub l_rec: f64,
    /// `None` when the batch map could not be fitted and the term was skipped.
    pub l_la: Option<f64>,
    pub total: f64,
    /// Joint gradient norm of all four networks before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochSummary {
    pub epoch: usize,
    pub l_rec: f64,
    /// Mean over the steps where the term was evaluated.
    pub l_la: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochSummary>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Alignment {
    LinearMonge,
    Invariant,
}

/// Shuffled index batches for one epoch; a trailing batch with fewer than two
/// points is dropped.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut impl rand::Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(|c| c.to_vec())
        .collect()
}

/// One autoencoder pass: reconstruction loss plus everything needed to
/// backpropagate.
struct AePass {
    z: Matrix,
    enc_cache: nn::ForwardCache,
    dec_cache: nn::ForwardCache,
    loss: f64,
    recon_grad: Matrix,
}

fn ae_forward(enc: &MlpParams, dec: &MlpParams, x: &Matrix) -> Result<AePass> {
    let (z, enc_cache) = nn::forward(enc, x)?;
    let (r, dec_cache) = nn::forward(dec, &z)?;
    let loss = mean_squared_error(&r, x);
    let recon_grad = r.sub(x).scale(2.0 / x.rows() as f64);
    Ok(AePass {
        z,
        enc_cache,
        dec_cache,
        loss,
        recon_grad,
    })
}

fn ae_backward(
    enc: &MlpParams,
    dec: &MlpParams,
    pass: &AePass,
    extra_z_grad: Option<&Matrix>,
) -> Result<(Gradients, Gradients)> {
    let (g_dec, mut g_z) = nn::backward(dec, &pass.dec_cache, &pass.recon_grad)?;
    if let Some(extra) = extra_z_grad {
        g_z = g_z.add(extra);
    }
    let (g_enc, _) = nn::backward(enc, &pass.enc_cache, &g_z)?;
    Ok((g_enc, g_dec))
}

fn at_step(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::NumericalFailure(msg) => {
            Error::NumericalFailure(format!("epoch {epoch}, step {step}: {msg}"))
        }
        Error::InvalidInput(msg) => Error::InvalidInput(format!("epoch {epoch}, step {step}: {msg}")),
        other => other,
    }
}

fn train_impl(
    model: &mut LaotModel,
    xs: &Matrix,
    xt: &Matrix,
    alignment: Alignment,
) -> Result<TrainLog> {
    let cfg = model.config.clone();
    cfg.validate()?;
    model.validate()?;
    if xs.cols() != model.source_dim() || xt.cols() != model.target_dim() {
        return Err(invalid!(
            "data widths {} and {} do not match encoder inputs {} and {}",
            xs.cols(),
            xt.cols(),
            model.source_dim(),
            model.target_dim()
        ));
    }
    if xs.rows() < 2 || xt.rows() < 2 {
        return Err(invalid!("each domain needs at least two samples"));
    }
    if !xs.is_finite() || !xt.is_finite() {
        return Err(invalid!("training data contains non-finite values"));
    }

    let mut rng_s = rng::stream(cfg.seed, tags::SHUFFLE_S);
    let mut rng_t = rng::stream(cfg.seed, tags::SHUFFLE_T);
    let mut adam = [
        AdamState::new(&model.enc_s),
        AdamState::new(&model.dec_s),
        AdamState::new(&model.enc_t),
        AdamState::new(&model.dec_t),
    ];
    let mut log = TrainLog::default();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let bs = epoch_batches(xs.rows(), cfg.batch_size, &mut rng_s);
        let bt = epoch_batches(xt.rows(), cfg.batch_size, &mut rng_t);
        let (mut sum_rec, mut sum_la, mut sum_total, mut n_la, mut n_steps) = (0.0, 0.0, 0.0, 0usize, 0usize);
        for (is, it) in bs.iter().zip(&bt) {
            let rec = train_step(model, &mut adam, &xs.select_rows(is), &xt.select_rows(it), alignment, &cfg)
                .map_err(|e| at_step(e, epoch, step))?;
            if let Some(msg) = &rec.warning {
                log.warnings.push(format!("epoch {epoch}, step {step}: {msg}"));
            }
            sum_rec += rec.l_rec;
            sum_total += rec.total;
            if let Some(la) = rec.l_la {
                sum_la += la;
                n_la += 1;
            }
            n_steps += 1;
            log.steps.push(StepRecord {
                epoch,
                step,
                l_rec: rec.l_rec,
                l_la: rec.l_la,
                total: rec.total,
                grad_norm: rec.grad_norm,
            });
            step += 1;
        }
        let n = n_steps.max(1) as f64;
        log.epochs.push(EpochSummary {
            epoch,
            l_rec: sum_rec / n,
            l_la: (n_la > 0).then(|| sum_la / n_la as f64),
            total: sum_total / n,
        });
    }
    match alignment {
        Alignment::LinearMonge => fit_map(model, xs, xt)?,
        Alignment::Invariant => model.fitted_map = Some(AffineMap::identity(model.latent_dim())),
    }
    Ok(log)
}

struct StepOutcome {
    l_rec: f64,
    l_la: Option<f64>,
    total: f64,
    grad_norm: f64,
    warning: Option<String>,
}

fn train_step(
    model: &mut LaotModel,
    adam: &mut [AdamState; 4],
    xs: &Matrix,
    xt: &Matrix,
    alignment: Alignment,
    cfg: &ExperimentConfig,
) -> Result<StepOutcome> {
    let ps = ae_forward(&model.enc_s, &model.dec_s, xs)?;
    let pt = ae_forward(&model.enc_t, &model.dec_t, xt)?;
    let l_rec = ps.loss + pt.loss;

    let evaluated = match alignment {
        Alignment::LinearMonge => la_evaluate(&ps.z, &pt.z, cfg.cov_reg, cfg.la_solver),
        Alignment::Invariant => invariant_evaluate(&ps.z, &pt.z, cfg.la_solver),
    };
    let (eval, warning) = match evaluated {
        Ok(e) => (Some(e), None),
        Err(Error::NumericalFailure(msg)) => (None, Some(format!("alignment term skipped: {msg}"))),
        Err(Error::NotConverged { iterations, violation }) => (
            None,
            Some(format!(
                "alignment term skipped: Sinkhorn stopped after {iterations} iterations (violation {violation:e})"
            )),
        ),
        Err(e) => return Err(e),
    };
    let l_la = eval.as_ref().map(|e| e.loss);
    let total = l_rec + l_la.map_or(0.0, |la| cfg.lambda * la);
    if !total.is_finite() {
        return Err(crate::error::numerical!("loss is not finite (reconstruction {l_rec}, alignment {l_la:?})"));
    }

    let la_grads = match &eval {
        Some(e) if cfg.lambda > 0.0 && cfg.map_gradient_mode == MapGradientMode::StopGradient => {
            let (gs, gt) = e.gradients(&pt.z);
            Some((gs.scale(cfg.lambda), gt.scale(cfg.lambda)))
        }
        _ => None,
    };
    let (mut g_enc_s, mut g_dec_s) =
        ae_backward(&model.enc_s, &model.dec_s, &ps, la_grads.as_ref().map(|g| &g.0))?;
    let (mut g_enc_t, mut g_dec_t) =
        ae_backward(&model.enc_t, &model.dec_t, &pt, la_grads.as_ref().map(|g| &g.1))?;

    // Clipping is applied per domain so that with λ = 0 the two autoencoders
    // evolve exactly as if trained separately.
    let ns = nn::clip_grad_norm(&mut [&mut g_enc_s, &mut g_dec_s], cfg.grad_clip);
    let nt = nn::clip_grad_norm(&mut [&mut g_enc_t, &mut g_dec_t], cfg.grad_clip);
    let lr = cfg.learning_rate;
    let [a0, a1, a2, a3] = adam;
    nn::adam_step(&mut model.enc_s, &g_enc_s, a0, lr)?;
    nn::adam_step(&mut model.dec_s, &g_dec_s, a1, lr)?;
    nn::adam_step(&mut model.enc_t, &g_enc_t, a2, lr)?;
    nn::adam_step(&mut model.dec_t, &g_dec_t, a3, lr)?;
    Ok(StepOutcome {
        l_rec,
        l_la,
        total,
        grad_norm: sqrt(ns * ns + nt * nt),
        warning,
    })
}

/// Fits `fitted_map` on the full encoded datasets.
pub fn fit_map(model: &mut LaotModel, xs: &Matrix, xt: &Matrix) -> Result<()> {
    let zs = encode(model, xs, Domain::Source)?;
    let zt = encode(model, xt, Domain::Target)?;
    let s = estimate_stats(&zs)?;
    let t = estimate_stats(&zt)?;
    model.fitted_map = Some(fit_linear_monge(&s, &t, model.config.cov_reg)?);
    Ok(())
}

/// Runs the coupled training loop for `model.config.epochs` epochs and fits
/// the embedding-space map on the full data.
pub fn train(model: &mut LaotModel, xs: &Matrix, xt: &Matrix) -> Result<TrainLog> {
    train_impl(model, xs, xt, Alignment::LinearMonge)
}

/// Same loop with the alignment term replaced by the direct W2 between the
/// embeddings (map fixed to the identity).
pub fn invariant_baseline_train(model: &mut LaotModel, xs: &Matrix, xt: &Matrix) -> Result<TrainLog> {
    train_impl(model, xs, xt, Alignment::Invariant)
}

/// Exact W2 between mapped source embeddings and target embeddings.
pub fn post_map_w2(model: &LaotModel, xs: &Matrix, xt: &Matrix) -> Result<f64> {
    let pushed = transfer(model, xs)?;
    Ok(w2_empirical_plan(&pushed, &encode(model, xt, Domain::Target)?)?.cost)
}

/// Exact W2 between the raw embeddings, without the map.
pub fn direct_w2(model: &LaotModel, xs: &Matrix, xt: &Matrix) -> Result<f64> {
    let zs = encode(model, xs, Domain::Source)?;
    Ok(w2_empirical_plan(&zs, &encode(model, xt, Domain::Target)?)?.cost)
}
