//! Downstream evaluation: kNN transfer accuracy, raw-feature OT baselines,
//! reverse validation and the worst-case bound diagnostic.
//!
//! Timing is left to the caller: every report comes back with
//! `runtime_seconds = 0` and the std crate fills it in.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::discrete_ot::{barycentric_map, w2_empirical_plan};
use crate::error::{invalid, Result};
use crate::gaussian_ot::{apply_map, estimate_stats, fit_linear_monge, DEFAULT_COV_REG};
use crate::laot::{encode, train, transfer, Domain, ExperimentConfig, LaotModel};
use crate::linalg::{squared_distance, Matrix};
use crate::math::sqrt;
use crate::rng::{self, tags};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    labeled_mask: Option<Vec<bool>>,
}

impl LabeledDataset {
    /// `num_classes` defaults to `max(label) + 1`.
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: Option<usize>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(invalid!(
                "{} labels for {} samples",
                labels.len(),
                features.rows()
            ));
        }
        let inferred = labels.iter().max().map_or(0, |m| m + 1);
        let num_classes = num_classes.unwrap_or(inferred);
        if inferred > num_classes {
            return Err(invalid!("label {} out of range for {num_classes} classes", inferred - 1));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            labeled_mask: None,
        })
    }

    /// Marks which samples may be used as labeled training points.
    pub fn with_labeled_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(invalid!("mask has {} entries for {} samples", mask.len(), self.len()));
        }
        self.labeled_mask = Some(mask);
        Ok(self)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labeled_mask(&self) -> Option<&[bool]> {
        self.labeled_mask.as_deref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            labeled_mask: self
                .labeled_mask
                .as_ref()
                .map(|m| idx.iter().map(|&i| m[i]).collect()),
        }
    }

    /// Same labels, new features (e.g. embeddings).
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        let mut out = Self::new(features, self.labels.clone(), Some(self.num_classes))?;
        out.labeled_mask = self.labeled_mask.clone();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub accuracy: f64,
    /// Zero for classes absent from the scored set.
    pub per_class_accuracy: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub method_tag: String,
    pub runtime_seconds: f64,
}

impl EvalReport {
    pub fn from_predictions(predicted: &[usize], truth: &[usize], num_classes: usize, tag: &str) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(invalid!("{} predictions for {} labels", predicted.len(), truth.len()));
        }
        if truth.is_empty() {
            return Err(invalid!("nothing to score"));
        }
        let mut counts = vec![0usize; num_classes];
        let mut correct = vec![0usize; num_classes];
        for (&p, &t) in predicted.iter().zip(truth) {
            if t >= num_classes {
                return Err(invalid!("label {t} out of range for {num_classes} classes"));
            }
            counts[t] += 1;
            if p == t {
                correct[t] += 1;
            }
        }
        let per_class = counts
            .iter()
            .zip(&correct)
            .map(|(&n, &c)| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect();
        Ok(Self {
            accuracy: correct.iter().sum::<usize>() as f64 / truth.len() as f64,
            per_class_accuracy: per_class,
            class_counts: counts,
            method_tag: tag.into(),
            runtime_seconds: 0.0,
        })
    }
}

/// Majority vote among the `k` nearest training points (Euclidean). Equal
/// distances are ordered by training index; tied votes go to the class with
/// the smallest summed distance, then to the smallest class id.
pub fn knn_predict(train: &LabeledDataset, query: &Matrix, k: usize) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(invalid!("kNN training set is empty"));
    }
    if k == 0 || k > train.len() {
        return Err(invalid!("k = {k} must be in 1..={}", train.len()));
    }
    if query.cols() != train.dim() {
        return Err(invalid!(
            "query has {} columns, training set has {}",
            query.cols(),
            train.dim()
        ));
    }
    let n = train.len();
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut votes = vec![0usize; train.num_classes()];
    let mut dist_sum = vec![0.0; train.num_classes()];
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let mut out = Vec::with_capacity(query.rows());
    for q in query.row_iter() {
        cand.clear();
        cand.extend(
            train
                .features()
                .row_iter()
                .enumerate()
                .map(|(i, x)| (sqrt(squared_distance(q, x)), i)),
        );
        if k < n {
            cand.select_nth_unstable_by(k - 1, order);
        }
        votes.fill(0);
        dist_sum.fill(0.0);
        for &(d, i) in &cand[..k] {
            let c = train.labels()[i];
            votes[c] += 1;
            dist_sum[c] += d;
        }
        let best = (0..votes.len())
            .filter(|&c| votes[c] > 0)
            .min_by(|&a, &b| {
                votes[b]
                    .cmp(&votes[a])
                    .then(dist_sum[a].total_cmp(&dist_sum[b]))
                    .then(a.cmp(&b))
            })
            .expect("k >= 1");
        out.push(best);
    }
    Ok(out)
}

/// Splits a target set into (labeled training points, scored points). Without
/// a mask nothing is labeled and everything is scored.
fn target_split(target: &LabeledDataset) -> (Vec<usize>, Vec<usize>) {
    match target.labeled_mask() {
        None => (Vec::new(), (0..target.len()).collect()),
        Some(mask) => (0..target.len()).partition(|&i| mask[i]),
    }
}

/// Trains kNN on the transferred source (plus labeled target embeddings when a
/// mask is present) and scores the remaining target points.
pub fn evaluate_transfer(
    model: &LaotModel,
    source: &LabeledDataset,
    target: &LabeledDataset,
    k: usize,
) -> Result<EvalReport> {
    let classes = source.num_classes().max(target.num_classes());
    let zt = encode(model, target.features(), Domain::Target)?;
    let (labeled, scored) = target_split(target);
    let mut train_set = LabeledDataset::new(
        transfer(model, source.features())?,
        source.labels().to_vec(),
        Some(classes),
    )?;
    if !labeled.is_empty() {
        let extra = zt.select_rows(&labeled);
        let labels = labeled.iter().map(|&i| target.labels()[i]);
        train_set = LabeledDataset::new(
            train_set.features().vstack(&extra)?,
            train_set.labels().iter().copied().chain(labels).collect(),
            Some(classes),
        )?;
    }
    let pred = knn_predict(&train_set, &zt.select_rows(&scored), k)?;
    let truth: Vec<usize> = scored.iter().map(|&i| target.labels()[i]).collect();
    EvalReport::from_predictions(&pred, &truth, classes, "laot")
}

/// Pseudo-labels for unlabeled target features using the transfer classifier.
pub fn pseudo_label(model: &LaotModel, source: &LabeledDataset, target_features: &Matrix, k: usize) -> Result<Vec<usize>> {
    let train_set = source.with_features(transfer(model, source.features())?)?;
    knn_predict(&train_set, &encode(model, target_features, Domain::Target)?, k)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RvScore {
    pub score: f64,
    /// Every target point received the same pseudo-label.
    pub collapsed: bool,
}

/// Settings of reverse validation beyond the model configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvOptions {
    pub k: usize,
    /// Fraction of the source kept for training; the rest is held out.
    pub train_fraction: f64,
}

impl Default for RvOptions {
    fn default() -> Self {
        Self {
            k: 3,
            train_fraction: 0.8,
        }
    }
}

/// Random split of `0..n` into (train, held-out) by `fraction`.
pub fn holdout_split(n: usize, fraction: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let cut = ((n as f64 * fraction) as usize).clamp(1, n.saturating_sub(1).max(1));
    let held = idx.split_off(cut);
    (idx, held)
}

/// Label-free model score. The forward model pseudo-labels the target, a
/// reverse model is trained from the pseudo-labeled target back to the source,
/// and its transfer accuracy on held-out source points is returned. The target
/// is passed as bare features, so no target label can be read.
pub fn reverse_validation_score<F>(
    model_factory: F,
    source: &LabeledDataset,
    target_features: &Matrix,
    config: &ExperimentConfig,
    options: RvOptions,
) -> Result<RvScore>
where
    F: Fn(usize, usize, &ExperimentConfig) -> Result<LaotModel>,
{
    if !(options.train_fraction > 0.0 && options.train_fraction < 1.0) {
        return Err(invalid!("train_fraction must lie in (0, 1)"));
    }
    config.validate()?;
    let mut split_rng = rng::stream(config.seed, tags::RV_SPLIT);
    let (fit_idx, held_idx) = holdout_split(source.len(), options.train_fraction, &mut split_rng);
    let src_fit = source.subset(&fit_idx);
    let src_held = source.subset(&held_idx);

    let mut forward_model = model_factory(source.dim(), target_features.cols(), config)?;
    train(&mut forward_model, src_fit.features(), target_features)?;
    let pseudo = pseudo_label(&forward_model, &src_fit, target_features, options.k)?;
    let collapsed = pseudo.iter().all(|&c| c == pseudo[0]);

    let pseudo_set = LabeledDataset::new(target_features.clone(), pseudo, Some(source.num_classes()))?;
    let mut reverse_model = model_factory(target_features.cols(), source.dim(), config)?;
    train(&mut reverse_model, target_features, source.features())?;
    let report = evaluate_transfer(&reverse_model, &pseudo_set, &src_held, options.k)?;
    Ok(RvScore {
        score: report.accuracy,
        collapsed,
    })
}

/// Linear Monge map fitted on raw features, then kNN on the mapped source.
pub fn ot_gauss_baseline(source: &LabeledDataset, target: &LabeledDataset, k: usize) -> Result<EvalReport> {
    same_width(source, target)?;
    let s = estimate_stats(source.features())?;
    let t = estimate_stats(target.features())?;
    let map = fit_linear_monge(&s, &t, DEFAULT_COV_REG)?;
    let mapped = apply_map(&map, source.features())?;
    knn_report(source, mapped, target, k, "ot_gauss")
}

/// Exact plan on raw features, barycentric projection of the source, kNN.
pub fn emd_barycentric_baseline(source: &LabeledDataset, target: &LabeledDataset, k: usize) -> Result<EvalReport> {
    same_width(source, target)?;
    let plan = w2_empirical_plan(source.features(), target.features())?;
    let mapped = barycentric_map(&plan, target.features())?;
    knn_report(source, mapped, target, k, "emd_barycentric")
}

/// kNN trained directly on raw source features.
pub fn source_only_baseline(source: &LabeledDataset, target: &LabeledDataset, k: usize) -> Result<EvalReport> {
    same_width(source, target)?;
    knn_report(source, source.features().clone(), target, k, "source_only")
}

fn same_width(source: &LabeledDataset, target: &LabeledDataset) -> Result<()> {
    if source.dim() != target.dim() {
        return Err(invalid!(
            "raw-feature baselines need equal widths, got {} and {}",
            source.dim(),
            target.dim()
        ));
    }
    Ok(())
}

fn knn_report(source: &LabeledDataset, mapped: Matrix, target: &LabeledDataset, k: usize, tag: &str) -> Result<EvalReport> {
    let classes = source.num_classes().max(target.num_classes());
    let train_set = LabeledDataset::new(mapped, source.labels().to_vec(), Some(classes))?;
    let (_, scored) = target_split(target);
    let pred = knn_predict(&train_set, &target.features().select_rows(&scored), k)?;
    let truth: Vec<usize> = scored.iter().map(|&i| target.labels()[i]).collect();
    EvalReport::from_predictions(&pred, &truth, classes, tag)
}

/// A hard classifier on the embedding space.
pub trait Classifier {
    fn predict(&self, z: &Matrix) -> Result<Vec<usize>>;
}

pub struct KnnClassifier {
    pub train: LabeledDataset,
    pub k: usize,
}

impl Classifier for KnnClassifier {
    fn predict(&self, z: &Matrix) -> Result<Vec<usize>> {
        knn_predict(&self.train, z, self.k)
    }
}

pub struct ConstantClassifier(pub usize);

impl Classifier for ConstantClassifier {
    fn predict(&self, z: &Matrix) -> Result<Vec<usize>> {
        Ok(vec![self.0; z.rows()])
    }
}

/// Both sides of the worst-case bound, with each right-hand term kept apart.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundDiagnostic {
    /// 0/1 risk of the classifier on the target embeddings.
    pub lhs_risk: f64,
    pub bound: f64,
    /// 0/1 risk on the mapped source embeddings.
    pub source_risk: f64,
    /// Largest sampled `‖h(z) − h(z')‖ / ‖z − z'‖` with one-hot outputs.
    pub lipschitz_estimate: f64,
    /// Pair (indices into mapped source followed by target embeddings)
    /// attaining `lipschitz_estimate`.
    pub lipschitz_pair: Option<(usize, usize)>,
    pub target_cov_trace: f64,
    /// Summed source and target risk of a 3NN fitted on both labeled sets.
    pub joint_term: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Number of embedding pairs sampled for the Lipschitz estimate.
pub const LIPSCHITZ_PAIRS: usize = 10_000;

/// Evaluates `source_risk + 2√2·M̂_h·√tr(Σ_T) + joint_term` against the
/// target risk. Target labels are read here; this is a diagnostic only.
pub fn worst_case_bound_diag(
    model: &LaotModel,
    source: &LabeledDataset,
    target: &LabeledDataset,
    classifier: &dyn Classifier,
) -> Result<BoundDiagnostic> {
    let mapped = transfer(model, source.features())?;
    let zt = encode(model, target.features(), Domain::Target)?;
    let risk = |pred: &[usize], truth: &[usize]| {
        pred.iter().zip(truth).filter(|(p, t)| p != t).count() as f64 / truth.len().max(1) as f64
    };
    let pred_s = classifier.predict(&mapped)?;
    let pred_t = classifier.predict(&zt)?;
    let source_risk = risk(&pred_s, source.labels());
    let lhs_risk = risk(&pred_t, target.labels());

    let all = mapped.vstack(&zt)?;
    let all_pred: Vec<usize> = pred_s.iter().chain(&pred_t).copied().collect();
    let mut rng = rng::stream(model.config.seed, tags::LIPSCHITZ_PAIRS);
    let (mut lip, mut pair) = (0.0f64, None);
    let n = all.rows();
    for _ in 0..LIPSCHITZ_PAIRS {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if all_pred[i] == all_pred[j] {
            continue;
        }
        let d = sqrt(squared_distance(all.row(i), all.row(j)));
        let ratio = if d > 0.0 { core::f64::consts::SQRT_2 / d } else { f64::INFINITY };
        if ratio > lip {
            lip = ratio;
            pair = Some((i, j));
        }
    }
    let target_cov_trace = estimate_stats(&zt)?.cov().trace();

    let union = LabeledDataset::new(
        all.clone(),
        source.labels().iter().chain(target.labels()).copied().collect(),
        Some(source.num_classes().max(target.num_classes())),
    )?;
    let joint = KnnClassifier {
        k: 3.min(union.len()),
        train: union,
    };
    let joint_term = risk(&joint.predict(&mapped)?, source.labels()) + risk(&joint.predict(&zt)?, target.labels());

    let transport_term = if lip == 0.0 {
        0.0
    } else {
        2.0 * core::f64::consts::SQRT_2 * lip * sqrt(target_cov_trace.max(0.0))
    };
    let bound = source_risk + transport_term + joint_term;
    Ok(BoundDiagnostic {
        lhs_risk,
        bound,
        source_risk,
        lipschitz_estimate: lip,
        lipschitz_pair: pair,
        target_cov_trace,
        joint_term,
        slack: bound - lhs_risk,
        holds: lhs_risk <= bound,
    })
}
