//! Experiment drivers: λ sweep, timing bench, domain adaptation runs and
//! reverse-validation model selection.
//!
//! Every driver records failures per cell and keeps going; the caller decides
//! the exit status from the returned rows.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use laot_core::discrete_ot::{
    cost_matrix, emd_weights, sinkhorn_interruptible, EmdOptions, PointCloud, SinkhornParams,
};
use laot_core::evaluation::{
    emd_barycentric_baseline, evaluate_transfer, ot_gauss_baseline, reverse_validation_score,
    knn_predict, source_only_baseline, worst_case_bound_diag, BoundDiagnostic, EvalReport, KnnClassifier,
    LabeledDataset, RvOptions,
};
use laot_core::gaussian_ot::{apply_map, estimate_stats, fit_linear_monge};
use laot_core::laot::{
    encode, invariant_baseline_train, la_loss, post_map_w2, reconstruction_loss, train, transfer,
    Domain, ExperimentConfig, LaotModel, TrainLog,
};
use laot_core::Matrix;
use serde::Serialize;

use crate::checkpoint::save_model;
use crate::error::{Error, Result};
use crate::io::{load_dataset, sidecar_path, Dataset, Format};
use crate::manifest::{config_hash, hash_files, RunManifest};
use crate::output::{write_json, write_train_log, AggregateRow};
use crate::synthetic::{generate, Task};

/// Identifies the data a run consumed, for hashing and manifests.
#[derive(Debug, Clone, Default)]
pub struct InputSpec {
    pub inputs: Vec<PathBuf>,
    pub input_hash: String,
    pub parameters: serde_json::Value,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => 0.5 * (values[n / 2 - 1] + values[n / 2]),
    }
}

pub fn median_of(values: impl IntoIterator<Item = f64>) -> f64 {
    median(&mut values.into_iter().collect::<Vec<_>>())
}

/// Where a run's source and target samples come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Drawn afresh from each run seed.
    Synthetic { task: Task, n: Option<usize> },
    /// The same files for every seed. The source must be labeled.
    Files {
        source: PathBuf,
        target: PathBuf,
        format: Option<Format>,
        target_labels: bool,
        /// Target points per class revealed to the classifier.
        labeled_per_class: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Pair {
    pub source: Dataset,
    pub target: Dataset,
    pub num_classes: Option<usize>,
    /// The first this many target points of each class are labeled.
    pub labeled_per_class: usize,
    pub input: InputSpec,
}

/// Marks the first `per_class` occurrences of every label.
pub fn first_per_class(labels: &[usize], per_class: usize) -> Vec<bool> {
    let mut seen = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&y| {
            let c = seen.entry(y).or_insert(0usize);
            *c += 1;
            *c <= per_class
        })
        .collect()
}

impl Pair {
    pub fn labeled_source(&self) -> Result<LabeledDataset> {
        self.source.clone().into_labeled(self.num_classes)
    }

    /// Target with its labeled subset marked; those points are used by the
    /// classifier and left out of scoring.
    pub fn labeled_target(&self) -> Result<LabeledDataset> {
        let t = self.target.clone().into_labeled(self.num_classes)?;
        if self.labeled_per_class == 0 {
            return Ok(t);
        }
        let mask = first_per_class(t.labels(), self.labeled_per_class);
        Ok(t.with_labeled_mask(mask)?)
    }
}

fn class_count(sets: &[&Dataset]) -> Option<usize> {
    sets.iter()
        .filter_map(|d| d.labels.as_ref())
        .flat_map(|l| l.iter().copied())
        .max()
        .map(|m| m + 1)
}

impl DataSource {
    pub fn name(&self) -> String {
        match self {
            DataSource::Synthetic { task, .. } => task.to_string(),
            DataSource::Files { source, target, .. } => format!("{}->{}", source.display(), target.display()),
        }
    }

    /// Input description for an experiment-level manifest: file hashes, or
    /// the generator parameters of every seed.
    pub fn describe(&self, seeds: &[u64]) -> Result<InputSpec> {
        match self {
            DataSource::Synthetic { task, n } => {
                let per_seed = seeds
                    .iter()
                    .map(|&s| generate(*task, s, *n).map(|g| g.parameters))
                    .collect::<Result<Vec<_>>>()?;
                Ok(InputSpec {
                    inputs: Vec::new(),
                    input_hash: String::new(),
                    parameters: serde_json::json!({"task": task.to_string(), "n": n, "generators": per_seed}),
                })
            }
            DataSource::Files { .. } => Ok(self.load(seeds.first().copied().unwrap_or(0))?.input),
        }
    }

    pub fn load(&self, seed: u64) -> Result<Pair> {
        match self {
            DataSource::Synthetic { task, n } => {
                let g = generate(*task, seed, *n)?;
                Ok(Pair {
                    source: g.source,
                    target: g.target,
                    num_classes: g.num_classes,
                    labeled_per_class: g.labeled_per_class,
                    input: InputSpec {
                        inputs: Vec::new(),
                        input_hash: String::new(),
                        parameters: g.parameters,
                    },
                })
            }
            DataSource::Files {
                source,
                target,
                format,
                target_labels,
                labeled_per_class,
            } => {
                if *labeled_per_class > 0 && !*target_labels {
                    return Err(Error::invalid("a labeled target subset needs target labels"));
                }
                let fmt_of = |p: &Path| format.unwrap_or_else(|| Format::from_path(p));
                let s = load_dataset(source, fmt_of(source), true)?;
                let t = load_dataset(target, fmt_of(target), *target_labels)?;
                let mut files = vec![source.clone(), target.clone()];
                for p in [source, target] {
                    if fmt_of(p) == Format::Binary {
                        files.push(sidecar_path(p));
                    }
                }
                let input_hash = hash_files(&files)?;
                Ok(Pair {
                    num_classes: class_count(&[&s, &t]),
                    source: s,
                    target: t,
                    labeled_per_class: *labeled_per_class,
                    input: InputSpec {
                        inputs: vec![source.clone(), target.clone()],
                        input_hash,
                        parameters: serde_json::json!({"labeled_per_class": labeled_per_class}),
                    },
                })
            }
        }
    }
}

// λ sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub final_la_loss: Option<f64>,
    pub final_rec_loss: Option<f64>,
    pub w2_after_map: Option<f64>,
    pub status: String,
    pub config_hash: String,
}

/// Trains one model per (λ, seed) and records full-data losses and the
/// post-map empirical W2.
pub fn run_lambda_sweep(base: &ExperimentConfig, lambdas: &[f64], seeds: &[u64], data: &DataSource) -> Vec<SweepRow> {
    let pairs: Vec<Result<Pair>> = seeds.iter().map(|&s| data.load(s)).collect();
    let mut rows = Vec::with_capacity(lambdas.len() * seeds.len());
    for &lambda in lambdas {
        for (&seed, pair) in seeds.iter().zip(&pairs) {
            let config = ExperimentConfig {
                lambda,
                seed,
                ..base.clone()
            };
            let input = pair.as_ref().map(|p| p.input.clone()).unwrap_or_default();
            let hash = config_hash("sweep", &config, &[seed], &input.input_hash, &input.parameters);
            let cell = || -> Result<(f64, f64, f64)> {
                let pair = pair.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                let (xs, xt) = (&pair.source.features, &pair.target.features);
                let mut model = LaotModel::new(xs.cols(), xt.cols(), config.clone())?;
                train(&mut model, xs, xt)?;
                let zs = encode(&model, xs, Domain::Source)?;
                let zt = encode(&model, xt, Domain::Target)?;
                let (la, _) = la_loss(&zs, &zt, config.cov_reg)?;
                let rec = reconstruction_loss(&model, xs, xt)?;
                let w2 = post_map_w2(&model, xs, xt)?;
                Ok((la, rec, w2))
            };
            let mut row = SweepRow {
                lambda,
                seed,
                final_la_loss: None,
                final_rec_loss: None,
                w2_after_map: None,
                status: "ok".into(),
                config_hash: hash,
            };
            match cell() {
                Ok((la, rec, w2)) => {
                    row.final_la_loss = Some(la);
                    row.final_rec_loss = Some(rec);
                    row.w2_after_map = Some(w2);
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            rows.push(row);
        }
    }
    rows
}

// timing

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    LaotMap,
    ExactEmd,
    Entropic,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 3] = [BenchMethod::LaotMap, BenchMethod::ExactEmd, BenchMethod::Entropic];
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMethod::LaotMap => "laot_map",
            BenchMethod::ExactEmd => "exact_emd",
            BenchMethod::Entropic => "entropic",
        })
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laot_map" => Ok(BenchMethod::LaotMap),
            "exact_emd" => Ok(BenchMethod::ExactEmd),
            "entropic" => Ok(BenchMethod::Entropic),
            _ => Err(Error::invalid(format!("unknown bench method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub n_list: Vec<usize>,
    pub dim: usize,
    pub methods: Vec<BenchMethod>,
    pub reps: usize,
    /// Per-repetition wall-clock budget for the exact and entropic solvers.
    pub budget: Duration,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            n_list: vec![100, 1000, 10_000],
            dim: 128,
            methods: BenchMethod::ALL.to_vec(),
            reps: 3,
            budget: Duration::from_secs(600),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub n: usize,
    pub d: usize,
    /// Median over repetitions; empty unless `status` is `ok`.
    pub seconds: Option<f64>,
    pub reps: usize,
    pub status: String,
    pub config_hash: String,
}

fn time_once(method: BenchMethod, xs: &Matrix, xt: &Matrix, budget: Duration) -> Result<Duration> {
    let start = Instant::now();
    let deadline = start + budget;
    let mut expired = || Instant::now() >= deadline;
    match method {
        BenchMethod::LaotMap => {
            let s = estimate_stats(xs)?;
            let t = estimate_stats(xt)?;
            let map = fit_linear_monge(&s, &t, laot_core::gaussian_ot::DEFAULT_COV_REG)?;
            std::hint::black_box(apply_map(&map, xs)?);
        }
        BenchMethod::ExactEmd => {
            let cost = cost_matrix(xs, xt)?;
            let a = vec![1.0 / xs.rows() as f64; xs.rows()];
            let b = vec![1.0 / xt.rows() as f64; xt.rows()];
            let options = EmdOptions {
                interrupt: Some(&mut expired),
                ..EmdOptions::default()
            };
            std::hint::black_box(emd_weights(&a, &b, &cost, options)?);
        }
        BenchMethod::Entropic => {
            let cost = cost_matrix(xs, xt)?;
            let params = SinkhornParams::default_for(&cost);
            let s = PointCloud::uniform(xs.clone())?;
            let t = PointCloud::uniform(xt.clone())?;
            std::hint::black_box(sinkhorn_interruptible(&s, &t, &cost, params, &mut expired)?);
        }
    }
    Ok(start.elapsed())
}

/// Times each method on seeded Gaussian clouds of every size in `n_list`.
/// A method that exceeds the budget is marked `infeasible` at that size and
/// at all larger sizes.
pub fn run_timing_bench(options: &BenchOptions) -> Result<Vec<BenchRow>> {
    if options.n_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("bench sizes must be sorted ascending"));
    }
    if options.reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    let params = serde_json::json!({
        "dim": options.dim,
        "reps": options.reps,
        "budget_seconds": options.budget.as_secs_f64(),
    });
    let mut rows = Vec::new();
    let mut infeasible = vec![false; options.methods.len()];
    for &n in &options.n_list {
        let task = Task::LargeN { n, d: options.dim };
        let data = generate(task, options.seed, None)?;
        let (xs, xt) = (&data.source.features, &data.target.features);
        for (mi, &method) in options.methods.iter().enumerate() {
            let mut cell_params = params.clone();
            cell_params["method"] = serde_json::json!(method);
            cell_params["n"] = serde_json::json!(n);
            let config = ExperimentConfig {
                seed: options.seed,
                ..ExperimentConfig::default()
            };
            let hash = config_hash("bench", &config, &[options.seed], "", &cell_params);
            let mut row = BenchRow {
                method,
                n,
                d: options.dim,
                seconds: None,
                reps: options.reps,
                status: "infeasible".into(),
                config_hash: hash,
            };
            if !infeasible[mi] {
                let mut times = Vec::with_capacity(options.reps);
                for _ in 0..options.reps {
                    match time_once(method, xs, xt, options.budget) {
                        Ok(t) => times.push(t.as_secs_f64()),
                        Err(Error::Core(laot_core::Error::Interrupted)) => {
                            infeasible[mi] = true;
                            break;
                        }
                        Err(e) => {
                            row.status = format!("error: {e}");
                            break;
                        }
                    }
                }
                if times.len() == options.reps {
                    row.seconds = Some(median(&mut times));
                    row.status = "ok".into();
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

// DA runs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DaMethod {
    Laot,
    OtGauss,
    EmdBarycentric,
    Invariant,
    SourceOnly,
}

impl DaMethod {
    pub const DEFAULT: [DaMethod; 4] = [DaMethod::Laot, DaMethod::OtGauss, DaMethod::EmdBarycentric, DaMethod::Invariant];

    fn trains(self) -> bool {
        matches!(self, DaMethod::Laot | DaMethod::Invariant)
    }

    fn needs_equal_width(self) -> bool {
        !self.trains()
    }
}

impl fmt::Display for DaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DaMethod::Laot => "laot",
            DaMethod::OtGauss => "ot_gauss",
            DaMethod::EmdBarycentric => "emd_barycentric",
            DaMethod::Invariant => "invariant",
            DaMethod::SourceOnly => "source_only",
        })
    }
}

impl FromStr for DaMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laot" => Ok(DaMethod::Laot),
            "ot_gauss" => Ok(DaMethod::OtGauss),
            "emd_barycentric" => Ok(DaMethod::EmdBarycentric),
            "invariant" => Ok(DaMethod::Invariant),
            "source_only" => Ok(DaMethod::SourceOnly),
            _ => Err(Error::invalid(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DaOptions {
    pub methods: Vec<DaMethod>,
    pub seeds: Vec<u64>,
    pub k: usize,
    /// Also evaluate the worst-case bound for trained runs.
    pub bound: bool,
    /// Trained initialisations per seed. Above 1 the target must reveal some
    /// labels; the restart whose transfer classifier scores best on them is kept.
    pub restarts: usize,
    /// Root of the `<config-hash>/` run directories; nothing is written when
    /// `None`.
    pub runs_root: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub method: DaMethod,
    pub seed: u64,
    pub config_hash: String,
    pub report: Option<EvalReport>,
    pub bound: Option<BoundDiagnostic>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DaSummary {
    pub task: String,
    pub config_hash: String,
    pub runs: Vec<RunOutcome>,
    /// Median accuracy per method over successful seeds.
    pub median_accuracy: Vec<(DaMethod, f64)>,
}

impl DaSummary {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn median(&self, method: DaMethod) -> Option<f64> {
        self.median_accuracy.iter().find(|(m, _)| *m == method).map(|(_, a)| *a)
    }

    pub fn rows(&self) -> Vec<AggregateRow> {
        self.runs
            .iter()
            .filter_map(|r| r.report.as_ref().map(|rep| AggregateRow::new(&self.task, r.seed, rep, &r.config_hash)))
            .collect()
    }
}

struct Trained {
    model: LaotModel,
    log: TrainLog,
    report: EvalReport,
    bound: Option<BoundDiagnostic>,
}

/// Seed of restart `r`; restart 0 keeps the run seed.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Accuracy of the transfer classifier on the revealed target points.
fn revealed_accuracy(model: &LaotModel, source: &LabeledDataset, target: &LabeledDataset, k: usize) -> Result<f64> {
    let mask = target.labeled_mask().unwrap_or_default();
    let idx: Vec<usize> = (0..target.len()).filter(|&i| mask[i]).collect();
    let train_set = source.with_features(transfer(model, source.features())?)?;
    let revealed = target.subset(&idx);
    let query = encode(model, revealed.features(), Domain::Target)?;
    let predicted = knn_predict(&train_set, &query, k)?;
    let hits = predicted.iter().zip(revealed.labels()).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / idx.len() as f64)
}

fn train_with_restarts(
    method: DaMethod,
    source: &LabeledDataset,
    target: &LabeledDataset,
    config: &ExperimentConfig,
    k: usize,
    restarts: usize,
) -> Result<(LaotModel, TrainLog)> {
    let revealed = target.labeled_mask().map_or(0, |m| m.iter().filter(|&&b| b).count());
    if restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    if restarts > 1 && revealed == 0 {
        return Err(Error::invalid("restarts above 1 need revealed target labels"));
    }
    let mut best: Option<(f64, LaotModel, TrainLog)> = None;
    for r in 0..restarts {
        let cfg = ExperimentConfig {
            seed: restart_seed(config.seed, r),
            ..config.clone()
        };
        let mut model = LaotModel::new(source.dim(), target.dim(), cfg)?;
        let log = match method {
            DaMethod::Invariant => invariant_baseline_train(&mut model, source.features(), target.features())?,
            _ => train(&mut model, source.features(), target.features())?,
        };
        if restarts == 1 {
            return Ok((model, log));
        }
        let score = revealed_accuracy(&model, source, target, k)?;
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, model, log));
        }
    }
    let (_, model, log) = best.expect("at least one restart");
    Ok((model, log))
}

fn run_trained(
    method: DaMethod,
    source: &LabeledDataset,
    target: &LabeledDataset,
    config: &ExperimentConfig,
    k: usize,
    bound: bool,
    restarts: usize,
) -> Result<Trained> {
    let start = Instant::now();
    let (model, log) = train_with_restarts(method, source, target, config, k, restarts)?;
    let mut report = evaluate_transfer(&model, source, target, k)?;
    report.method_tag = method.to_string();
    report.runtime_seconds = start.elapsed().as_secs_f64();
    let bound = if bound {
        let classifier = KnnClassifier {
            train: source.with_features(transfer(&model, source.features())?)?,
            k,
        };
        Some(worst_case_bound_diag(&model, source, target, &classifier)?)
    } else {
        None
    };
    Ok(Trained {
        model,
        log,
        report,
        bound,
    })
}

fn run_baseline(method: DaMethod, source: &LabeledDataset, target: &LabeledDataset, k: usize) -> Result<EvalReport> {
    let start = Instant::now();
    let mut report = match method {
        DaMethod::OtGauss => ot_gauss_baseline(source, target, k)?,
        DaMethod::EmdBarycentric => emd_barycentric_baseline(source, target, k)?,
        DaMethod::SourceOnly => source_only_baseline(source, target, k)?,
        DaMethod::Laot | DaMethod::Invariant => unreachable!("trained methods are handled separately"),
    };
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn write_run(dir: &Path, manifest: &RunManifest, trained: Option<&Trained>, report: &EvalReport) -> Result<()> {
    manifest.save()?;
    if let Some(t) = trained {
        save_model(&dir.join("model.bin"), &t.model)?;
        write_train_log(&dir.join("log.csv"), &t.log)?;
        if let Some(b) = &t.bound {
            write_json(&dir.join("bound.json"), b)?;
        }
    }
    write_json(&dir.join("report.json"), report)
}

/// Runs every method for every seed. Target labels are used only for scoring
/// (and the bound diagnostic); raw-feature baselines fail per run when the
/// widths differ.
pub fn run_da_experiment(config: &ExperimentConfig, data: &DataSource, options: &DaOptions) -> Result<DaSummary> {
    config.validate()?;
    let task = data.name();
    let runs_root = options.runs_root.as_deref().unwrap_or(Path::new("runs"));
    let mut runs = Vec::new();
    let mut input_hashes = Vec::new();
    for &seed in &options.seeds {
        let cfg = ExperimentConfig {
            seed,
            ..config.clone()
        };
        let loaded = data.load(seed).and_then(|p| Ok((p.labeled_source()?, p.labeled_target()?, p.input)));
        let input = loaded.as_ref().map(|l| l.2.clone()).unwrap_or_default();
        input_hashes.push(input.input_hash.clone());
        for &method in &options.methods {
            let mut params = if input.parameters.is_object() {
                input.parameters.clone()
            } else {
                serde_json::json!({})
            };
            params["task"] = serde_json::json!(task);
            params["k"] = serde_json::json!(options.k);
            params["method"] = serde_json::json!(method);
            if options.restarts > 1 {
                params["restarts"] = serde_json::json!(options.restarts);
            }
            let manifest = RunManifest::new(
                &format!("da:{method}"),
                cfg.clone(),
                vec![seed],
                input.inputs.clone(),
                input.input_hash.clone(),
                params,
                runs_root,
            );
            let mut outcome = RunOutcome {
                method,
                seed,
                config_hash: manifest.config_hash.clone(),
                report: None,
                bound: None,
                error: None,
            };
            let result: Result<(Option<Trained>, EvalReport)> = match &loaded {
                Err(e) => Err(Error::invalid(format!("loading data: {e}"))),
                Ok((source, target, _)) if method.needs_equal_width() && source.dim() != target.dim() => {
                    Err(Error::invalid(format!(
                        "{method} needs equal feature widths, got {} and {}",
                        source.dim(),
                        target.dim()
                    )))
                }
                Ok((source, target, _)) if method.trains() => {
                    run_trained(method, source, target, &cfg, options.k, options.bound, options.restarts).map(|t| {
                        let r = t.report.clone();
                        (Some(t), r)
                    })
                }
                Ok((source, target, _)) => run_baseline(method, source, target, options.k).map(|r| (None, r)),
            };
            match result {
                Ok((trained, report)) => {
                    if options.runs_root.is_some() {
                        if let Err(e) = write_run(&manifest.output_dir, &manifest, trained.as_ref(), &report) {
                            outcome.error = Some(e.to_string());
                        }
                    }
                    outcome.bound = trained.and_then(|t| t.bound);
                    outcome.report = Some(report);
                }
                Err(e) => outcome.error = Some(e.to_string()),
            }
            runs.push(outcome);
        }
    }
    let median_accuracy = options
        .methods
        .iter()
        .filter_map(|&m| {
            let acc: Vec<f64> = runs
                .iter()
                .filter(|r| r.method == m)
                .filter_map(|r| r.report.as_ref().map(|x| x.accuracy))
                .collect();
            (!acc.is_empty()).then(|| (m, median_of(acc)))
        })
        .collect();
    let key = serde_json::json!({"task": task, "methods": options.methods, "k": options.k});
    Ok(DaSummary {
        config_hash: config_hash("da", config, &options.seeds, &input_hashes.concat(), &key),
        task,
        runs,
        median_accuracy,
    })
}

// RV selection

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RvRow {
    pub candidate: usize,
    pub lambda: f64,
    pub latent_dim: usize,
    pub seed: u64,
    pub rv_score: Option<f64>,
    pub collapsed: Option<bool>,
    /// Filled only when target labels were supplied for reporting.
    pub target_accuracy: Option<f64>,
    pub status: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RvSelection {
    pub rows: Vec<RvRow>,
    pub median_rv: Vec<f64>,
    pub median_accuracy: Option<Vec<f64>>,
    /// Candidate with the highest median reverse-validation score.
    pub selected: Option<usize>,
}

fn default_factory(ds: usize, dt: usize, c: &ExperimentConfig) -> laot_core::Result<LaotModel> {
    LaotModel::new(ds, dt, c.clone())
}

/// Scores each candidate configuration with reverse validation on every
/// seed and selects the highest median score. With `report_accuracy` the true
/// target accuracy is computed as well, for reporting only; the selection
/// never sees target labels.
pub fn run_rv_select(
    candidates: &[ExperimentConfig],
    seeds: &[u64],
    data: &DataSource,
    report_accuracy: bool,
    options: RvOptions,
) -> Result<RvSelection> {
    if candidates.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("rv selection needs at least one candidate and one seed"));
    }
    let mut pairs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let p = data.load(seed)?;
        let source = p.labeled_source()?;
        let target_eval = if report_accuracy { Some(p.labeled_target()?) } else { None };
        pairs.push((source, p.target.features, target_eval, p.input));
    }
    let mut rows = Vec::new();
    for (ci, cand) in candidates.iter().enumerate() {
        for (&seed, (source, target_features, target_eval, input)) in seeds.iter().zip(&pairs) {
            let config = ExperimentConfig {
                seed,
                ..cand.clone()
            };
            let hash = config_hash("rv", &config, &[seed], &input.input_hash, &input.parameters);
            let mut row = RvRow {
                candidate: ci,
                lambda: config.lambda,
                latent_dim: config.latent_dim,
                seed,
                rv_score: None,
                collapsed: None,
                target_accuracy: None,
                status: "ok".into(),
                config_hash: hash,
            };
            match reverse_validation_score(default_factory, source, target_features, &config, options) {
                Ok(s) => {
                    row.rv_score = Some(s.score);
                    row.collapsed = Some(s.collapsed);
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            if let Some(t) = target_eval {
                let acc = LaotModel::new(source.dim(), t.dim(), config.clone())
                    .map_err(Error::from)
                    .and_then(|mut m| {
                        train(&mut m, source.features(), t.features())?;
                        Ok(evaluate_transfer(&m, source, t, options.k)?.accuracy)
                    });
                match acc {
                    Ok(a) => row.target_accuracy = Some(a),
                    Err(e) if row.status == "ok" => row.status = format!("error: {e}"),
                    Err(_) => {}
                }
            }
            rows.push(row);
        }
    }
    let per_candidate = |f: &dyn Fn(&RvRow) -> Option<f64>| -> Vec<f64> {
        (0..candidates.len())
            .map(|ci| median_of(rows.iter().filter(|r| r.candidate == ci).filter_map(f)))
            .collect()
    };
    let median_rv = per_candidate(&|r| r.rv_score);
    let median_accuracy = report_accuracy.then(|| per_candidate(&|r| r.target_accuracy));
    let selected = median_rv
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold(None::<(usize, f64)>, |best, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i);
    Ok(RvSelection {
        rows,
        median_rv,
        median_accuracy,
        selected,
    })
}
