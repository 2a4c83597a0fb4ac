use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use laot::checkpoint::{load_model, save_model};
use laot::experiments::{
    run_da_experiment, run_lambda_sweep, run_rv_select, run_timing_bench, BenchMethod, BenchOptions,
    DaMethod, DaOptions, DataSource, InputSpec,
};
use laot::io::{save_dataset, Format};
use laot::manifest::RunManifest;
use laot::output::{write_csv, write_json, write_train_log};
use laot::synthetic::{generate, Task};
use laot_core::evaluation::{evaluate_transfer, RvOptions};
use laot_core::laot::{train, ExperimentConfig, LaSolver, LaotModel, MapGradientMode};

#[derive(Parser)]
#[command(name = "laot", version, about = "Domain adaptation through linearly aligned autoencoder embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic source/target pair to disk.
    Gen(GenArgs),
    /// Train one model and write its run directory.
    Train(TrainArgs),
    /// Run the adaptation methods over seeds, or score a saved model.
    Eval(EvalArgs),
    /// Train over a grid of lambda values and seeds.
    Sweep(SweepArgs),
    /// Time the transport solvers on Gaussian clouds.
    Bench(BenchArgs),
    /// Pick a configuration by reverse validation.
    #[command(name = "rv-select")]
    RvSelect(RvArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON file holding a full configuration; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "latent_dim", alias = "latent-dim")]
    latent_dim: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "batch_size", alias = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long = "learning_rate", alias = "learning-rate")]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "cov_reg", alias = "cov-reg")]
    cov_reg: Option<f64>,
    #[arg(long = "grad_clip", alias = "grad-clip")]
    grad_clip: Option<f64>,
    /// `exact`, `entropic` or `entropic:<eps>`.
    #[arg(long = "la_solver", alias = "la-solver")]
    la_solver: Option<LaSolver>,
    /// `stop_gradient` or `none`.
    #[arg(long = "map_gradient_mode", alias = "map-gradient-mode")]
    map_gradient_mode: Option<MapGradientMode>,
}

impl ConfigArgs {
    fn resolve(&self, seed: u64) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(latent_dim, lambda, batch_size, learning_rate, epochs, cov_reg, grad_clip, la_solver, map_gradient_mode);
        c.seed = seed;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct DataArgs {
    /// Synthetic task: toy3d, gauss_affine, nonlinear_da, hetero_da or large_n:<n>x<d>.
    #[arg(long, conflicts_with_all = ["source", "target"])]
    task: Option<Task>,
    /// Samples per domain for synthetic tasks.
    #[arg(long)]
    n: Option<usize>,
    /// Labeled source features (CSV with the label last, or binary).
    #[arg(long, requires = "target")]
    source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    /// `csv` or `binary`; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<Format>,
    /// The target file carries labels in its last column (used for scoring only).
    #[arg(long = "target_labels", alias = "target-labels")]
    target_labels: bool,
    /// Reveal the first N target labels of each class to the classifier
    /// (semi-supervised protocol); those points are not scored.
    #[arg(long = "target_labeled_per_class", alias = "target-labeled-per-class", default_value_t = 0, requires = "target_labels")]
    target_labeled_per_class: usize,
}

impl DataArgs {
    fn data(&self, default_task: Option<Task>) -> anyhow::Result<DataSource> {
        match (&self.task, &self.source, &self.target) {
            (Some(task), _, _) => Ok(DataSource::Synthetic { task: *task, n: self.n }),
            (None, Some(s), Some(t)) => Ok(DataSource::Files {
                source: s.clone(),
                target: t.clone(),
                format: self.format,
                target_labels: self.target_labels,
                labeled_per_class: self.target_labeled_per_class,
            }),
            _ => match default_task {
                Some(task) => Ok(DataSource::Synthetic { task, n: self.n }),
                None => bail!("give either --task or both --source and --target"),
            },
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    task: Task,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Directory receiving source/target files and parameters.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    seed: u64,
    /// Neighbours used by the transfer classifier.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// One or more seeds, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    seed: Vec<u64>,
    /// Score this checkpoint instead of training.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "laot,ot_gauss,emd_barycentric,invariant")]
    methods: Vec<DaMethod>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Evaluate the worst-case bound on every trained run.
    #[arg(long)]
    bound: bool,
    /// Trained initialisations per seed, kept by accuracy on revealed target labels.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    seed: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,1")]
    lambdas: Vec<f64>,
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    seed: u64,
    /// Sample sizes, ascending.
    #[arg(long = "n", value_delimiter = ',', default_value = "100,1000,10000")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "laot_map,exact_emd,entropic")]
    methods: Vec<BenchMethod>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Seconds allowed per repetition before a solver is marked infeasible.
    #[arg(long, default_value_t = 600.0)]
    budget: f64,
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
}

#[derive(Args)]
struct RvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    seed: Vec<u64>,
    /// Candidate lambda values.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,1")]
    lambdas: Vec<f64>,
    /// Candidate latent widths; the configured width when omitted.
    #[arg(long = "latent_dims", alias = "latent-dims", value_delimiter = ',')]
    latent_dims: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long = "train_fraction", alias = "train-fraction", default_value_t = 0.8)]
    train_fraction: f64,
    /// Also report true target accuracy per candidate (needs target labels).
    #[arg(long = "report_accuracy", alias = "report-accuracy")]
    report_accuracy: bool,
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
}

/// Outcome of a subcommand that ran to completion.
enum Status {
    Ok,
    Partial(usize),
}

fn main() -> ExitCode {
    // Argument errors are manifest errors (exit 1); 2 means partial failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Bench(a) => bench(a),
        Command::RvSelect(a) => rv_select(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial(n)) => {
            eprintln!("{n} run(s) failed; summary written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn experiment_manifest(
    name: &str,
    config: &ExperimentConfig,
    seeds: &[u64],
    input: InputSpec,
    mut params: serde_json::Value,
    runs: &Path,
) -> anyhow::Result<RunManifest> {
    params["input"] = input.parameters;
    let m = RunManifest::new(name, config.clone(), seeds.to_vec(), input.inputs, input.input_hash, params, runs);
    m.save()?;
    Ok(m)
}

fn gen(a: GenArgs) -> anyhow::Result<Status> {
    let g = generate(a.task, a.seed, a.n)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let ext = match a.format {
        Format::Csv => "csv",
        Format::Binary => "bin",
    };
    save_dataset(&a.out.join(format!("source.{ext}")), a.format, &g.source)?;
    save_dataset(&a.out.join(format!("target.{ext}")), a.format, &g.target)?;
    write_json(&a.out.join("parameters.json"), &g.parameters)?;
    println!("{}", a.out.display());
    Ok(Status::Ok)
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<Status> {
    let config = a.config.resolve(a.seed)?;
    let data = a.data.data(None)?;
    let pair = data.load(a.seed)?;
    let manifest = experiment_manifest(
        "train",
        &config,
        &[a.seed],
        pair.input.clone(),
        serde_json::json!({"task": data.name(), "k": a.k}),
        &a.runs,
    )?;
    let dir = &manifest.output_dir;
    let (xs, xt) = (&pair.source.features, &pair.target.features);
    let mut model = LaotModel::new(xs.cols(), xt.cols(), config)?;
    let log = train(&mut model, xs, xt)?;
    save_model(&dir.join("model.bin"), &model)?;
    write_train_log(&dir.join("log.csv"), &log)?;
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    if pair.target.labels.is_some() && pair.source.labels.is_some() {
        let report = evaluate_transfer(&model, &pair.labeled_source()?, &pair.labeled_target()?, a.k)?;
        write_json(&dir.join("report.json"), &report)?;
    }
    println!("{}", dir.display());
    Ok(Status::Ok)
}

fn eval(a: EvalArgs) -> anyhow::Result<Status> {
    let data = a.data.data(None)?;
    if let Some(path) = &a.model {
        let model = load_model(path)?;
        let mut failures = 0;
        for &seed in &a.seed {
            let pair = data.load(seed)?;
            match evaluate_transfer(&model, &pair.labeled_source()?, &pair.labeled_target()?, a.k) {
                Ok(r) => println!("{}", serde_json::to_string(&r)?),
                Err(e) => {
                    eprintln!("seed {seed}: {e}");
                    failures += 1;
                }
            }
        }
        return Ok(if failures == 0 { Status::Ok } else { Status::Partial(failures) });
    }
    let config = a.config.resolve(a.seed[0])?;
    let input = data.describe(&a.seed)?;
    let manifest = experiment_manifest(
        "eval",
        &config,
        &a.seed,
        input,
        serde_json::json!({"task": data.name(), "methods": a.methods, "k": a.k, "bound": a.bound, "restarts": a.restarts}),
        &a.runs,
    )?;
    let options = DaOptions {
        methods: a.methods,
        seeds: a.seed,
        k: a.k,
        bound: a.bound,
        restarts: a.restarts,
        runs_root: Some(a.runs),
    };
    let summary = run_da_experiment(&config, &data, &options)?;
    let dir = &manifest.output_dir;
    write_csv(&dir.join("aggregate.csv"), &summary.rows())?;
    write_json(&dir.join("summary.json"), &summary)?;
    for (m, acc) in &summary.median_accuracy {
        println!("{m}: median accuracy {acc:.4}");
    }
    for r in summary.runs.iter().filter(|r| r.error.is_some()) {
        eprintln!("{} seed {}: {}", r.method, r.seed, r.error.as_deref().unwrap_or_default());
    }
    println!("{}", dir.display());
    Ok(match summary.failures() {
        0 => Status::Ok,
        n => Status::Partial(n),
    })
}

fn sweep(a: SweepArgs) -> anyhow::Result<Status> {
    let config = a.config.resolve(a.seed[0])?;
    let data = a.data.data(Some(Task::NonlinearDa))?;
    let input = data.describe(&a.seed)?;
    let manifest = experiment_manifest(
        "sweep",
        &config,
        &a.seed,
        input,
        serde_json::json!({"task": data.name(), "lambdas": a.lambdas}),
        &a.runs,
    )?;
    let rows = run_lambda_sweep(&config, &a.lambdas, &a.seed, &data);
    let path = manifest.output_dir.join("sweep.csv");
    write_csv(&path, &rows)?;
    println!("{}", path.display());
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    Ok(if failed == 0 { Status::Ok } else { Status::Partial(failed) })
}

fn bench(a: BenchArgs) -> anyhow::Result<Status> {
    if !(a.budget > 0.0) {
        bail!("--budget must be positive");
    }
    let options = BenchOptions {
        n_list: a.n_list,
        dim: a.d,
        methods: a.methods,
        reps: a.reps,
        budget: Duration::from_secs_f64(a.budget),
        seed: a.seed,
    };
    let config = ExperimentConfig {
        seed: a.seed,
        ..ExperimentConfig::default()
    };
    let manifest = experiment_manifest(
        "bench",
        &config,
        &[a.seed],
        InputSpec::default(),
        serde_json::json!({
            "n": options.n_list,
            "d": options.dim,
            "methods": options.methods,
            "reps": options.reps,
            "budget_seconds": a.budget,
        }),
        &a.runs,
    )?;
    let rows = run_timing_bench(&options)?;
    let path = manifest.output_dir.join("bench.csv");
    write_csv(&path, &rows)?;
    println!("{}", path.display());
    let failed = rows.iter().filter(|r| r.status.starts_with("error")).count();
    Ok(if failed == 0 { Status::Ok } else { Status::Partial(failed) })
}

fn rv_select(a: RvArgs) -> anyhow::Result<Status> {
    let base = a.config.resolve(a.seed[0])?;
    let data = a.data.data(None)?;
    let dims = if a.latent_dims.is_empty() { vec![base.latent_dim] } else { a.latent_dims.clone() };
    let candidates: Vec<ExperimentConfig> = dims
        .iter()
        .flat_map(|&latent_dim| {
            let base = &base;
            a.lambdas.iter().map(move |&lambda| ExperimentConfig {
                latent_dim,
                lambda,
                ..base.clone()
            })
        })
        .collect();
    for c in &candidates {
        c.validate()?;
    }
    let input = data.describe(&a.seed)?;
    let manifest = experiment_manifest(
        "rv-select",
        &base,
        &a.seed,
        input,
        serde_json::json!({
            "task": data.name(),
            "lambdas": a.lambdas,
            "latent_dims": dims,
            "k": a.k,
            "train_fraction": a.train_fraction,
        }),
        &a.runs,
    )?;
    let options = RvOptions {
        k: a.k,
        train_fraction: a.train_fraction,
    };
    let sel = run_rv_select(&candidates, &a.seed, &data, a.report_accuracy, options)?;
    let dir = &manifest.output_dir;
    write_csv(&dir.join("rv.csv"), &sel.rows)?;
    let chosen = sel.selected.map(|i| &candidates[i]);
    write_json(
        &dir.join("selection.json"),
        &serde_json::json!({"selected": sel.selected, "config": chosen, "median_rv": sel.median_rv, "median_accuracy": sel.median_accuracy}),
    )?;
    match chosen {
        Some(c) => println!("{}", serde_json::to_string(c)?),
        None => eprintln!("no candidate produced a score"),
    }
    println!("{}", dir.display());
    let failed = sel.rows.iter().filter(|r| r.status != "ok").count();
    Ok(if failed == 0 { Status::Ok } else { Status::Partial(failed) })
}
