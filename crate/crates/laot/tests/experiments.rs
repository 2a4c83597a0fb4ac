use std::time::Duration;

use laot::core::evaluation::RvOptions;
use laot::core::laot::ExperimentConfig;
use laot::experiments::{
    first_per_class, median_of, run_da_experiment, run_lambda_sweep, run_rv_select, run_timing_bench, BenchMethod,
    BenchOptions, DaMethod, DaOptions, DataSource,
};
use laot::synthetic::{Task, HETERO_LABELED_PER_CLASS};

/// Training schedule shared by the DA checks: full-batch-ish Adam for 200 epochs.
fn da_config() -> ExperimentConfig {
    ExperimentConfig {
        latent_dim: 8,
        lambda: 1.0,
        batch_size: 500,
        learning_rate: 0.01,
        epochs: 200,
        ..ExperimentConfig::default()
    }
}

fn synthetic(task: Task) -> DataSource {
    DataSource::Synthetic { task, n: None }
}

#[test]
fn median_helper() {
    assert_eq!(median_of([3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median_of([4.0, 1.0, 2.0, 3.0]), 2.5);
    assert!(median_of([]).is_nan());
}

#[test]
fn labeled_subset_takes_first_points_of_each_class() {
    let mask = first_per_class(&[2, 0, 2, 2, 1, 0, 2], 2);
    assert_eq!(mask, vec![true, true, true, false, true, true, false]);
    assert!(first_per_class(&[0, 1], 0).iter().all(|m| !m));
}

#[test]
fn hetero_pairs_reveal_three_labels_per_class() {
    let pair = synthetic(Task::HeteroDa).load(0).unwrap();
    let t = pair.labeled_target().unwrap();
    let mask = t.labeled_mask().unwrap();
    // Rare classes may have fewer points than the quota.
    let expected: usize = (0..10)
        .map(|c| t.labels().iter().filter(|&&y| y == c).count().min(HETERO_LABELED_PER_CLASS))
        .sum();
    assert_eq!(mask.iter().filter(|m| **m).count(), expected);
    assert!(expected >= 25);
    assert!(synthetic(Task::NonlinearDa).load(0).unwrap().labeled_target().unwrap().labeled_mask().is_none());
}

#[test]
fn gauss_affine_adaptation() {
    let options = DaOptions {
        methods: vec![DaMethod::Laot, DaMethod::OtGauss],
        seeds: (0..5).collect(),
        k: 3,
        bound: true,
        restarts: 1,
        runs_root: None,
    };
    let config = ExperimentConfig {
        latent_dim: 5,
        ..da_config()
    };
    let summary = run_da_experiment(&config, &synthetic(Task::GaussAffine), &options).unwrap();
    assert_eq!(summary.failures(), 0);
    for run in &summary.runs {
        let acc = run.report.as_ref().unwrap().accuracy;
        match run.method {
            DaMethod::OtGauss => assert!(acc >= 0.9, "ot_gauss seed {}: {acc}", run.seed),
            _ => assert!(run.bound.as_ref().unwrap().holds),
        }
    }
    // Single trained runs occasionally settle on a permuted cluster alignment.
    let laot = summary.median(DaMethod::Laot).unwrap();
    assert!(laot >= 0.9, "{laot}");
    assert_eq!(summary.rows().len(), 10);
}

#[test]
fn heterogeneous_adaptation_beats_chance() {
    let options = DaOptions {
        methods: vec![DaMethod::Laot],
        seeds: (0..5).collect(),
        k: 3,
        bound: false,
        restarts: 3,
        runs_root: None,
    };
    let summary = run_da_experiment(&da_config(), &synthetic(Task::HeteroDa), &options).unwrap();
    assert_eq!(summary.failures(), 0);
    let acc = summary.median(DaMethod::Laot).unwrap();
    // Ten classes: chance is 0.1.
    assert!(acc >= 0.4, "{acc}");
}

#[test]
fn raw_baselines_fail_per_run_on_mismatched_widths() {
    let options = DaOptions {
        methods: vec![DaMethod::OtGauss, DaMethod::SourceOnly],
        seeds: vec![0],
        k: 3,
        bound: false,
        restarts: 1,
        runs_root: None,
    };
    let summary = run_da_experiment(&da_config(), &synthetic(Task::HeteroDa), &options).unwrap();
    assert_eq!(summary.failures(), 2);
    assert!(summary.rows().is_empty());
}

#[test]
fn sweep_trades_fidelity_for_alignment() {
    let base = ExperimentConfig {
        epochs: 100,
        ..da_config()
    };
    let seeds: Vec<u64> = (0..3).collect();
    let rows = run_lambda_sweep(&base, &[0.0, 1.0], &seeds, &synthetic(Task::NonlinearDa));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.status == "ok"));
    let med = |lambda: f64, f: fn(&laot::experiments::SweepRow) -> f64| {
        median_of(rows.iter().filter(|r| r.lambda == lambda).map(f))
    };
    let w2 = |r: &laot::experiments::SweepRow| r.w2_after_map.unwrap();
    let rec = |r: &laot::experiments::SweepRow| r.final_rec_loss.unwrap();
    assert!(med(1.0, w2) < med(0.0, w2), "{} vs {}", med(1.0, w2), med(0.0, w2));
    assert!(med(0.0, rec) <= 1.1 * med(1.0, rec));
}

#[test]
fn sweep_records_failures_and_continues() {
    let base = ExperimentConfig {
        epochs: 1,
        batch_size: 16,
        latent_dim: 2,
        ..ExperimentConfig::default()
    };
    let rows = run_lambda_sweep(&base, &[-1.0, 0.5], &[0], &DataSource::Synthetic { task: Task::Toy3d, n: Some(40) });
    assert_eq!(rows.len(), 2);
    assert_ne!(rows[0].status, "ok");
    assert_eq!(rows[1].status, "ok");
    assert!(rows[1].w2_after_map.is_some());
}

#[test]
fn bench_small_sizes_complete() {
    let options = BenchOptions {
        n_list: vec![100],
        dim: 16,
        reps: 3,
        ..BenchOptions::default()
    };
    let rows = run_timing_bench(&options).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.status, "ok", "{}", r.method);
        assert!(r.seconds.unwrap() >= 0.0);
        assert_eq!(r.reps, 3);
    }
    let bad = BenchOptions {
        n_list: vec![100, 50],
        ..options.clone()
    };
    assert!(run_timing_bench(&bad).is_err());
}

#[test]
fn bench_budget_marks_larger_sizes_infeasible() {
    let options = BenchOptions {
        n_list: vec![400, 800],
        dim: 8,
        methods: vec![BenchMethod::ExactEmd],
        reps: 1,
        budget: Duration::from_nanos(1),
        seed: 0,
    };
    let rows = run_timing_bench(&options).unwrap();
    assert!(rows.iter().all(|r| r.status == "infeasible" && r.seconds.is_none()));
}

#[test]
fn rv_selection_picks_highest_median() {
    let base = ExperimentConfig {
        latent_dim: 2,
        epochs: 5,
        batch_size: 32,
        learning_rate: 0.01,
        ..ExperimentConfig::default()
    };
    let candidates: Vec<ExperimentConfig> = [0.0, 1.0]
        .iter()
        .map(|&lambda| ExperimentConfig { lambda, ..base.clone() })
        .collect();
    let data = DataSource::Synthetic { task: Task::Toy3d, n: Some(120) };
    let sel = run_rv_select(&candidates, &[0, 1, 2], &data, true, RvOptions::default()).unwrap();
    assert_eq!(sel.rows.len(), 6);
    let i = sel.selected.unwrap();
    assert!(sel.median_rv.iter().all(|&v| v <= sel.median_rv[i]));
    assert!(sel.median_accuracy.unwrap().iter().all(|a| (0.0..=1.0).contains(a)));
    assert!(run_rv_select(&[], &[0], &data, false, RvOptions::default()).is_err());
}

#[test]
fn restarts_need_revealed_target_labels() {
    let options = DaOptions {
        methods: vec![DaMethod::Laot],
        seeds: vec![0],
        k: 3,
        bound: false,
        restarts: 2,
        runs_root: None,
    };
    let summary = run_da_experiment(
        &ExperimentConfig { epochs: 1, batch_size: 16, ..ExperimentConfig::default() },
        &DataSource::Synthetic { task: Task::Toy3d, n: Some(40) },
        &options,
    ).unwrap();
    assert_eq!(summary.failures(), 1);
    assert!(summary.runs[0].error.as_deref().unwrap().contains("revealed"));
}
