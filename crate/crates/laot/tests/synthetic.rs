use laot::core::evaluation::{knn_predict, ot_gauss_baseline, LabeledDataset};
use laot::core::gaussian_ot::{estimate_stats, fit_linear_monge, DEFAULT_COV_REG};
use laot::synthetic::{gauss_affine_map, generate, nonlinear_da_latents, Task, GAUSS_AFFINE_DIM, HETERO_DIM};

#[test]
fn task_names_round_trip() {
    for t in [
        Task::Toy3d,
        Task::GaussAffine,
        Task::NonlinearDa,
        Task::HeteroDa,
        Task::LargeN { n: 10, d: 3 },
    ] {
        assert_eq!(t.to_string().parse::<Task>().unwrap(), t);
    }
    for bad in ["mnist", "large_n:10", "large_n:0x3", "large_n:axb", ""] {
        assert!(bad.parse::<Task>().is_err(), "{bad}");
    }
}

#[test]
fn same_seed_same_data() {
    for t in [Task::Toy3d, Task::GaussAffine, Task::NonlinearDa, Task::HeteroDa, Task::LargeN { n: 50, d: 4 }] {
        let a = generate(t, 7, Some(60)).unwrap();
        let b = generate(t, 7, Some(60)).unwrap();
        let c = generate(t, 8, Some(60)).unwrap();
        assert_eq!(a.source, b.source);
        assert_eq!(a.target, b.target);
        assert_eq!(a.parameters, b.parameters);
        assert_ne!(a.source, c.source);
    }
}

#[test]
fn shapes_and_parameters() {
    let cases = [
        (Task::Toy3d, 3, 3, Some(4)),
        (Task::GaussAffine, GAUSS_AFFINE_DIM, GAUSS_AFFINE_DIM, Some(3)),
        (Task::NonlinearDa, 20, 20, Some(10)),
        (Task::HeteroDa, 20, HETERO_DIM, Some(10)),
        (Task::LargeN { n: 40, d: 6 }, 6, 6, None),
    ];
    for (t, ds, dt, classes) in cases {
        let g = generate(t, 1, Some(40)).unwrap();
        assert_eq!(g.source.features.shape(), (40, ds), "{t}");
        assert_eq!(g.target.features.shape(), (40, dt), "{t}");
        assert_eq!(g.num_classes, classes);
        assert_eq!(g.source.labels.is_some(), classes.is_some());
        assert_eq!(g.parameters["task"], t.to_string());
        assert_eq!(g.parameters["seed"], 1);
        assert_eq!(g.parameters["n"], 40);
        if let (Some(c), Some(ys)) = (classes, &g.target.labels) {
            assert!(ys.iter().all(|&y| y < c));
        }
    }
    assert_eq!(generate(Task::Toy3d, 1, None).unwrap().source.features.rows(), 500);
    assert!(generate(Task::Toy3d, 1, Some(0)).is_err());
}

#[test]
fn gauss_affine_map_is_recovered_from_raw_data() {
    let g = generate(Task::GaussAffine, 11, Some(5000)).unwrap();
    let s = estimate_stats(&g.source.features).unwrap();
    let t = estimate_stats(&g.target.features).unwrap();
    let fitted = fit_linear_monge(&s, &t, DEFAULT_COV_REG).unwrap();
    let truth = gauss_affine_map();
    let err = fitted.a.sub(&truth.a).frobenius_norm();
    assert!(err < 0.1, "{err}");
    assert!(truth.a.asymmetry() < 1e-12);
}

#[test]
fn nonlinear_da_defeats_raw_linear_map_but_latents_separate() {
    let g = generate(Task::NonlinearDa, 3, None).unwrap();
    let classes = g.num_classes;
    let s = g.source.into_labeled(classes).unwrap();
    let t = g.target.into_labeled(classes).unwrap();
    let raw = ot_gauss_baseline(&s, &t, 3).unwrap().accuracy;
    assert!(raw < 0.9, "{raw}");

    let (fit_x, fit_y) = nonlinear_da_latents(3, 1000);
    let (test_x, test_y) = nonlinear_da_latents(4, 1000);
    let train = LabeledDataset::new(fit_x, fit_y, Some(10)).unwrap();
    let pred = knn_predict(&train, &test_x, 3).unwrap();
    let acc = pred.iter().zip(&test_y).filter(|(p, y)| p == y).count() as f64 / test_y.len() as f64;
    assert!(acc > raw, "latent {acc} vs raw {raw}");
    assert!(acc >= 0.9, "{acc}");
}
