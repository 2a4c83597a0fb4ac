use std::fs;

use laot::checkpoint::{decode_model, decode_params, encode_model, encode_params, load_model, save_model};
use laot::core::gaussian_ot::AffineMap;
use laot::core::laot::{train, ExperimentConfig, LaotModel};
use laot::core::Matrix;
use laot::io::{load_dataset, parse_csv, save_dataset, sidecar_path, Dataset, Format};
use laot::manifest::{config_hash, content_hash, hash_files, RunManifest};
use laot::output::{write_csv, write_train_log, AggregateRow};
use laot::core::evaluation::EvalReport;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn awkward_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let specials = [0.0, -0.0, 1e-308, f64::MIN_POSITIVE, f64::MAX, -1.0 / 3.0, 5e-324];
    (0..n)
        .map(|i| {
            if i % 5 == 0 {
                specials[i / 5 % specials.len()]
            } else {
                rng.random::<f64>() * 10f64.powi(rng.random_range(-20..20))
            }
        })
        .collect()
}

fn dataset(seed: u64, rows: usize, cols: usize, labels: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset {
        features: Matrix::from_vec(rows, cols, awkward_values(&mut rng, rows * cols)).unwrap(),
        labels: labels.then(|| (0..rows).map(|_| rng.random_range(0..7)).collect()),
    }
}

fn bits(m: &Matrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for (format, name) in [(Format::Csv, "d.csv"), (Format::Binary, "d.bin")] {
        for labels in [false, true] {
            let d = dataset(1, 13, 4, labels);
            let path = dir.path().join(name);
            save_dataset(&path, format, &d).unwrap();
            let back = load_dataset(&path, format, labels).unwrap();
            assert_eq!(bits(&back.features), bits(&d.features));
            assert_eq!(back.labels, d.labels);
        }
    }
    assert!(sidecar_path(&dir.path().join("d.bin")).exists());
}

#[test]
fn format_names() {
    assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
    assert_eq!("bin".parse::<Format>().unwrap(), Format::Binary);
    assert!("parquet".parse::<Format>().is_err());
    assert_eq!(Format::from_path("x/y.bin".as_ref()), Format::Binary);
    assert_eq!(Format::from_path("x/y.csv".as_ref()), Format::Csv);
}

#[test]
fn csv_header_and_blank_lines() {
    let d = parse_csv("a,b,label\n1,2,0\n\n3.5,-4,2\n", true).unwrap();
    assert_eq!(d.features.as_slice(), &[1.0, 2.0, 3.5, -4.0]);
    assert_eq!(d.labels, Some(vec![0, 2]));
}

#[test]
fn csv_errors_name_the_line() {
    let err = parse_csv("1,2\n3,x\n", false).unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains("column 2"), "{err}");
    let err = parse_csv("1,2\n3,4\n5\n", false).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
    let err = parse_csv("1,2,0\n3,4,1.5\n", true).unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains("label"), "{err}");
    let err = parse_csv("1,2\n3,inf\n", false).unwrap_err().to_string();
    assert!(err.contains("row 2"), "{err}");
}

#[test]
fn file_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "1,2\nz,4\n").unwrap();
    let err = load_dataset(&path, Format::Csv, false).unwrap_err().to_string();
    assert!(err.contains("bad.csv") && err.contains("line 2"), "{err}");
    assert!(load_dataset(&dir.path().join("missing.csv"), Format::Csv, false).is_err());
}

#[test]
fn binary_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    save_dataset(&path, Format::Binary, &dataset(2, 5, 3, false)).unwrap();
    let err = load_dataset(&path, Format::Binary, true).unwrap_err().to_string();
    assert!(err.contains("labels"), "{err}");

    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 8);
    fs::write(&path, &bytes).unwrap();
    let err = load_dataset(&path, Format::Binary, false).unwrap_err().to_string();
    assert!(err.contains("bytes"), "{err}");

    let d = Dataset {
        features: Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
        labels: None,
    };
    save_dataset(&path, Format::Binary, &d).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    bytes[3 * 8..4 * 8].copy_from_slice(&f64::NAN.to_le_bytes());
    fs::write(&path, &bytes).unwrap();
    let err = load_dataset(&path, Format::Binary, false).unwrap_err().to_string();
    assert!(err.contains("row 2") && err.contains("column 2"), "{err}");

    fs::remove_file(sidecar_path(&path)).unwrap();
    assert!(load_dataset(&path, Format::Binary, false).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_text_round_trip(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40), cols in 1usize..5) {
        let rows = values.len() / cols;
        prop_assume!(rows > 0);
        let d = Dataset {
            features: Matrix::from_vec(rows, cols, values[..rows * cols].to_vec()).unwrap(),
            labels: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_dataset(&path, Format::Csv, &d).unwrap();
        let back = load_dataset(&path, Format::Csv, false).unwrap();
        prop_assert_eq!(bits(&back.features), bits(&d.features));
    }
}

fn trained_model(ds: usize, dt: usize) -> LaotModel {
    let cfg = ExperimentConfig {
        latent_dim: 2,
        batch_size: 8,
        epochs: 2,
        seed: 5,
        ..ExperimentConfig::default()
    };
    let d = dataset(3, 24, ds.max(dt), false);
    let xs = Matrix::from_rows(&d.features.row_iter().map(|r| r[..ds].iter().map(|v| v.tanh()).collect::<Vec<_>>()).collect::<Vec<_>>()).unwrap();
    let xt = Matrix::from_rows(&d.features.row_iter().map(|r| r[..dt].iter().map(|v| v.sin()).collect::<Vec<_>>()).collect::<Vec<_>>()).unwrap();
    let mut m = LaotModel::new(ds, dt, cfg).unwrap();
    train(&mut m, &xs, &xt).unwrap();
    m
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let m = trained_model(4, 3);
    save_model(&path, &m).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, m);
    assert_eq!(encode_model(&back), fs::read(&path).unwrap());

    let mut unfitted = m.clone();
    unfitted.fitted_map = None;
    assert_eq!(decode_model(&encode_model(&unfitted)).unwrap(), unfitted);
}

#[test]
fn network_layout() {
    let m = trained_model(3, 3);
    let mut bytes = Vec::new();
    encode_params(&m.enc_s, &mut bytes);
    assert_eq!(&bytes[..8], b"LAOTNET1");
    let h = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + h]).unwrap();
    assert_eq!(header["layers"].as_array().unwrap().len(), 2);
    let payload = m.enc_s.layers().iter().map(|l| l.weight.as_slice().len() + l.bias.len()).sum::<usize>();
    assert_eq!(bytes.len(), 16 + h + 8 * payload);
    // First weight follows the header directly.
    let w0 = f64::from_le_bytes(bytes[16 + h..24 + h].try_into().unwrap());
    assert_eq!(w0.to_bits(), m.enc_s.layers()[0].weight[(0, 0)].to_bits());
    assert_eq!(decode_params(&bytes).unwrap(), m.enc_s);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let bytes = encode_model(&trained_model(3, 2));
    assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_model(&bad).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(decode_model(&long).is_err());
    assert!(decode_model(&[]).is_err());
}

#[test]
fn checkpoint_keeps_identity_map() {
    let mut m = trained_model(3, 3);
    m.fitted_map = Some(AffineMap::identity(2));
    assert_eq!(decode_model(&encode_model(&m)).unwrap().fitted_map, m.fitted_map);
}

#[test]
fn content_hash_uses_blob_framing() {
    // Matches `git hash-object` framing, but with SHA-256.
    use sha2::{Digest, Sha256};
    let expected = hex::encode(Sha256::digest(b"blob 5\0hello"));
    assert_eq!(content_hash(&[b"hello".to_vec()]), expected);
    assert_ne!(content_hash(&[b"ab".to_vec(), b"c".to_vec()]), content_hash(&[b"a".to_vec(), b"bc".to_vec()]));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x");
    fs::write(&p, "hello").unwrap();
    assert_eq!(hash_files(&[p]).unwrap(), expected);
}

#[test]
fn config_hash_is_stable_and_sensitive() {
    let cfg = ExperimentConfig::default();
    let params = serde_json::json!({"task": "toy3d", "n": 10});
    let h = config_hash("train", &cfg, &[1], "abc", &params);
    assert_eq!(h.len(), 16);
    assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(h, config_hash("train", &cfg, &[1], "abc", &params));
    let other = ExperimentConfig { lambda: 0.5, ..cfg.clone() };
    assert_ne!(h, config_hash("train", &other, &[1], "abc", &params));
    assert_ne!(h, config_hash("train", &cfg, &[2], "abc", &params));
    assert_ne!(h, config_hash("train", &cfg, &[1], "abd", &params));
    assert_ne!(h, config_hash("eval", &cfg, &[1], "abc", &params));
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = RunManifest::new(
        "train",
        ExperimentConfig::default(),
        vec![3],
        vec!["a.csv".into()],
        "00".into(),
        serde_json::json!({"k": 1}),
        dir.path(),
    );
    assert_eq!(m.output_dir, dir.path().join(&m.config_hash));
    let path = m.save().unwrap();
    assert_eq!(path, m.output_dir.join("manifest.json"));
    assert_eq!(RunManifest::load(&path).unwrap(), m);
}

#[test]
fn log_and_aggregate_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { latent_dim: 2, batch_size: 4, epochs: 1, seed: 1, ..ExperimentConfig::default() };
    let d = dataset(9, 8, 3, false);
    let mut m = LaotModel::new(3, 3, cfg).unwrap();
    let x = Matrix::from_vec(8, 3, d.features.as_slice().iter().map(|v| v.tanh()).collect()).unwrap();
    let log = train(&mut m, &x, &x).unwrap();
    let path = dir.path().join("log.csv");
    write_train_log(&path, &log).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch,step,l_rec,l_la,total,grad_norm"));
    assert_eq!(lines.count(), log.steps.len());

    let report = EvalReport::from_predictions(&[0, 1], &[0, 0], 2, "laot").unwrap();
    let path = dir.path().join("aggregate.csv");
    write_csv(&path, &[AggregateRow::new("toy3d", 4, &report, "0123456789abcdef")]).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text, "task,method,seed,accuracy,runtime_seconds,config_hash\ntoy3d,laot,4,0.5,0.0,0123456789abcdef\n");
}
