//! Command pipeline on a tiny configuration.

use std::fs;
use std::path::Path;
use std::process::Command;

use mbar_kernel::bench::TABLE_ROWS;
use mbar_kernel::cli::commands::{dataset_meta_path, dataset_path, gram_path, DatasetMeta};
use mbar_kernel::cli::{cmd_dataset, cmd_entangle, cmd_gram, cmd_scaling, cmd_train, RunConfig};
use mbar_kernel::kernel::KernelMatrix;
use mbar_kernel::ml::{default_references, make_mesh, GridSpec, LabeledDataset};
use mbar_kernel::Error;

fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.device.qubit_dim = 3;
    cfg.device.mode_dim = 3;
    cfg.experiment.mesh_resolution = 4;
    cfg.experiment.training_sizes = vec![6];
    cfg.experiment.seeds = vec![0, 1];
    cfg.experiment.quantum_grid = GridSpec { c: vec![1.0, 10.0, 100.0], gamma: vec![1.0], extended_c: None };
    cfg.experiment.rbf_grid = GridSpec { c: vec![0.1, 1.0, 10.0], gamma: vec![1.0, 10.0], extended_c: None };
    cfg.entangle.n_modes = vec![1, 2];
    cfg.entangle.mode_dim = 3;
    cfg.entangle.t_max_us = 1.0;
    cfg.entangle.step_us = 0.1;
    cfg.scaling.protocol.measure_time = 1.0;
    cfg.scaling.rows = vec![(2, 6), (3, 6)];
    cfg.validate().unwrap();
    cfg
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn pipeline_is_reproducible() {
    let cfg = tiny_config();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        cmd_dataset(&cfg, d.path()).unwrap();
        cmd_gram(&cfg, d.path()).unwrap();
        cmd_train(&cfg, d.path()).unwrap();
    }
    let (a, b) = (dirs[0].path(), dirs[1].path());
    for k in [0.0, 400.0] {
        assert_eq!(read(&dataset_path(a, k)), read(&dataset_path(b, k)));
        assert_eq!(read(&gram_path(a, k)), read(&gram_path(b, k)));
    }
    assert_eq!(read(&a.join("accuracy.csv")), read(&b.join("accuracy.csv")));
    let acc = String::from_utf8(read(&a.join("accuracy.csv"))).unwrap();
    assert!(acc.starts_with("kerr_mhz,train_size,seed,kernel,c,gamma,accuracy\n"));
    assert_eq!(acc.lines().count(), 1 + 2 * 2 * 2);
    let summary = String::from_utf8(read(&a.join("accuracy_summary.csv"))).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);

    let gram = KernelMatrix::read_csv(fs::File::open(gram_path(a, 400.0)).unwrap()).unwrap();
    assert_eq!(gram.nrows(), 16 + 2);
    assert_eq!(gram.max_asymmetry(), 0.0);
    let manifest: serde_json::Value = serde_json::from_slice(&read(&a.join("manifest_train.json"))).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1]));
    assert_eq!(manifest["code_version"], env!("CARGO_PKG_VERSION"));
    let echoed: RunConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(echoed.experiment, cfg.experiment);
}

#[test]
fn missing_upstream_files_are_named() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    match cmd_gram(&cfg, dir.path()) {
        Err(Error::MissingFile(p)) => assert_eq!(p, dataset_path(dir.path(), 0.0)),
        other => panic!("expected a missing file, got {other:?}"),
    }
    match cmd_train(&cfg, dir.path()) {
        Err(Error::MissingFile(p)) => assert_eq!(p, dataset_path(dir.path(), 0.0)),
        other => panic!("expected a missing file, got {other:?}"),
    }
}

#[test]
fn separable_toy_gram_trains_perfectly() {
    let mut cfg = tiny_config();
    cfg.experiment.kerr_sweep_mhz = vec![0.0];
    cfg.experiment.mesh_resolution = 3;
    let dir = tempfile::tempdir().unwrap();
    let mesh = make_mesh(3).unwrap();
    let labels: Vec<u8> = mesh.iter().map(|s| if s.features[0] < 0.5 { 1 } else { 2 }).collect();
    let ds = LabeledDataset::new(mesh, labels, 3, default_references(), 0).unwrap();
    ds.write_csv(fs::File::create(dataset_path(dir.path(), 0.0)).unwrap()).unwrap();
    let meta = DatasetMeta {
        kerr_mhz: 0.0,
        mesh_resolution: 3,
        label_map: Default::default(),
        references: default_references(),
        class_counts: [3, 6],
    };
    fs::write(dataset_meta_path(dir.path(), 0.0), serde_json::to_vec(&meta).unwrap()).unwrap();
    let ids: Vec<String> = ds.all_points().into_iter().map(|s| s.id).collect();
    let all = ds.all_labels();
    let entries = all.iter().map(|a| all.iter().map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
    let gram = KernelMatrix::new(ids.clone(), ids, entries).unwrap();
    gram.write_csv(fs::File::create(gram_path(dir.path(), 0.0)).unwrap()).unwrap();
    cmd_train(&cfg, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("accuracy.csv")).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let quantum: Vec<f64> = r
        .records()
        .map(|rec| rec.unwrap())
        .filter(|rec| &rec[3] == "quantum")
        .map(|rec| rec[6].parse().unwrap())
        .collect();
    assert_eq!(quantum, vec![1.0, 1.0]);
}

#[test]
fn entangle_outputs() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let files = cmd_entangle(&cfg, dir.path()).unwrap();
    assert_eq!(files.len(), 2 * 2 + 2);
    let zero = fs::read_to_string(dir.path().join("entangle/n2_k0.csv")).unwrap();
    let mut lines = zero.lines();
    assert_eq!(lines.next(), Some("t_us,fidelity,log_negativity"));
    for line in lines {
        let f: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((f - 1.0).abs() < 1e-6, "{line}");
    }
    let single = fs::read_to_string(dir.path().join("entangle/n1_k400.csv")).unwrap();
    assert!(single.lines().skip(1).all(|l| l.ends_with(',')));
    let env = fs::read_to_string(dir.path().join("entangle/envelopes_n2.csv")).unwrap();
    assert!(env.starts_with("t_us,w1_mhz,w2_mhz\n"));
    let peak: f64 = env.lines().nth(121).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((peak - 9.25).abs() < 1e-9);
}

#[test]
fn scaling_reports_qubit_counts() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    cmd_scaling(&cfg, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["n", "n_dim", "n_q", "t_c", "t_c_std", "repeats", "config_hash"]
    );
    for rec in r.records() {
        let rec = rec.unwrap();
        let (n, d, q): (usize, usize, u32) =
            (rec[0].parse().unwrap(), rec[1].parse().unwrap(), rec[2].parse().unwrap());
        let row = TABLE_ROWS.iter().find(|r| (r.0, r.1) == (n, d)).unwrap();
        assert_eq!(q, row.2);
        assert!(rec[3].parse::<f64>().unwrap() > 0.0);
    }
    let manifest: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("manifest_scaling.json"))).unwrap();
    assert!(manifest["machine"]["os"].is_string());
}

#[test]
fn binary_entry_point() {
    let exe = env!("CARGO_BIN_EXE_mbar");
    let out = Command::new(exe).arg("config").output().unwrap();
    assert!(out.status.success());
    let cfg = RunConfig::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, RunConfig::default());

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = Command::new(exe).args(["dataset", "--config"]).arg(&missing).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": {"seedz": [1]}}"#).unwrap();
    let out = Command::new(exe).args(["train", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seedz"));
}
