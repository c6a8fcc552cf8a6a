//! Pipeline commands. Each reads its inputs from the output directory,
//! writes CSV/JSON artifacts atomically and records a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bench::{time_kernel_entry, write_rows, ScalingRow};
use crate::entangle::{envelopes, time_grid, trajectory};
use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, QuantumKernel, RhoCache};
use crate::ml::{label_mesh, make_mesh, sample_training, tune, KernelSource, LabeledDataset, Reference};
use crate::model::to_mhz;

use super::config::RunConfig;

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingFile(path))
    }
}

/// File-name tag for a Kerr strength, e.g. `k400` or `k6.25`.
pub fn kerr_tag(kerr_mhz: f64) -> String {
    format!("k{kerr_mhz}")
}

pub fn dataset_path(out: &Path, kerr_mhz: f64) -> PathBuf {
    out.join(format!("dataset_{}.csv", kerr_tag(kerr_mhz)))
}

pub fn dataset_meta_path(out: &Path, kerr_mhz: f64) -> PathBuf {
    out.join(format!("dataset_{}.json", kerr_tag(kerr_mhz)))
}

pub fn gram_path(out: &Path, kerr_mhz: f64) -> PathBuf {
    out.join(format!("gram_{}.csv", kerr_tag(kerr_mhz)))
}

#[derive(Serialize)]
struct Machine {
    os: &'static str,
    arch: &'static str,
    available_parallelism: usize,
    rayon_threads: usize,
}

impl Machine {
    fn current() -> Self {
        Self {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            available_parallelism: std::thread::available_parallelism().map_or(1, usize::from),
            rayon_threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    code_version: &'static str,
    config: &'a RunConfig,
    seeds: &'a [u64],
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    machine: Option<Machine>,
}

fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    outputs: &[PathBuf],
    machine: Option<Machine>,
) -> Result<()> {
    let outputs = outputs.iter().map(|p| p.strip_prefix(out).unwrap_or(p).to_string_lossy().into_owned()).collect();
    let manifest = Manifest {
        command,
        code_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seeds: &cfg.experiment.seeds,
        outputs,
        machine,
    };
    write_json(&out.join(format!("manifest_{command}.json")), &manifest)
}

/// Fidelity and log-negativity trajectories for every `(n, K)` pair, plus
/// pulse envelopes per `n`.
///
/// `entangle/n{n}_k{K}.csv`: `t_us, fidelity, log_negativity` (the last
/// empty for one resonator). `entangle/envelopes_n{n}.csv`: `t_us` and the
/// envelope of each pulse in MHz.
pub fn cmd_entangle(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = &cfg.entangle;
    let mut outputs = Vec::new();
    for &n in &spec.n_modes {
        let drive = spec.drive(n)?;
        let times = time_grid(&drive, spec.t_max_us, spec.step_us)?;
        for &k in &spec.kerr_mhz {
            let device = spec.device(n, k)?;
            eprintln!("entangle: n = {n}, K = {k} MHz, {} snapshots", times.len());
            let points = trajectory(&device, &drive, &times, &cfg.propagator)?;
            let path = out.join("entangle").join(format!("n{n}_{}.csv", kerr_tag(k)));
            write_atomic(&path, |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["t_us", "fidelity", "log_negativity"])?;
                for p in &points {
                    let en = p.log_negativity.map(|v| v.to_string()).unwrap_or_default();
                    c.write_record([p.t.to_string(), p.fidelity.to_string(), en])?;
                }
                c.flush()?;
                Ok(())
            })?;
            outputs.push(path);
        }
        let device = spec.device(n, spec.kerr_mhz.first().copied().unwrap_or(0.0))?;
        let schedule = drive.schedule(&device, Vec::new())?;
        let samples = 241;
        let env_times: Vec<f64> = (0..samples).map(|i| drive.end() * i as f64 / (samples - 1) as f64).collect();
        let path = out.join("entangle").join(format!("envelopes_n{n}.csv"));
        write_atomic(&path, |w| {
            let mut c = csv::Writer::from_writer(w);
            let mut header = vec!["t_us".to_string()];
            header.extend((1..=n).map(|j| format!("w{j}_mhz")));
            c.write_record(&header)?;
            for row in envelopes(&schedule, &env_times) {
                let mut rec = vec![row[0].to_string()];
                rec.extend(row[1..].iter().map(|&v| to_mhz(v).to_string()));
                c.write_record(&rec)?;
            }
            c.flush()?;
            Ok(())
        })?;
        outputs.push(path);
    }
    write_manifest(out, "entangle", cfg, &outputs, None)?;
    Ok(outputs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kerr_mhz: f64,
    pub mesh_resolution: usize,
    pub label_map: BTreeMap<String, String>,
    pub references: [Reference; 2],
    pub class_counts: [usize; 2],
}

/// Labeled mesh for every Kerr strength of the sweep:
/// `dataset_k{K}.csv` (`x1, ..., xd, label`) and `dataset_k{K}.json`.
pub fn cmd_dataset(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let exp = &cfg.experiment;
    let encoding = cfg.encoding.encoding();
    let mesh = mesh_points(cfg)?;
    let mut outputs = Vec::new();
    for &k in &exp.kerr_sweep_mhz {
        eprintln!("dataset: K = {k} MHz, {} points", mesh.len());
        let kernel = QuantumKernel::new(&cfg.device.device(k)?, &encoding, &cfg.propagator)?;
        let ds = label_mesh(&kernel, &mesh, exp.references.clone(), exp.mesh_resolution, 0)?;
        let path = dataset_path(out, k);
        write_atomic(&path, |w| ds.write_csv(w))?;
        let (ones, twos) = ds.class_counts();
        let label_map = BTreeMap::from([
            ("1".to_string(), format!("closer to {}", exp.references[0].sample.id)),
            ("2".to_string(), format!("closer to {} (or tied)", exp.references[1].sample.id)),
        ]);
        let meta = DatasetMeta {
            kerr_mhz: k,
            mesh_resolution: exp.mesh_resolution,
            label_map,
            references: exp.references.clone(),
            class_counts: [ones, twos],
        };
        let meta_path = dataset_meta_path(out, k);
        write_json(&meta_path, &meta)?;
        outputs.extend([path, meta_path]);
    }
    write_manifest(out, "dataset", cfg, &outputs, None)?;
    Ok(outputs)
}

fn mesh_points(cfg: &RunConfig) -> Result<Vec<crate::kernel::Sample>> {
    let d = cfg.device.mode_detunings_mhz.len();
    if d != 2 {
        return Err(Error::Config(format!("mesh datasets are two-dimensional, device has {d} resonators")));
    }
    make_mesh(cfg.experiment.mesh_resolution)
}

pub fn load_dataset(cfg: &RunConfig, out: &Path, kerr_mhz: f64) -> Result<LabeledDataset> {
    let path = require(dataset_path(out, kerr_mhz))?;
    let meta_path = require(dataset_meta_path(out, kerr_mhz))?;
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
    let ds = LabeledDataset::read_csv(fs::File::open(path)?, meta.mesh_resolution, meta.references, 0)?;
    if ds.mesh_resolution != cfg.experiment.mesh_resolution {
        return Err(Error::Config(format!(
            "dataset mesh {} does not match configured mesh {}",
            ds.mesh_resolution, cfg.experiment.mesh_resolution
        )));
    }
    Ok(ds)
}

/// Quantum Gram matrix over every dataset point (mesh, then references):
/// `gram_k{K}.csv` (`row_id, col_id, value`) and `gram_k{K}.json`.
pub fn cmd_gram(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let encoding = cfg.encoding.encoding();
    let mut outputs = Vec::new();
    for &k in &cfg.experiment.kerr_sweep_mhz {
        let ds = load_dataset(cfg, out, k)?;
        let points = ds.all_points();
        eprintln!("gram: K = {k} MHz, {0}x{0}", points.len());
        let kernel =
            QuantumKernel::with_cache(&cfg.device.device(k)?, &encoding, &cfg.propagator, Arc::new(RhoCache::new()))?;
        let gram = kernel.gram(&points, &points)?;
        let path = gram_path(out, k);
        write_atomic(&path, |w| gram.write_csv(w))?;
        let json_path = path.with_extension("json");
        write_json(&json_path, &gram)?;
        outputs.extend([path, json_path]);
    }
    write_manifest(out, "gram", cfg, &outputs, None)?;
    Ok(outputs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub kerr_mhz: f64,
    pub train_size: usize,
    pub seed: u64,
    pub kernel: String,
    pub c: f64,
    pub gamma: Option<f64>,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kerr_mhz: f64,
    pub train_size: usize,
    pub kernel: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub seeds: usize,
}

/// Tuned quantum-kernel and RBF SVMs for every Kerr strength, training
/// size and seed, scored on every dataset point. Writes `accuracy.csv` (one
/// row per run) and `accuracy_summary.csv` (mean and sample standard
/// deviation over seeds).
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let exp = &cfg.experiment;
    let mut rows = Vec::new();
    for &k in &exp.kerr_sweep_mhz {
        let ds = load_dataset(cfg, out, k)?;
        let gram = KernelMatrix::read_csv(fs::File::open(require(gram_path(out, k))?)?)?;
        let ids: Vec<String> = ds.all_points().into_iter().map(|s| s.id).collect();
        if gram.row_ids != ids || gram.col_ids != ids {
            return Err(Error::Config(format!("{} does not match the dataset points", gram_path(out, k).display())));
        }
        let eval: Vec<usize> = (0..ids.len()).collect();
        for &size in &exp.training_sizes {
            for &seed in &exp.seeds {
                let train = sample_training(&ds, size, seed)?;
                for (name, source, grid) in [
                    ("quantum", KernelSource::Precomputed(&gram), &exp.quantum_grid),
                    ("rbf", KernelSource::Rbf, &exp.rbf_grid),
                ] {
                    let best = tune(source, &ds, &train, grid, &eval)?.best;
                    eprintln!("train: K = {k} MHz, size {size}, seed {seed}, {name}: {:.4}", best.accuracy);
                    rows.push(AccuracyRow {
                        kerr_mhz: k,
                        train_size: size,
                        seed,
                        kernel: name.into(),
                        c: best.c,
                        gamma: best.gamma,
                        accuracy: best.accuracy,
                    });
                }
            }
        }
    }
    let path = out.join("accuracy.csv");
    write_atomic(&path, |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in &rows {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    })?;
    let summary = summarize(&rows);
    let summary_path = out.join("accuracy_summary.csv");
    write_atomic(&summary_path, |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in &summary {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    })?;
    let outputs = vec![path, summary_path];
    write_manifest(out, "train", cfg, &outputs, None)?;
    Ok(outputs)
}

/// Groups by `(K, size, kernel)` in first-appearance order.
pub fn summarize(rows: &[AccuracyRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<((f64, usize, &str), Vec<f64>)> = Vec::new();
    for r in rows {
        let key = (r.kerr_mhz, r.train_size, r.kernel.as_str());
        match groups.iter_mut().find(|(g, _)| *g == key) {
            Some((_, v)) => v.push(r.accuracy),
            None => groups.push((key, vec![r.accuracy])),
        }
    }
    groups
        .into_iter()
        .map(|((k, size, kernel), v)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let std = if v.len() > 1 {
                (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                kerr_mhz: k,
                train_size: size,
                kernel: kernel.into(),
                mean_accuracy: mean,
                std_accuracy: std,
                seeds: v.len(),
            }
        })
        .collect()
}

/// Times one kernel entry per configured `(n, n_dim)` row: `scaling.csv`
/// with columns `n, n_dim, n_q, t_c, t_c_std, repeats, config_hash`.
pub fn cmd_scaling(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut rows: Vec<ScalingRow> = Vec::new();
    for &(n, d) in &cfg.scaling.rows {
        eprintln!("scaling: n = {n}, n_dim = {d}");
        let row = time_kernel_entry(n, d, &cfg.scaling.protocol)?;
        eprintln!("scaling: n_q = {}, t_c = {:.3} s", row.n_q, row.t_c);
        rows.push(row);
    }
    let path = out.join("scaling.csv");
    write_atomic(&path, |w| write_rows(&rows, w))?;
    let outputs = vec![path];
    write_manifest(out, "scaling", cfg, &outputs, Some(Machine::current()))?;
    Ok(outputs)
}
