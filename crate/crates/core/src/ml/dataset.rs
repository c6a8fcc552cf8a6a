//! Mesh datasets labeled by kernel similarity to two reference points.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::PropagatorConfig;
use crate::error::{Error, Result};
use crate::kernel::{EncodingConfig, KernelFunction, QuantumKernel, RhoCache, Sample};
use crate::model::DeviceParams;

/// Class labels are 1 and 2.
pub type Label = u8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub sample: Sample,
    pub label: Label,
}

/// The two reference points used for labeling, with labels 1 and 2.
pub fn default_references() -> [Reference; 2] {
    [
        Reference { sample: Sample { id: "ref1".into(), features: vec![0.1, 0.04285] }, label: 1 },
        Reference { sample: Sample { id: "ref2".into(), features: vec![0.7, 0.64285] }, label: 2 },
    ]
}

/// `resolution^2` points on the inclusive grid of the unit square, `x1`
/// varying slowest.
pub fn make_mesh(resolution: usize) -> Result<Vec<Sample>> {
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!("mesh resolution must be >= 2, got {resolution}")));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            out.push(Sample { id: format!("m{i}_{j}"), features: vec![i as f64 * step, j as f64 * step] });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    /// Mesh points.
    pub points: Vec<Sample>,
    pub labels: Vec<Label>,
    pub mesh_resolution: usize,
    pub references: [Reference; 2],
    pub seed: u64,
}

impl LabeledDataset {
    pub fn new(
        points: Vec<Sample>,
        labels: Vec<Label>,
        mesh_resolution: usize,
        references: [Reference; 2],
        seed: u64,
    ) -> Result<Self> {
        let ds = Self { points, labels, mesh_resolution, references, seed };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.points.len() {
            return Err(Error::InvalidDimension(format!(
                "{} labels for {} points",
                self.labels.len(),
                self.points.len()
            )));
        }
        if let Some(l) = self.all_labels().into_iter().find(|l| *l != 1 && *l != 2) {
            return Err(Error::InvalidParameter(format!("label {l} is not 1 or 2")));
        }
        let all = self.all_labels();
        if !all.contains(&1) || !all.contains(&2) {
            return Err(Error::InvalidParameter("dataset contains a single class".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mesh points followed by the two references. Accuracies are measured
    /// over this set.
    pub fn all_points(&self) -> Vec<Sample> {
        self.points.iter().cloned().chain(self.references.iter().map(|r| r.sample.clone())).collect()
    }

    pub fn all_labels(&self) -> Vec<Label> {
        self.labels.iter().copied().chain(self.references.iter().map(|r| r.label)).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (ones, self.labels.len() - ones)
    }

    /// CSV with columns `x1, ..., xd, label` for the mesh points.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.points.first().map_or(2, Sample::dim);
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (p, l) in self.points.iter().zip(&self.labels) {
            let mut rec: Vec<String> = p.features.iter().map(|x| format!("{x}")).collect();
            rec.push(l.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads mesh points back; ids are regenerated in row order to match
    /// [`make_mesh`].
    pub fn read_csv<R: Read>(reader: R, mesh_resolution: usize, references: [Reference; 2], seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let ids = make_mesh(mesh_resolution)?;
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("bad dataset value {s:?}: {e}")));
            let features = rec.iter().take(rec.len() - 1).map(parse).collect::<Result<Vec<_>>>()?;
            let label: Label = rec[rec.len() - 1].parse().map_err(|e| Error::Config(format!("bad label: {e}")))?;
            let id = ids
                .get(k)
                .map(|s| s.id.clone())
                .ok_or_else(|| Error::Config("dataset has more rows than the mesh".into()))?;
            points.push(Sample::new(id, features)?);
            labels.push(label);
        }
        Self::new(points, labels, mesh_resolution, references, seed)
    }
}

/// Labels each mesh point by the reference it is more similar to under
/// `kernel`: label 1 when `K(x, ref1) > K(x, ref2)`, otherwise label 2
/// (ties go to 2).
pub fn label_mesh<K: KernelFunction>(
    kernel: &QuantumKernel<K>,
    mesh: &[Sample],
    references: [Reference; 2],
    mesh_resolution: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let refs: Vec<Sample> = references.iter().map(|r| r.sample.clone()).collect();
    let sims = kernel.gram(mesh, &refs)?;
    let labels = (0..mesh.len())
        .map(|i| if sims.get(i, 0) > sims.get(i, 1) { references[0].label } else { references[1].label })
        .collect();
    LabeledDataset::new(mesh.to_vec(), labels, mesh_resolution, references, seed)
}

pub fn generate_labels(
    mesh: &[Sample],
    ref1: &Sample,
    ref2: &Sample,
    enc: &EncodingConfig,
    device: &DeviceParams,
    config: &PropagatorConfig,
    cache: Arc<RhoCache>,
) -> Result<LabeledDataset> {
    let resolution = (mesh.len() as f64).sqrt().round() as usize;
    if resolution * resolution != mesh.len() {
        return Err(Error::InvalidParameter(format!("{} points do not form a square mesh", mesh.len())));
    }
    let kernel = QuantumKernel::with_cache(device, enc, config, cache)?;
    let references = [Reference { sample: ref1.clone(), label: 1 }, Reference { sample: ref2.clone(), label: 2 }];
    label_mesh(&kernel, mesh, references, resolution, 0)
}

/// `size` distinct mesh indices drawn uniformly, reproducible from `seed`.
pub fn sample_training(dataset: &LabeledDataset, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > dataset.len() {
        return Err(Error::InvalidParameter(format!("training size {size} exceeds {} mesh points", dataset.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, dataset.len(), size).into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset() -> LabeledDataset {
        let mesh = make_mesh(25).unwrap();
        let labels = mesh.iter().map(|s| if s.features[0] < 0.5 { 1 } else { 2 }).collect();
        LabeledDataset::new(mesh, labels, 25, default_references(), 7).unwrap()
    }

    #[test]
    fn mesh_shape() {
        assert_eq!(make_mesh(75).unwrap().len(), 5625);
        let corners: Vec<Vec<f64>> = make_mesh(2).unwrap().into_iter().map(|s| s.features).collect();
        assert_eq!(corners, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let m = make_mesh(11).unwrap();
        assert_eq!(m.first().unwrap().features, vec![0.0, 0.0]);
        assert_eq!(m.last().unwrap().features, vec![1.0, 1.0]);
        assert!(make_mesh(1).is_err());
    }

    #[test]
    fn training_subsets() {
        let ds = toy_dataset();
        let mut all = sample_training(&ds, ds.len(), 3).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        assert_eq!(sample_training(&ds, 64, 11).unwrap(), sample_training(&ds, 64, 11).unwrap());
        let mut a = sample_training(&ds, 64, 1).unwrap();
        let mut b = sample_training(&ds, 64, 2).unwrap();
        a.sort_unstable();
        b.sort_unstable();
        assert_ne!(a, b);
        assert!(sample_training(&ds, ds.len() + 1, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = toy_dataset();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x1,x2,label\n"));
        let back = LabeledDataset::read_csv(buf.as_slice(), 25, default_references(), 7).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn single_class_rejected() {
        let mesh = make_mesh(2).unwrap();
        let mut refs = default_references();
        refs[1].label = 1;
        assert!(LabeledDataset::new(mesh, vec![1; 4], 2, refs, 0).is_err());
    }

    #[test]
    fn labeling_rule() {
        let device = DeviceParams::classifier(0.0, 2, 4).unwrap();
        let enc = EncodingConfig::classifier();
        let refs = default_references();
        let mut mesh = make_mesh(3).unwrap();
        mesh.push(Sample { id: "copy1".into(), features: refs[0].sample.features.clone() });
        mesh.push(Sample { id: "copy2".into(), features: refs[1].sample.features.clone() });
        let kernel = QuantumKernel::new(&device, &enc, &PropagatorConfig::default()).unwrap();
        let ds = label_mesh(&kernel, &mesh, refs, 3, 0).unwrap();
        assert_eq!(ds.labels[9], 1);
        assert_eq!(ds.labels[10], 2);
        let again = label_mesh(&kernel, &mesh, default_references(), 3, 0).unwrap();
        assert_eq!(ds, again);
    }
}
