//! Grid search over SVM hyperparameters scored by accuracy over an
//! evaluation set.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::ml::dataset::{Label, LabeledDataset};
use crate::ml::svm::{train_matrix, SvmModel};

/// `exp(-gamma |x - y|^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    assert_eq!(x.len(), y.len(), "feature dimension mismatch");
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| if n == 1 { lo } else { 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64) }).collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Extra C values, searched in addition to `c`.
    #[serde(default)]
    pub extended_c: Option<Vec<f64>>,
}

impl Default for GridSpec {
    /// 50 log-spaced C over [1e-2, 1e1] and 50 linear gamma over [1, 1000].
    fn default() -> Self {
        Self { c: logspace(1e-2, 1e1, 50), gamma: linspace(1.0, 1000.0, 50), extended_c: None }
    }
}

impl GridSpec {
    /// Adds 500 linear C values over [1, 3e6].
    pub fn with_extended_c(mut self) -> Self {
        self.extended_c = Some(linspace(1.0, 3e6, 500));
        self
    }

    pub fn single(c: f64, gamma: f64) -> Self {
        Self { c: vec![c], gamma: vec![gamma], extended_c: None }
    }

    pub fn validate(&self) -> Result<()> {
        let ascending = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.c.is_empty() || self.gamma.is_empty() {
            return Err(Error::Config("hyperparameter grids must be nonempty".into()));
        }
        if !ascending(&self.c) || !ascending(&self.gamma) || !self.extended_c.as_deref().map_or(true, ascending) {
            return Err(Error::Config("hyperparameter grids must be strictly ascending".into()));
        }
        if self.all_c().iter().any(|c| !(*c > 0.0)) || self.gamma.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::Config("C must be positive and gamma non-negative".into()));
        }
        Ok(())
    }

    /// All C values, ascending and deduplicated.
    pub fn all_c(&self) -> Vec<f64> {
        let mut all = self.c.clone();
        all.extend(self.extended_c.iter().flatten().copied());
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

/// Kernel used for training and evaluation.
#[derive(Clone, Copy, Debug)]
pub enum KernelSource<'a> {
    /// Gram matrix over `dataset.all_points()` in both dimensions.
    Precomputed(&'a KernelMatrix),
    /// RBF on the raw features; gamma is tuned.
    Rbf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: Option<f64>,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: GridPoint,
    /// Every evaluated point in grid order (C outer, gamma inner).
    pub table: Vec<GridPoint>,
}

struct Problem {
    train_k: Mat<f64>,
    /// Rows: evaluation points; columns: training points.
    eval_k: Mat<f64>,
}

fn build(source: KernelSource, points: &[Vec<f64>], train: &[usize], eval: &[usize], gamma: f64) -> Problem {
    let k = |a: usize, b: usize| match source {
        KernelSource::Precomputed(g) => g.get(a, b),
        KernelSource::Rbf => rbf_kernel(&points[a], &points[b], gamma),
    };
    Problem {
        train_k: Mat::from_fn(train.len(), train.len(), |i, j| k(train[i], train[j])),
        eval_k: Mat::from_fn(eval.len(), train.len(), |i, j| k(eval[i], train[j])),
    }
}

fn accuracy(model: &SvmModel, eval_k: &Mat<f64>, truth: &[Label]) -> f64 {
    let hits = (0..eval_k.nrows())
        .filter(|&i| {
            let row: Vec<f64> = (0..eval_k.ncols()).map(|j| eval_k[(i, j)]).collect();
            model.predict(&row) == truth[i]
        })
        .count();
    hits as f64 / truth.len() as f64
}

/// Trains one model per grid point on `train_idx` and scores it on
/// `eval_idx` (indices into `dataset.all_points()`). Ties in accuracy go to
/// the smaller C, then the smaller gamma.
pub fn tune(
    source: KernelSource,
    dataset: &LabeledDataset,
    train_idx: &[usize],
    grid: &GridSpec,
    eval_idx: &[usize],
) -> Result<TuneResult> {
    grid.validate()?;
    let points: Vec<Vec<f64>> = dataset.all_points().into_iter().map(|s| s.features).collect();
    let labels = dataset.all_labels();
    if let KernelSource::Precomputed(g) = source {
        if !g.is_square() || g.nrows() != points.len() {
            return Err(Error::InvalidDimension(format!(
                "precomputed Gram is {}x{}, dataset has {} points",
                g.nrows(),
                g.ncols(),
                points.len()
            )));
        }
    }
    if let Some(&i) = train_idx.iter().chain(eval_idx).find(|&&i| i >= points.len()) {
        return Err(Error::InvalidParameter(format!("index {i} outside the dataset")));
    }
    if eval_idx.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation set".into()));
    }
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();
    let truth: Vec<Label> = eval_idx.iter().map(|&i| labels[i]).collect();
    let ids: Vec<String> = train_idx.iter().map(|i| i.to_string()).collect();
    let gammas: Vec<Option<f64>> = match source {
        KernelSource::Precomputed(_) => vec![None],
        KernelSource::Rbf => grid.gamma.iter().copied().map(Some).collect(),
    };
    let cs = grid.all_c();

    let per_gamma: Vec<Vec<GridPoint>> = gammas
        .par_iter()
        .map(|&gamma| {
            let problem = build(source, &points, train_idx, eval_idx, gamma.unwrap_or(0.0));
            cs.iter()
                .map(|&c| {
                    let model = train_matrix(&problem.train_k, &train_labels, c, ids.clone())?;
                    Ok(GridPoint { c, gamma, accuracy: accuracy(&model, &problem.eval_k, &truth) })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::with_capacity(cs.len() * gammas.len());
    for ci in 0..cs.len() {
        for row in &per_gamma {
            table.push(row[ci].clone());
        }
    }
    let mut best = table[0].clone();
    for p in &table[1..] {
        if p.accuracy > best.accuracy {
            best = p.clone();
        }
    }
    Ok(TuneResult { best, table })
}

/// Trains at fixed hyperparameters and returns the model and its accuracy.
pub fn fit(
    source: KernelSource,
    dataset: &LabeledDataset,
    train_idx: &[usize],
    c: f64,
    gamma: Option<f64>,
    eval_idx: &[usize],
) -> Result<(SvmModel, f64)> {
    let grid = GridSpec { c: vec![c], gamma: vec![gamma.unwrap_or(1.0)], extended_c: None };
    grid.validate()?;
    let points: Vec<Vec<f64>> = dataset.all_points().into_iter().map(|s| s.features).collect();
    let labels = dataset.all_labels();
    let all_ids: Vec<String> = dataset.all_points().into_iter().map(|s| s.id).collect();
    let problem = build(source, &points, train_idx, eval_idx, gamma.unwrap_or(1.0));
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();
    let truth: Vec<Label> = eval_idx.iter().map(|&i| labels[i]).collect();
    let ids = train_idx.iter().map(|&i| all_ids[i].clone()).collect();
    let model = train_matrix(&problem.train_k, &train_labels, c, ids)?;
    let acc = accuracy(&model, &problem.eval_k, &truth);
    Ok((model, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::dataset::{default_references, make_mesh, sample_training};

    fn disk_dataset() -> LabeledDataset {
        let mesh = make_mesh(15).unwrap();
        let labels = mesh
            .iter()
            .map(|s| if (s.features[0] - 0.4).powi(2) + (s.features[1] - 0.5).powi(2) < 0.08 { 1 } else { 2 })
            .collect();
        LabeledDataset::new(mesh, labels, 15, default_references(), 0).unwrap()
    }

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_kernel(&[0.3, 0.2], &[0.3, 0.2], 5.0), 1.0);
        assert_eq!(rbf_kernel(&[0.0, 1.0], &[0.7, 0.1], 0.0), 1.0);
        assert!((rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn default_grid() {
        let g = GridSpec::default();
        assert_eq!(g.c.len(), 50);
        assert_eq!(g.gamma.len(), 50);
        assert!((g.c[0] - 1e-2).abs() < 1e-15 && (g.c[49] - 10.0).abs() < 1e-12);
        assert!((g.c[1] / g.c[0] - g.c[49] / g.c[48]).abs() < 1e-9);
        assert_eq!((g.gamma[0], g.gamma[49]), (1.0, 1000.0));
        let ext = g.clone().with_extended_c();
        assert_eq!(ext.extended_c.as_ref().unwrap().len(), 500);
        assert_eq!(ext.all_c().len(), 550);
        g.validate().unwrap();
        assert!(GridSpec { c: vec![], gamma: vec![1.0], extended_c: None }.validate().is_err());
        assert!(GridSpec { c: vec![2.0, 1.0], gamma: vec![1.0], extended_c: None }.validate().is_err());
    }

    #[test]
    fn single_point_grid() {
        let ds = disk_dataset();
        let train = sample_training(&ds, 40, 5).unwrap();
        let eval: Vec<usize> = (0..ds.all_points().len()).collect();
        let r = tune(KernelSource::Rbf, &ds, &train, &GridSpec::single(3.0, 20.0), &eval).unwrap();
        assert_eq!(r.table.len(), 1);
        assert_eq!((r.best.c, r.best.gamma), (3.0, Some(20.0)));
        assert!((0.0..=1.0).contains(&r.best.accuracy));
    }

    #[test]
    fn tuned_rbf_learns_a_disk() {
        let ds = disk_dataset();
        let train = sample_training(&ds, 64, 1).unwrap();
        let eval: Vec<usize> = (0..ds.all_points().len()).collect();
        let grid = GridSpec { c: logspace(1e-1, 1e2, 6), gamma: linspace(1.0, 60.0, 6), extended_c: None };
        let r = tune(KernelSource::Rbf, &ds, &train, &grid, &eval).unwrap();
        assert_eq!(r.table.len(), 36);
        assert!(r.best.accuracy > 0.9, "{:?}", r.best);
        // Ties resolve to the first grid point in (C, gamma) order.
        let first_best = r.table.iter().find(|p| p.accuracy == r.best.accuracy).unwrap();
        assert_eq!(first_best, &r.best);
    }

    #[test]
    fn training_order_does_not_change_accuracy() {
        let ds = disk_dataset();
        let train = sample_training(&ds, 50, 9).unwrap();
        let mut rev = train.clone();
        rev.reverse();
        let eval: Vec<usize> = (0..ds.len()).collect();
        let (_, a) = fit(KernelSource::Rbf, &ds, &train, 5.0, Some(15.0), &eval).unwrap();
        let (_, b) = fit(KernelSource::Rbf, &ds, &rev, 5.0, Some(15.0), &eval).unwrap();
        assert!((a - b).abs() <= 2.0 / eval.len() as f64, "{a} vs {b}");
    }

    #[test]
    fn precomputed_separable_gram() {
        let ds = disk_dataset();
        let pts = ds.all_points();
        let ids: Vec<String> = pts.iter().map(|s| s.id.clone()).collect();
        let labels = ds.all_labels();
        // Ideal kernel: 1 within a class, 0 across.
        let entries = labels.iter().map(|a| labels.iter().map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
        let gram = KernelMatrix::new(ids.clone(), ids, entries).unwrap();
        let train = sample_training(&ds, 30, 4).unwrap();
        let eval: Vec<usize> = (0..pts.len()).collect();
        let r = tune(KernelSource::Precomputed(&gram), &ds, &train, &GridSpec::default(), &eval).unwrap();
        assert_eq!(r.best.accuracy, 1.0);
        assert_eq!(r.table.len(), 50);
        assert!(r.best.gamma.is_none());
    }
}
