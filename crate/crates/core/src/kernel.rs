//! Data encoding, cached per-sample states and fidelity-product kernels.
//!
//! A sample `x in [0,1]^d` drives the device with `d` simultaneous Gaussian
//! pulses, pulse `j` resonant with resonator `j` and of amplitude
//! `W_min + (W_max - W_min) x_j`. The joint reduced resonator state is
//! recorded at `T_j = T_min + (T_max - T_min) x_j` for each feature, giving
//! one density matrix per feature. Two samples are compared feature by
//! feature and the kernel entry is the product of the Uhlmann fidelities.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DeviceDynamics, PropagatorConfig};
use crate::error::{Error, Result};
use crate::hilbert::ModeLayout;
use crate::linalg::eigh_real;
use crate::model::{mhz, DeviceParams, DriveSchedule, GaussianPulse};
use crate::qinfo::{DensityMatrix, FidelityReference};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Pulse amplitude for feature value 0, rad/us.
    pub omega_min: f64,
    /// Pulse amplitude for feature value 1, rad/us.
    pub omega_max: f64,
    /// Measurement time for feature value 0, us.
    pub t_min: f64,
    /// Measurement time for feature value 1, us.
    pub t_max: f64,
    /// Pulse width, us.
    pub sigma: f64,
    /// Common pulse center; `3 sigma` when absent.
    pub center: Option<f64>,
    /// Per-feature drive detunings, rad/us; the device detunings when absent.
    pub detunings: Option<Vec<f64>>,
}

impl EncodingConfig {
    /// Amplitudes 7.5..7.6 MHz, 80 ns pulses, measurement between
    /// 5 us and 95 us after the pulse center.
    pub fn classifier() -> Self {
        let sigma = 0.08;
        Self {
            omega_min: mhz(7.5),
            omega_max: mhz(7.6),
            t_min: 5.0 + 3.0 * sigma,
            t_max: 95.0 + 3.0 * sigma,
            sigma,
            center: None,
            detunings: None,
        }
    }

    pub fn center(&self) -> f64 {
        self.center.unwrap_or(3.0 * self.sigma)
    }

    /// End of every pulse support.
    pub fn pulse_end(&self) -> f64 {
        self.center() + 3.0 * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("pulse width must be > 0, got {}", self.sigma)));
        }
        if !(self.omega_max >= self.omega_min) {
            return Err(Error::InvalidParameter("omega_max must be >= omega_min".into()));
        }
        if !(self.t_max > self.t_min) {
            return Err(Error::InvalidParameter("t_max must exceed t_min".into()));
        }
        if self.t_min < self.pulse_end() {
            return Err(Error::InvalidParameter(format!(
                "t_min = {} us precedes the end of the pulses at {} us",
                self.t_min,
                self.pulse_end()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
}

impl Sample {
    pub fn new(id: impl Into<String>, features: Vec<f64>) -> Result<Self> {
        if let Some(x) = features.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Encoding(format!("feature {x} outside [0, 1]")));
        }
        Ok(Self { id: id.into(), features })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

pub fn encode_sample(x: &Sample, enc: &EncodingConfig, device: &DeviceParams) -> Result<DriveSchedule> {
    enc.validate()?;
    let d = device.n_modes();
    if x.dim() != d {
        return Err(Error::Encoding(format!("sample {} has {} features, device has {d} resonators", x.id, x.dim())));
    }
    if let Some(v) = x.features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Encoding(format!("feature {v} of sample {} outside [0, 1]", x.id)));
    }
    let detunings = enc.detunings.as_ref().unwrap_or(&device.deltas);
    if detunings.len() != d {
        return Err(Error::Encoding(format!("{} drive detunings for {d} features", detunings.len())));
    }
    let center = enc.center();
    let pulses = x
        .features
        .iter()
        .zip(detunings)
        .map(|(&v, &delta)| {
            let amp = enc.omega_min + (enc.omega_max - enc.omega_min) * v;
            GaussianPulse::new(amp, delta, center, enc.sigma)
        })
        .collect::<Result<Vec<_>>>()?;
    let times = x.features.iter().map(|&v| enc.t_min + (enc.t_max - enc.t_min) * v).collect();
    DriveSchedule::new(pulses, times)
}

/// The reduced resonator states of one sample, one per feature, held as
/// factors `W` with `rho = W W^dagger`. Repeated measurement times share one
/// entry.
#[derive(Clone, Debug)]
pub struct SampleStates {
    layout: ModeLayout,
    prepared: Vec<Arc<FidelityReference>>,
}

impl SampleStates {
    /// From dense density matrices, decomposing each once.
    pub fn new(snapshots: Vec<Arc<DensityMatrix>>) -> Result<Self> {
        let layout = snapshots
            .first()
            .map(|r| r.layout().clone())
            .ok_or_else(|| Error::InvalidParameter("a sample needs at least one state".into()))?;
        let prepared = snapshots.iter().map(|r| FidelityReference::new(r).map(Arc::new)).collect::<Result<_>>()?;
        Ok(Self { layout, prepared })
    }

    pub fn from_factors(layout: ModeLayout, factors: &[Arc<Mat<C64>>]) -> Result<Self> {
        let d = layout.total_dim();
        let mut prepared: Vec<Arc<FidelityReference>> = Vec::with_capacity(factors.len());
        for (l, w) in factors.iter().enumerate() {
            if w.nrows() != d {
                return Err(Error::InvalidDimension(format!("factor with {} rows for dimension {d}", w.nrows())));
            }
            let shared = factors[..l].iter().position(|u| Arc::ptr_eq(u, w));
            prepared.push(match shared {
                Some(k) => prepared[k].clone(),
                None => Arc::new(FidelityReference::from_factor((**w).clone())),
            });
        }
        Ok(Self { layout, prepared })
    }

    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn references(&self) -> &[Arc<FidelityReference>] {
        &self.prepared
    }

    /// Dense state of feature `l`.
    pub fn density(&self, l: usize) -> Result<DensityMatrix> {
        let r =
            self.prepared.get(l).ok_or_else(|| Error::InvalidParameter(format!("feature {l} of {}", self.len())))?;
        DensityMatrix::from_factor(self.layout.clone(), r.factor())
    }
}

/// Runs the device for one sample and returns its per-feature states.
pub fn sample_states(
    x: &Sample,
    enc: &EncodingConfig,
    device: &DeviceParams,
    config: &PropagatorConfig,
) -> Result<Vec<DensityMatrix>> {
    let dyn_ = DeviceDynamics::new(device, config)?;
    let states = simulate(&dyn_, x, enc)?;
    (0..states.len()).map(|l| states.density(l)).collect()
}

/// Simulates one sample on prepared dynamics.
pub fn simulate(dynamics: &DeviceDynamics, x: &Sample, enc: &EncodingConfig) -> Result<SampleStates> {
    let schedule = encode_sample(x, enc, dynamics.device())?;
    let (cursor, factors) = dynamics.factors(&schedule)?;
    SampleStates::from_factors(cursor.modes_layout().clone(), &factors)
}

/// Kernel entry as a function of two samples' state lists.
pub trait KernelFunction: Sync {
    fn entry(&self, a: &SampleStates, b: &SampleStates) -> Result<f64>;
}

/// Product over features of the Uhlmann fidelities.
#[derive(Clone, Copy, Debug, Default)]
pub struct FidelityProduct;

impl KernelFunction for FidelityProduct {
    fn entry(&self, a: &SampleStates, b: &SampleStates) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::InvalidDimension(format!("state lists of length {} and {}", a.len(), b.len())));
        }
        let mut k = 1.0;
        for (pa, pb) in a.prepared.iter().zip(&b.prepared) {
            k *= pa.fidelity_with(pb)?;
        }
        Ok(k.clamp(0.0, 1.0))
    }
}

/// `prod_l F(rhos1[l], rhos2[l])`.
pub fn kernel_entry(rhos1: &[DensityMatrix], rhos2: &[DensityMatrix]) -> Result<f64> {
    if rhos1.len() != rhos2.len() {
        return Err(Error::InvalidDimension(format!("state lists of length {} and {}", rhos1.len(), rhos2.len())));
    }
    let mut k = 1.0;
    for (a, b) in rhos1.iter().zip(rhos2) {
        k *= crate::qinfo::uhlmann_fidelity(a, b)?;
    }
    Ok(k.clamp(0.0, 1.0))
}

/// Sample id -> simulated states. Each id is simulated by exactly one
/// thread; concurrent requests for the same id wait for that result.
#[derive(Debug, Default)]
pub struct RhoCache {
    slots: Mutex<HashMap<String, Arc<Mutex<Option<Arc<SampleStates>>>>>>,
}

impl RhoCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().unwrap().values().filter(|s| s.lock().unwrap().is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<Arc<SampleStates>> {
        let slot = self.slots.lock().unwrap().get(id).cloned()?;
        let guard = slot.lock().unwrap();
        guard.clone()
    }

    pub fn get_or_compute(
        &self,
        id: &str,
        compute: impl FnOnce() -> Result<SampleStates>,
    ) -> Result<Arc<SampleStates>> {
        let slot = self.slots.lock().unwrap().entry(id.to_string()).or_default().clone();
        let mut guard = slot.lock().unwrap();
        if let Some(s) = guard.as_ref() {
            return Ok(s.clone());
        }
        let states = Arc::new(compute()?);
        *guard = Some(states.clone());
        Ok(states)
    }
}

/// Real Gram matrix with row and column sample ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    /// Row-major.
    pub entries: Vec<Vec<f64>>,
}

impl KernelMatrix {
    pub fn new(row_ids: Vec<String>, col_ids: Vec<String>, entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.len() != row_ids.len() || entries.iter().any(|r| r.len() != col_ids.len()) {
            return Err(Error::InvalidDimension("kernel matrix shape does not match its ids".into()));
        }
        Ok(Self { row_ids, col_ids, entries })
    }

    pub fn nrows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_ids.len()
    }

    pub fn is_square(&self) -> bool {
        self.row_ids == self.col_ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i]
    }

    /// Sub-matrix by row and column positions.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> KernelMatrix {
        KernelMatrix {
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            col_ids: cols.iter().map(|&j| self.col_ids[j].clone()).collect(),
            entries: rows.iter().map(|&i| cols.iter().map(|&j| self.entries[i][j]).collect()).collect(),
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.nrows();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                m = m.max((self.entries[i][j] - self.entries[j][i]).abs());
            }
        }
        m
    }

    /// Replaces a square matrix by its projection onto the positive
    /// semidefinite cone (negative eigenvalues set to zero).
    pub fn clip_negative_spectrum(&self) -> Result<KernelMatrix> {
        if !self.is_square() {
            return Err(Error::InvalidDimension("spectrum clipping needs a square Gram matrix".into()));
        }
        let n = self.nrows();
        let m = Mat::from_fn(n, n, |i, j| 0.5 * (self.entries[i][j] + self.entries[j][i]));
        let (vals, vecs) = eigh_real(&m)?;
        let scaled = Mat::from_fn(n, n, |i, k| vecs[(i, k)] * vals[k].max(0.0));
        let out = &scaled * vecs.transpose();
        let entries = (0..n).map(|i| (0..n).map(|j| out[(i, j)]).collect()).collect();
        Ok(KernelMatrix { row_ids: self.row_ids.clone(), col_ids: self.col_ids.clone(), entries })
    }

    /// Long-format CSV: `row_id,col_id,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row_id", "col_id", "value"])?;
        for (i, rid) in self.row_ids.iter().enumerate() {
            for (j, cid) in self.col_ids.iter().enumerate() {
                w.write_record([rid.as_str(), cid.as_str(), &format!("{:.17e}", self.entries[i][j])])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows: Vec<String> = Vec::new();
        let mut cols: Vec<String> = Vec::new();
        let mut values: HashMap<(usize, usize), f64> = HashMap::new();
        let mut row_pos: HashMap<String, usize> = HashMap::new();
        let mut col_pos: HashMap<String, usize> = HashMap::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Config(format!("kernel CSV row has {} fields", rec.len())));
            }
            let ri = *row_pos.entry(rec[0].to_string()).or_insert_with(|| {
                rows.push(rec[0].to_string());
                rows.len() - 1
            });
            let ci = *col_pos.entry(rec[1].to_string()).or_insert_with(|| {
                cols.push(rec[1].to_string());
                cols.len() - 1
            });
            let v: f64 = rec[2].parse().map_err(|e| Error::Config(format!("bad kernel value {:?}: {e}", &rec[2])))?;
            values.insert((ri, ci), v);
        }
        let mut entries = vec![vec![0.0; cols.len()]; rows.len()];
        for i in 0..rows.len() {
            for j in 0..cols.len() {
                entries[i][j] = *values
                    .get(&(i, j))
                    .ok_or_else(|| Error::Config(format!("kernel CSV missing entry ({}, {})", rows[i], cols[j])))?;
            }
        }
        Self::new(rows, cols, entries)
    }
}

/// A device plus encoding, with its propagators and a per-sample cache.
pub struct QuantumKernel<K: KernelFunction = FidelityProduct> {
    dynamics: DeviceDynamics,
    encoding: EncodingConfig,
    cache: Arc<RhoCache>,
    function: K,
}

impl QuantumKernel<FidelityProduct> {
    pub fn new(device: &DeviceParams, encoding: &EncodingConfig, config: &PropagatorConfig) -> Result<Self> {
        Self::with_cache(device, encoding, config, Arc::new(RhoCache::new()))
    }

    pub fn with_cache(
        device: &DeviceParams,
        encoding: &EncodingConfig,
        config: &PropagatorConfig,
        cache: Arc<RhoCache>,
    ) -> Result<Self> {
        encoding.validate()?;
        Ok(Self {
            dynamics: DeviceDynamics::new(device, config)?,
            encoding: encoding.clone(),
            cache,
            function: FidelityProduct,
        })
    }
}

impl<K: KernelFunction> QuantumKernel<K> {
    pub fn with_function<K2: KernelFunction>(self, function: K2) -> QuantumKernel<K2> {
        QuantumKernel { dynamics: self.dynamics, encoding: self.encoding, cache: self.cache, function }
    }

    pub fn device(&self) -> &DeviceParams {
        self.dynamics.device()
    }

    pub fn encoding(&self) -> &EncodingConfig {
        &self.encoding
    }

    pub fn cache(&self) -> &Arc<RhoCache> {
        &self.cache
    }

    pub fn states(&self, x: &Sample) -> Result<Arc<SampleStates>> {
        self.cache.get_or_compute(&x.id, || simulate(&self.dynamics, x, &self.encoding))
    }

    /// Simulates every sample not yet cached, in parallel.
    pub fn prepare(&self, samples: &[Sample]) -> Result<Vec<Arc<SampleStates>>> {
        samples.par_iter().map(|s| self.states(s)).collect()
    }

    pub fn entry(&self, a: &Sample, b: &Sample) -> Result<f64> {
        let (sa, sb) = (self.states(a)?, self.states(b)?);
        self.function.entry(&sa, &sb)
    }

    /// Gram matrix between two sample lists. When both lists carry the same
    /// ids in the same order only the upper triangle is computed and
    /// mirrored.
    pub fn gram(&self, rows: &[Sample], cols: &[Sample]) -> Result<KernelMatrix> {
        let row_states = self.prepare(rows)?;
        let col_states = self.prepare(cols)?;
        let square = rows.len() == cols.len() && rows.iter().zip(cols).all(|(a, b)| a.id == b.id);
        let entries: Vec<Vec<f64>> = row_states
            .par_iter()
            .enumerate()
            .map(|(i, a)| {
                col_states
                    .iter()
                    .enumerate()
                    .map(|(j, b)| if square && j < i { Ok(0.0) } else { self.function.entry(a, b) })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut entries = entries;
        if square {
            for i in 0..rows.len() {
                for j in 0..i {
                    entries[i][j] = entries[j][i];
                }
            }
        }
        KernelMatrix::new(
            rows.iter().map(|s| s.id.clone()).collect(),
            cols.iter().map(|s| s.id.clone()).collect(),
            entries,
        )
    }
}

/// One-shot Gram computation sharing `cache` across calls.
pub fn gram_matrix(
    samples_a: &[Sample],
    samples_b: &[Sample],
    enc: &EncodingConfig,
    device: &DeviceParams,
    config: &PropagatorConfig,
    cache: Arc<RhoCache>,
) -> Result<KernelMatrix> {
    QuantumKernel::with_cache(device, enc, config, cache)?.gram(samples_a, samples_b)
}
