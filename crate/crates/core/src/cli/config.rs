//! Run configuration in MHz and microseconds, resolved once into internal
//! angular units.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::BenchProtocol;
use crate::dynamics::PropagatorConfig;
use crate::entangle::{DemoDrive, DEMO_AMPLITUDES_MHZ};
use crate::error::{Error, Result};
use crate::hilbert::ModeLayout;
use crate::kernel::EncodingConfig;
use crate::ml::{default_references, GridSpec, Reference};
use crate::model::{mhz, DeviceParams};

/// Classification device; the Kerr strength comes from the experiment sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSpec {
    pub qubit_detuning_mhz: f64,
    pub mode_detunings_mhz: Vec<f64>,
    pub couplings_mhz: Vec<f64>,
    pub qubit_dim: usize,
    pub mode_dim: usize,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        Self {
            qubit_detuning_mhz: 70.0,
            mode_detunings_mhz: vec![10.0, -15.0],
            couplings_mhz: vec![10.0, 10.0],
            qubit_dim: 4,
            mode_dim: 7,
        }
    }
}

impl DeviceSpec {
    pub fn device(&self, kerr_mhz: f64) -> Result<DeviceParams> {
        let layout = ModeLayout::qubit_with_modes(self.qubit_dim, self.mode_dim, self.mode_detunings_mhz.len())?;
        DeviceParams::from_mhz(kerr_mhz, self.qubit_detuning_mhz, &self.mode_detunings_mhz, &self.couplings_mhz, layout)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingSpec {
    pub amplitude_min_mhz: f64,
    pub amplitude_max_mhz: f64,
    pub t_min_us: f64,
    pub t_max_us: f64,
    pub sigma_us: f64,
    pub center_us: Option<f64>,
    pub drive_detunings_mhz: Option<Vec<f64>>,
}

impl Default for EncodingSpec {
    fn default() -> Self {
        let e = EncodingConfig::classifier();
        Self {
            amplitude_min_mhz: 7.5,
            amplitude_max_mhz: 7.6,
            t_min_us: e.t_min,
            t_max_us: e.t_max,
            sigma_us: e.sigma,
            center_us: None,
            drive_detunings_mhz: None,
        }
    }
}

impl EncodingSpec {
    pub fn encoding(&self) -> EncodingConfig {
        EncodingConfig {
            omega_min: mhz(self.amplitude_min_mhz),
            omega_max: mhz(self.amplitude_max_mhz),
            t_min: self.t_min_us,
            t_max: self.t_max_us,
            sigma: self.sigma_us,
            center: self.center_us,
            detunings: self.drive_detunings_mhz.as_ref().map(|d| d.iter().copied().map(mhz).collect()),
        }
    }
}

/// Entanglement demonstration: one run per `(n, K)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntangleSpec {
    pub n_modes: Vec<usize>,
    pub kerr_mhz: Vec<f64>,
    pub qubit_detuning_mhz: f64,
    /// Detunings of resonators 1, 2, ...; a run with `n` resonators uses
    /// the first `n`. Same for couplings and amplitudes.
    pub mode_detunings_mhz: Vec<f64>,
    pub couplings_mhz: Vec<f64>,
    pub amplitudes_mhz: Vec<f64>,
    pub sigma_us: f64,
    pub qubit_dim: usize,
    pub mode_dim: usize,
    pub t_max_us: f64,
    pub step_us: f64,
}

impl Default for EntangleSpec {
    fn default() -> Self {
        Self {
            n_modes: vec![1, 2, 3],
            kerr_mhz: vec![0.0, 400.0],
            qubit_detuning_mhz: 100.0,
            mode_detunings_mhz: vec![10.0, -10.0, -30.0],
            couplings_mhz: vec![8.0; 3],
            amplitudes_mhz: DEMO_AMPLITUDES_MHZ.to_vec(),
            sigma_us: 0.08,
            qubit_dim: 4,
            mode_dim: 6,
            t_max_us: 10.0,
            step_us: 0.05,
        }
    }
}

impl EntangleSpec {
    pub fn device(&self, n: usize, kerr_mhz: f64) -> Result<DeviceParams> {
        let take = |v: &[f64], what: &str| -> Result<Vec<f64>> {
            v.get(..n).map(<[f64]>::to_vec).ok_or_else(|| Error::Config(format!("{what} has fewer than {n} entries")))
        };
        let layout = ModeLayout::qubit_with_modes(self.qubit_dim, self.mode_dim, n)?;
        DeviceParams::from_mhz(
            kerr_mhz,
            self.qubit_detuning_mhz,
            &take(&self.mode_detunings_mhz, "entangle.mode_detunings_mhz")?,
            &take(&self.couplings_mhz, "entangle.couplings_mhz")?,
            layout,
        )
    }

    pub fn drive(&self, n: usize) -> Result<DemoDrive> {
        let amps = self
            .amplitudes_mhz
            .get(..n)
            .ok_or_else(|| Error::Config(format!("entangle.amplitudes_mhz has fewer than {n} entries")))?;
        Ok(DemoDrive { amplitudes: amps.iter().copied().map(mhz).collect(), sigma: self.sigma_us })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    /// Seeds for training-set draws.
    pub seeds: Vec<u64>,
    pub mesh_resolution: usize,
    pub training_sizes: Vec<usize>,
    pub kerr_sweep_mhz: Vec<f64>,
    pub quantum_grid: GridSpec,
    pub rbf_grid: GridSpec,
    pub references: [Reference; 2],
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            mesh_resolution: 25,
            training_sizes: vec![64],
            kerr_sweep_mhz: vec![0.0, 400.0],
            quantum_grid: GridSpec::default().with_extended_c(),
            rbf_grid: GridSpec::default(),
            references: default_references(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSpec {
    pub protocol: BenchProtocol,
    /// `(n, n_dim)` rows to time.
    pub rows: Vec<(usize, usize)>,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            protocol: BenchProtocol::default(),
            rows: vec![(2, 6), (2, 9), (2, 12), (3, 6), (3, 9), (3, 12), (4, 6), (4, 9)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub device: DeviceSpec,
    pub encoding: EncodingSpec,
    pub propagator: PropagatorConfig,
    pub entangle: EntangleSpec,
    pub experiment: ExperimentSpec,
    pub scaling: ScalingSpec,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks every block before any computation starts.
    pub fn validate(&self) -> Result<()> {
        self.propagator.validate()?;
        let enc = self.encoding.encoding();
        enc.validate()?;
        for &k in &self.experiment.kerr_sweep_mhz {
            self.device.device(k)?;
        }
        if self.device.mode_detunings_mhz.len() != self.device.couplings_mhz.len() {
            return Err(Error::Config("device.couplings_mhz must match device.mode_detunings_mhz".into()));
        }
        if self.experiment.references.iter().any(|r| r.sample.dim() != self.device.mode_detunings_mhz.len()) {
            return Err(Error::Config("reference points must have one feature per resonator".into()));
        }
        if self.experiment.references.iter().map(|r| r.label).collect::<Vec<_>>() != [1, 2] {
            return Err(Error::Config("references must carry labels 1 and 2".into()));
        }
        if self.experiment.mesh_resolution < 2 {
            return Err(Error::Config("experiment.mesh_resolution must be >= 2".into()));
        }
        if self.experiment.seeds.is_empty() {
            return Err(Error::Config("experiment.seeds is empty".into()));
        }
        let mesh = self.experiment.mesh_resolution.pow(self.device.mode_detunings_mhz.len() as u32);
        if let Some(s) = self.experiment.training_sizes.iter().find(|&&s| s < 2 || s > mesh) {
            return Err(Error::Config(format!("training size {s} outside 2..={mesh}")));
        }
        self.experiment.quantum_grid.validate()?;
        self.experiment.rbf_grid.validate()?;
        let e = &self.entangle;
        if !(e.step_us > 0.0) {
            return Err(Error::Config("entangle.step_us must be positive".into()));
        }
        for &n in &e.n_modes {
            for &k in &e.kerr_mhz {
                e.device(n, k)?;
            }
            if !(e.t_max_us >= e.drive(n)?.end()) {
                return Err(Error::Config("entangle.t_max_us precedes the end of the pulses".into()));
            }
        }
        self.scaling.protocol.validate()?;
        for &(n, d) in &self.scaling.rows {
            crate::bench::qubits_required(n, d)?;
        }
        Ok(())
    }

    /// Replaces the training seeds by `seed, seed + 1, ...`, keeping their
    /// count.
    pub fn override_seed(&mut self, seed: u64) {
        let n = self.experiment.seeds.len() as u64;
        self.experiment.seeds = (seed..seed + n).collect();
    }
}
