//! Device parameterization and Hamiltonian assembly.
//!
//! Units: time in microseconds, frequencies as angular frequencies in
//! rad/us with hbar = 1. Configs quote ordinary frequencies `f` in MHz; the
//! conversion is `omega = 2 pi f` and happens once, in [`mhz`].
//!
//! The device Hamiltonian in the rotating frame is
//!
//! ```text
//! H(t) = H_lin + H_kerr + H_drive(t)
//! H_lin   = -dq a^+a + sum_i [ -d_i b_i^+ b_i + g_i (a^+ b_i + b_i^+ a) ]
//! H_kerr  = -K a^+a^+ a a
//! H_drive = sum_j W_j(t) (a^+ e^{i delta_j t} + a e^{-i delta_j t})
//! ```
//!
//! Two representations are provided. The dense builders ([`h_lin`],
//! [`h_kerr`], [`h_drive`], [`h_total`]) assemble full [`Operator`]s from
//! embedded ladder operators and are the reference route. [`StaticHamiltonian`]
//! and [`DeviceHamiltonian`] store only the nonzero structure and are what the
//! propagators use; they are checked against the dense route in tests.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, embed, HermitianEntries, ModeLayout, Operator};

/// Converts an ordinary frequency in MHz to rad/us.
#[inline]
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f
}

/// Converts rad/us back to MHz.
#[inline]
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub kerr: f64,
    pub delta_q: f64,
    pub deltas: Vec<f64>,
    pub couplings: Vec<f64>,
    pub layout: ModeLayout,
}

impl DeviceParams {
    pub fn new(kerr: f64, delta_q: f64, deltas: Vec<f64>, couplings: Vec<f64>, layout: ModeLayout) -> Result<Self> {
        let device = Self { kerr, delta_q, deltas, couplings, layout };
        device.validate()?;
        Ok(device)
    }

    /// Builds a device from ordinary frequencies in MHz.
    pub fn from_mhz(
        kerr_mhz: f64,
        delta_q_mhz: f64,
        deltas_mhz: &[f64],
        couplings_mhz: &[f64],
        layout: ModeLayout,
    ) -> Result<Self> {
        Self::new(
            mhz(kerr_mhz),
            mhz(delta_q_mhz),
            deltas_mhz.iter().copied().map(mhz).collect(),
            couplings_mhz.iter().copied().map(mhz).collect(),
            layout,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layout.n_modes();
        if self.deltas.len() != n || self.couplings.len() != n {
            return Err(Error::InvalidParameter(format!(
                "layout {} has {n} resonators but {} detunings and {} couplings were given",
                self.layout,
                self.deltas.len(),
                self.couplings.len()
            )));
        }
        if !(self.kerr >= 0.0) {
            return Err(Error::InvalidParameter(format!("Kerr strength must be >= 0, got {}", self.kerr)));
        }
        let all = [self.kerr, self.delta_q]
            .into_iter()
            .chain(self.deltas.iter().copied())
            .chain(self.couplings.iter().copied());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("device parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.layout.n_modes()
    }

    pub fn with_kerr(&self, kerr: f64) -> Result<Self> {
        Self::new(kerr, self.delta_q, self.deltas.clone(), self.couplings.clone(), self.layout.clone())
    }

    /// Entanglement-demonstration device with `n` (1..=3) resonators:
    /// dq/2pi = 100 MHz, g/2pi = 8 MHz, d/2pi = (10, -10, -30) MHz.
    pub fn entanglement_demo(kerr_mhz: f64, n: usize, mode_dim: usize) -> Result<Self> {
        const DELTAS: [f64; 3] = [10.0, -10.0, -30.0];
        if n == 0 || n > DELTAS.len() {
            return Err(Error::InvalidParameter(format!("demo device supports 1..=3 resonators, got {n}")));
        }
        let layout = ModeLayout::qubit_with_modes(4, mode_dim, n)?;
        Self::from_mhz(kerr_mhz, 100.0, &DELTAS[..n], &vec![8.0; n], layout)
    }

    /// Classification device: dq/2pi = 70 MHz, g/2pi = 10 MHz and detunings
    /// (10, -15) MHz. Extra modes continue the evenly spaced 25 MHz comb,
    /// alternating sides of the frame: 35, -40, 60, -65, ...
    pub fn classifier(kerr_mhz: f64, n: usize, mode_dim: usize) -> Result<Self> {
        let layout = ModeLayout::qubit_with_modes(4, mode_dim, n)?;
        Self::from_mhz(kerr_mhz, 70.0, &classifier_detunings_mhz(n), &vec![10.0; n], layout)
    }
}

/// Resonator detunings (MHz) for the classification device.
pub fn classifier_detunings_mhz(n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let d = match i {
            0 => 10.0,
            1 => -15.0,
            _ => {
                let prev = out[i - 2];
                prev + prev.signum() * 25.0
            }
        };
        out.push(d);
    }
    out
}

fn default_cutoff() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub drive_detuning: f64,
    pub center: f64,
    pub width: f64,
    /// Envelope is exactly zero for `|t - center| >= cutoff_radius`.
    pub cutoff_radius: f64,
}

impl GaussianPulse {
    /// Pulse truncated at three standard deviations.
    pub fn new(amplitude: f64, drive_detuning: f64, center: f64, width: f64) -> Result<Self> {
        Self::with_cutoff(amplitude, drive_detuning, center, width, default_cutoff() * width)
    }

    pub fn with_cutoff(
        amplitude: f64,
        drive_detuning: f64,
        center: f64,
        width: f64,
        cutoff_radius: f64,
    ) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter(format!("pulse width must be > 0, got {width}")));
        }
        if !(cutoff_radius > 0.0) {
            return Err(Error::InvalidParameter(format!("pulse cutoff must be > 0, got {cutoff_radius}")));
        }
        if ![amplitude, drive_detuning, center].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("pulse parameters must be finite".into()));
        }
        Ok(Self { amplitude, drive_detuning, center, width, cutoff_radius })
    }

    pub fn support_start(&self) -> f64 {
        self.center - self.cutoff_radius
    }

    pub fn support_end(&self) -> f64 {
        self.center + self.cutoff_radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    pub pulses: Vec<GaussianPulse>,
    /// Snapshot times. Order is preserved (feature order for encoded
    /// samples); duplicates are allowed.
    pub measure_times: Vec<f64>,
}

impl DriveSchedule {
    pub fn new(pulses: Vec<GaussianPulse>, measure_times: Vec<f64>) -> Result<Self> {
        let schedule = Self { pulses, measure_times };
        schedule.validate()?;
        Ok(schedule)
    }

    /// End of the latest pulse support, or 0 without pulses.
    pub fn pulse_end(&self) -> f64 {
        self.pulses.iter().map(GaussianPulse::support_end).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let end = self.pulse_end();
        // Rounding slack; the envelope vanishes at the support edge anyway.
        let slack = 1e-12 * end.max(1.0);
        for &t in &self.measure_times {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidParameter(format!("measurement time must be positive, got {t}")));
            }
            if t < end - slack {
                return Err(Error::InvalidParameter(format!(
                    "measurement time {t} us precedes the end of the pulses at {end} us"
                )));
            }
        }
        if let Some(p) = self.pulses.iter().find(|p| p.support_start() < -slack) {
            return Err(Error::InvalidParameter(format!(
                "pulse centered at {} us starts before t = 0 (support start {})",
                p.center,
                p.support_start()
            )));
        }
        Ok(())
    }

    /// Complex drive coefficient `c(t) = sum_j W_j(t) e^{i delta_j t}`, so
    /// that `H_drive(t) = c a^+ + c* a`.
    pub fn drive_coefficient(&self, t: f64) -> C64 {
        self.pulses
            .iter()
            .map(|p| {
                let w = pulse_envelope(p, t);
                if w == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::from_polar(w, p.drive_detuning * t)
                }
            })
            .sum()
    }
}

/// Gaussian envelope truncated to exactly zero outside the cutoff radius.
pub fn pulse_envelope(pulse: &GaussianPulse, t: f64) -> f64 {
    let dt = t - pulse.center;
    if dt.abs() >= pulse.cutoff_radius {
        return 0.0;
    }
    pulse.amplitude * (-dt * dt / (2.0 * pulse.width * pulse.width)).exp()
}

fn ladder(layout: &ModeLayout, site: usize) -> Result<Operator> {
    embed(&annihilation_op(layout.dims()[site])?, site, layout)
}

pub fn h_lin(device: &DeviceParams) -> Result<Operator> {
    device.validate()?;
    let layout = &device.layout;
    let a = ladder(layout, 0)?;
    let ad = a.adjoint();
    let mut h = (&ad * &a).scale(C64::new(-device.delta_q, 0.0));
    for i in 0..device.n_modes() {
        let b = ladder(layout, i + 1)?;
        let bd = b.adjoint();
        let number = (&bd * &b).scale(C64::new(-device.deltas[i], 0.0));
        let hop = &(&ad * &b) + &(&bd * &a);
        h = &h + &number;
        h = &h + &hop.scale(C64::new(device.couplings[i], 0.0));
    }
    Ok(h.with_layout(layout.clone()))
}

pub fn h_kerr(device: &DeviceParams) -> Result<Operator> {
    device.validate()?;
    let layout = &device.layout;
    let a = ladder(layout, 0)?;
    let ad = a.adjoint();
    let h = (&(&ad * &ad) * &(&a * &a)).scale(C64::new(-device.kerr, 0.0));
    Ok(h.with_layout(layout.clone()))
}

pub fn h_drive(schedule: &DriveSchedule, t: f64, layout: &ModeLayout) -> Result<Operator> {
    let a = ladder(layout, 0)?;
    let c = schedule.drive_coefficient(t);
    let h = &a.adjoint().scale(c) + &a.scale(c.conj());
    Ok(h.with_layout(layout.clone()))
}

pub fn h_total(device: &DeviceParams, schedule: &DriveSchedule, t: f64) -> Result<Operator> {
    let h = &h_lin(device)? + &h_kerr(device)?;
    Ok(&h + &h_drive(schedule, t, &device.layout)?)
}

/// Real symmetric time-independent Hamiltonian stored by its nonzero
/// structure: a diagonal plus symmetric off-diagonal pairs.
#[derive(Clone, Debug)]
pub struct StaticHamiltonian {
    layout: ModeLayout,
    diag: Vec<f64>,
    /// `(row, col, value)` with `row < col`; `H[row, col] = H[col, row] = value`.
    pairs: Vec<(usize, usize, f64)>,
}

impl StaticHamiltonian {
    /// `H_lin` alone.
    pub fn linear(device: &DeviceParams) -> Result<Self> {
        Self::build(device, false)
    }

    /// `H_lin + H_kerr`, the Hamiltonian once every pulse has ended.
    pub fn undriven(device: &DeviceParams) -> Result<Self> {
        Self::build(device, true)
    }

    fn build(device: &DeviceParams, with_kerr: bool) -> Result<Self> {
        device.validate()?;
        let layout = device.layout.clone();
        let dims = layout.dims().to_vec();
        let strides = layout.strides().to_vec();
        let total = layout.total_dim();
        let mut diag = vec![0.0; total];
        let mut pairs = Vec::new();
        for (idx, d) in diag.iter_mut().enumerate() {
            let q = layout.occupation(idx, 0);
            let qf = q as f64;
            let mut e = -device.delta_q * qf;
            if with_kerr {
                e -= device.kerr * qf * (qf - 1.0);
            }
            for i in 0..device.n_modes() {
                let m = layout.occupation(idx, i + 1);
                e -= device.deltas[i] * m as f64;
                // a^+ b_i : |q, m> -> sqrt(q+1) sqrt(m) |q+1, m-1>
                if q + 1 < dims[0] && m > 0 && device.couplings[i] != 0.0 {
                    let target = idx + strides[0] - strides[i + 1];
                    let v = device.couplings[i] * ((q + 1) as f64).sqrt() * (m as f64).sqrt();
                    pairs.push((idx.min(target), idx.max(target), v));
                }
            }
            *d = e;
        }
        Ok(Self { layout, diag, pairs })
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    /// Dense copy, for tests and small systems.
    pub fn to_operator(&self) -> Operator {
        let d = self.diag.len();
        let mut op = Operator::zeros(d);
        for (i, &v) in self.diag.iter().enumerate() {
            op.set(i, i, C64::new(v, 0.0));
        }
        for &(r, c, v) in &self.pairs {
            op.set(r, c, C64::new(v, 0.0));
            op.set(c, r, C64::new(v, 0.0));
        }
        op.with_layout(self.layout.clone())
    }

    /// Expectation value `<psi|H|psi>`.
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let mut e: f64 = self.diag.iter().zip(psi).map(|(d, p)| d * p.norm_sqr()).sum();
        for &(r, c, v) in &self.pairs {
            e += 2.0 * v * (psi[r].conj() * psi[c]).re;
        }
        e
    }
}

impl HermitianEntries for StaticHamiltonian {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn diagonal(&self, index: usize) -> f64 {
        self.diag[index]
    }

    fn for_each_upper(&self, f: &mut dyn FnMut(usize, usize, C64)) {
        for &(r, c, v) in &self.pairs {
            f(r, c, C64::new(v, 0.0));
        }
    }

    fn apply(&self, psi: &[C64], out: &mut [C64]) {
        for ((o, &d), &p) in out.iter_mut().zip(&self.diag).zip(psi) {
            *o = p * d;
        }
        for &(r, c, v) in &self.pairs {
            out[r] += psi[c] * v;
            out[c] += psi[r] * v;
        }
    }
}

/// Full time-dependent device Hamiltonian in structured form.
#[derive(Clone, Debug)]
pub struct DeviceHamiltonian {
    undriven: StaticHamiltonian,
    /// `(from, to, sqrt(q+1))` for the qubit raising operator.
    raise: Vec<(usize, usize, f64)>,
    schedule: DriveSchedule,
}

impl DeviceHamiltonian {
    pub fn new(device: &DeviceParams, schedule: &DriveSchedule) -> Result<Self> {
        Ok(Self::with_undriven(StaticHamiltonian::undriven(device)?, schedule))
    }

    pub fn with_undriven(undriven: StaticHamiltonian, schedule: &DriveSchedule) -> Self {
        let layout = undriven.layout();
        let s0 = layout.strides()[0];
        let d0 = layout.dims()[0];
        let raise = (0..layout.total_dim())
            .filter_map(|idx| {
                let q = layout.occupation(idx, 0);
                (q + 1 < d0).then(|| (idx, idx + s0, ((q + 1) as f64).sqrt()))
            })
            .collect();
        Self { undriven, raise, schedule: schedule.clone() }
    }

    pub fn undriven(&self) -> &StaticHamiltonian {
        &self.undriven
    }

    pub fn schedule(&self) -> &DriveSchedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.undriven.diag.len()
    }

    /// `out = H(t) psi`.
    pub fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        self.undriven.apply(psi, out);
        let c = self.schedule.drive_coefficient(t);
        if c != C64::new(0.0, 0.0) {
            let cc = c.conj();
            for &(from, to, v) in &self.raise {
                out[to] += c * v * psi[from];
                out[from] += cc * v * psi[to];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::basis_state;
    use faer::Side;

    fn toy_device(kerr: f64) -> DeviceParams {
        let layout = ModeLayout::new(vec![4, 3, 3]).unwrap();
        DeviceParams::new(kerr, 1.3, vec![0.4, -0.7], vec![0.25, 0.31], layout).unwrap()
    }

    fn expectation(op: &Operator, psi: &[C64]) -> C64 {
        let hp = op.apply(psi);
        psi.iter().zip(&hp).map(|(a, b)| a.conj() * b).sum()
    }

    #[test]
    fn unit_conversion_round_trip() {
        assert!((mhz(1.0) - 2.0 * PI).abs() < 1e-15);
        assert!((to_mhz(mhz(400.0)) - 400.0).abs() < 1e-12);
    }

    #[test]
    fn device_validation() {
        let layout = ModeLayout::new(vec![4, 3]).unwrap();
        assert!(DeviceParams::new(1.0, 0.0, vec![0.0, 1.0], vec![1.0], layout.clone()).is_err());
        assert!(DeviceParams::new(-1.0, 0.0, vec![0.0], vec![1.0], layout.clone()).is_err());
        assert!(DeviceParams::new(1.0, 0.0, vec![0.0], vec![1.0], layout).is_ok());
        assert!(DeviceParams::entanglement_demo(400.0, 4, 9).is_err());
    }

    #[test]
    fn classifier_detuning_pattern() {
        assert_eq!(classifier_detunings_mhz(2), vec![10.0, -15.0]);
        assert_eq!(classifier_detunings_mhz(4), vec![10.0, -15.0, 35.0, -40.0]);
    }

    #[test]
    fn h_lin_diagonal_case() {
        let layout = ModeLayout::new(vec![2, 3, 3]).unwrap();
        let device = DeviceParams::new(0.0, 0.9, vec![0.4, -0.7], vec![0.0, 0.0], layout.clone()).unwrap();
        let h = h_lin(&device).unwrap();
        for (site, delta) in [(1, 0.4), (2, -0.7)] {
            let mut occ = vec![0, 0, 0];
            occ[site] = 1;
            let psi = basis_state(&layout, &occ).unwrap();
            let e = expectation(&h, psi.amplitudes());
            assert!((e.re + delta).abs() < 1e-14);
            let hp = h.apply(psi.amplitudes());
            let residual: f64 = hp.iter().zip(psi.amplitudes()).map(|(a, b)| (a + b * delta).norm()).sum();
            assert!(residual < 1e-14, "not an eigenvector");
        }
        assert_eq!(h.hermiticity_error(), 0.0);
    }

    #[test]
    fn jaynes_cummings_single_excitation_block() {
        let layout = ModeLayout::new(vec![2, 2]).unwrap();
        let g = 0.8;
        let device = DeviceParams::new(0.0, 0.0, vec![0.0], vec![g], layout).unwrap();
        let h = h_lin(&device).unwrap();
        let eig = h.mat().self_adjoint_eigenvalues(Side::Lower).unwrap();
        let want = [-g, 0.0, 0.0, g];
        for (e, w) in eig.iter().zip(want) {
            assert!((e - w).abs() < 1e-12, "{eig:?}");
        }
    }

    #[test]
    fn kerr_diagonal_values() {
        let kerr = 2.5;
        let device = toy_device(kerr);
        let h = h_kerr(&device).unwrap();
        for (q, want) in [(0, 0.0), (1, 0.0), (2, -2.0 * kerr), (3, -6.0 * kerr)] {
            let idx = device.layout.flatten(&[q, 1, 2]).unwrap();
            assert!((h.get(idx, idx).re - want).abs() < 1e-12);
        }
        let d = h.dim();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    assert_eq!(h.get(i, j), C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn envelope_shape() {
        let p = GaussianPulse::new(2.0, 0.0, 0.24, 0.08).unwrap();
        assert_eq!(pulse_envelope(&p, 0.24), 2.0);
        assert_eq!(pulse_envelope(&p, 0.24 + 3.0 * 0.08), 0.0);
        assert_eq!(pulse_envelope(&p, 0.24 - 3.0 * 0.08), 0.0);
        let want = 2.0 * (-0.5f64).exp();
        assert!((pulse_envelope(&p, 0.32) - want).abs() < 1e-14);
        assert!((want / 2.0 - 0.60653).abs() < 1e-5);
        assert!(GaussianPulse::new(1.0, 0.0, 0.2, 0.0).is_err());
    }

    #[test]
    fn drive_term() {
        let layout = ModeLayout::new(vec![3, 2]).unwrap();
        let p = GaussianPulse::new(1.7, 0.0, 0.3, 0.1).unwrap();
        let sched = DriveSchedule::new(vec![p], vec![]).unwrap();
        assert_eq!(h_drive(&sched, 5.0, &layout).unwrap().max_abs_diff(&Operator::zeros(6)), 0.0);
        let a = ladder(&layout, 0).unwrap();
        let want = (&a.adjoint() + &a).scale(C64::new(1.7, 0.0));
        assert!(h_drive(&sched, 0.3, &layout).unwrap().max_abs_diff(&want) < 1e-15);

        let sched = DriveSchedule::new(
            vec![GaussianPulse::new(1.2, 3.0, 0.3, 0.1).unwrap(), GaussianPulse::new(0.7, -2.0, 0.35, 0.1).unwrap()],
            vec![],
        )
        .unwrap();
        for k in 0..100 {
            let t = 0.6 * k as f64 / 99.0;
            assert!(h_drive(&sched, t, &layout).unwrap().hermiticity_error() <= 1e-14);
        }
    }

    #[test]
    fn total_hamiltonian_limits() {
        let device = toy_device(0.0);
        let empty = DriveSchedule::new(vec![], vec![]).unwrap();
        let h = h_total(&device, &empty, 0.1).unwrap();
        assert_eq!(h.max_abs_diff(&h_lin(&device).unwrap()), 0.0);

        let device = toy_device(1.1);
        let sched = DriveSchedule::new(vec![GaussianPulse::new(0.5, 0.4, 0.3, 0.1).unwrap()], vec![1.0]).unwrap();
        let late = h_total(&device, &sched, 0.61).unwrap();
        let static_part = &h_lin(&device).unwrap() + &h_kerr(&device).unwrap();
        assert_eq!(late.max_abs_diff(&static_part), 0.0);
        let eig = h_total(&device, &sched, 0.3).unwrap();
        assert!(eig.is_hermitian(1e-14));
    }

    #[test]
    fn schedule_validation() {
        let p = GaussianPulse::new(1.0, 0.0, 0.24, 0.08).unwrap();
        assert!(DriveSchedule::new(vec![p.clone()], vec![0.3]).is_err());
        assert!(DriveSchedule::new(vec![p.clone()], vec![0.5]).is_ok());
        assert!(DriveSchedule::new(vec![], vec![0.0]).is_err());
        let early = GaussianPulse::new(1.0, 0.0, 0.1, 0.08).unwrap();
        assert!(DriveSchedule::new(vec![early], vec![1.0]).is_err());
    }

    #[test]
    fn structured_matches_dense() {
        let device = toy_device(0.9);
        let sched = DriveSchedule::new(
            vec![GaussianPulse::new(0.6, 0.4, 0.3, 0.1).unwrap(), GaussianPulse::new(0.3, -0.7, 0.3, 0.1).unwrap()],
            vec![],
        )
        .unwrap();
        let structured = DeviceHamiltonian::new(&device, &sched).unwrap();
        let lin = StaticHamiltonian::linear(&device).unwrap();
        assert!(lin.to_operator().max_abs_diff(&h_lin(&device).unwrap()) < 1e-12);
        let d = structured.dim();
        let psi: Vec<C64> = (0..d).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        for &t in &[0.05, 0.27, 0.31, 0.9] {
            let dense = h_total(&device, &sched, t).unwrap().apply(&psi);
            let mut out = vec![C64::new(0.0, 0.0); d];
            structured.apply(t, &psi, &mut out);
            let err = dense.iter().zip(&out).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "t={t} err={err}");
        }
        let e_dense = expectation(&(&h_lin(&device).unwrap() + &h_kerr(&device).unwrap()), &psi).re;
        assert!((structured.undriven().expectation(&psi) - e_dense).abs() < 1e-10);
    }
}
