//! Truncated Fock-space algebra.
//!
//! A composite space is described by a [`ModeLayout`]: an ordered list of
//! subsystem truncation dimensions where site 0 is the qubit and sites
//! `1..=n` are resonator modes. Basis states are flattened row-major with
//! site 0 as the slowest-varying index, so the occupation tuple
//! `(q, m_1, ..., m_n)` maps to `q * stride_0 + m_1 * stride_1 + ...` with
//! `stride_j = prod(dims[j+1..])`. Every module in the crate inherits this
//! convention.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default qubit truncation.
pub const DEFAULT_QUBIT_DIM: usize = 4;
/// Default resonator truncation.
pub const DEFAULT_MODE_DIM: usize = 9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ModeLayout {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl ModeLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension("layout needs at least one subsystem".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(format!("subsystem dimension {d} < 2")));
        }
        let mut strides = vec![1; dims.len()];
        for j in (0..dims.len() - 1).rev() {
            strides[j] = strides[j + 1] * dims[j + 1];
        }
        let total = strides[0] * dims[0];
        Ok(Self { dims, strides, total })
    }

    /// Qubit of dimension `qubit_dim` followed by `n_modes` resonators of
    /// dimension `mode_dim`.
    pub fn qubit_with_modes(qubit_dim: usize, mode_dim: usize, n_modes: usize) -> Result<Self> {
        let mut dims = vec![qubit_dim];
        dims.extend(std::iter::repeat_n(mode_dim, n_modes));
        Self::new(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    /// Number of resonator modes (every site after the qubit).
    pub fn n_modes(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.dims.len() {
            return Err(Error::SiteOutOfRange { index: site, count: self.dims.len() });
        }
        Ok(())
    }

    pub fn flatten(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.dims.len() {
            return Err(Error::InvalidDimension(format!(
                "expected {} occupations, got {}",
                self.dims.len(),
                occupations.len()
            )));
        }
        let mut idx = 0;
        for (site, (&occ, &dim)) in occupations.iter().zip(&self.dims).enumerate() {
            if occ >= dim {
                return Err(Error::OccupationOutOfRange { site, occupation: occ, dim });
            }
            idx += occ * self.strides[site];
        }
        Ok(idx)
    }

    /// Occupation of `site` in basis state `index`.
    #[inline]
    pub fn occupation(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.dims[site]
    }

    pub fn unflatten(&self, index: usize) -> Vec<usize> {
        (0..self.dims.len()).map(|s| self.occupation(index, s)).collect()
    }

    /// Layout of the subsystems listed in `keep` (in ascending site order).
    pub fn sublayout(&self, keep: &[usize]) -> Result<Self> {
        let mut sites = keep.to_vec();
        sites.sort_unstable();
        sites.dedup();
        for &s in &sites {
            self.check_site(s)?;
        }
        Self::new(sites.iter().map(|&s| self.dims[s]).collect())
    }
}

impl TryFrom<Vec<usize>> for ModeLayout {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<ModeLayout> for Vec<usize> {
    fn from(layout: ModeLayout) -> Self {
        layout.dims
    }
}

impl fmt::Display for ModeLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join("x"))
    }
}

/// Read access to a Hermitian operator by its nonzero entries.
///
/// Implementors report the diagonal and each off-diagonal pair `(row, col)`
/// with `row < col` exactly once; the `(col, row)` entry is the conjugate.
pub trait HermitianEntries: Sync {
    fn dim(&self) -> usize;

    fn diagonal(&self, index: usize) -> f64;

    /// Visits every nonzero strictly upper entry `(row, col, value)`.
    fn for_each_upper(&self, f: &mut dyn FnMut(usize, usize, C64));

    /// `out = H psi`.
    fn apply(&self, psi: &[C64], out: &mut [C64]);
}

/// Dense complex square operator.
#[derive(Clone, PartialEq)]
pub struct Operator {
    mat: Mat<C64>,
    layout: Option<ModeLayout>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator").field("dim", &self.dim()).field("layout", &self.layout).finish()
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self { mat: Mat::zeros(dim, dim), layout: None }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: Mat::identity(dim, dim), layout: None }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self { mat: Mat::from_fn(dim, dim, f), layout: None }
    }

    pub fn from_mat(mat: Mat<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidDimension(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mat, layout: None })
    }

    pub fn with_layout(mut self, layout: ModeLayout) -> Self {
        debug_assert_eq!(layout.total_dim(), self.dim());
        self.layout = Some(layout);
        self
    }

    pub fn layout(&self) -> Option<&ModeLayout> {
        self.layout.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &Mat<C64> {
        &self.mat
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.mat[(row, col)] = value;
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint().to_owned(), layout: self.layout.clone() }
    }

    pub fn scale(&self, factor: C64) -> Self {
        let d = self.dim();
        Self { mat: Mat::from_fn(d, d, |i, j| self.mat[(i, j)] * factor), layout: self.layout.clone() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let d = self.dim();
        let mut m = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                m = m.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        m
    }

    /// Largest entrywise modulus of `H - H^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for j in 0..d {
            for i in 0..=j {
                m = m.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        let (a, b) = (self.dim(), other.dim());
        Operator::from_fn(a * b, |i, j| self.mat[(i / b, j / b)] * other.mat[(i % b, j % b)])
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        HermitianEntries::apply(self, psi, &mut out);
        out
    }
}

impl HermitianEntries for Operator {
    fn dim(&self) -> usize {
        self.mat.nrows()
    }

    fn diagonal(&self, index: usize) -> f64 {
        self.mat[(index, index)].re
    }

    fn for_each_upper(&self, f: &mut dyn FnMut(usize, usize, C64)) {
        let d = self.dim();
        for col in 0..d {
            for row in 0..col {
                let v = self.mat[(row, col)];
                if v != C64::new(0.0, 0.0) {
                    f(row, col, v);
                }
            }
        }
    }

    fn apply(&self, psi: &[C64], out: &mut [C64]) {
        let d = self.dim();
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for col in 0..d {
            let p = psi[col];
            if p == C64::new(0.0, 0.0) {
                continue;
            }
            for (row, o) in out.iter_mut().enumerate() {
                *o += self.mat[(row, col)] * p;
            }
        }
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Operator { mat: &self.mat + &rhs.mat, layout: self.layout.clone() }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Operator { mat: &self.mat - &rhs.mat, layout: self.layout.clone() }
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Operator { mat: &self.mat * &rhs.mat, layout: self.layout.clone() }
    }
}

/// Pure state on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    layout: ModeLayout,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(layout: ModeLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::InvalidDimension(format!(
                "state has {} amplitudes, layout {layout} needs {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.amplitudes.len(), other.amplitudes.len(), "dimension mismatch");
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// `1 - |<self|other>|^2` for normalized states.
    pub fn infidelity(&self, other: &StateVector) -> f64 {
        1.0 - self.inner(other).norm_sqr()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
        self
    }

    /// Tensor product `self ⊗ other`, with `self` on the slower sites.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let mut dims = self.layout.dims().to_vec();
        dims.extend_from_slice(other.layout.dims());
        let layout = ModeLayout::new(dims)?;
        let amps = self.amplitudes.iter().flat_map(|a| other.amplitudes.iter().map(move |b| a * b)).collect();
        StateVector::new(layout, amps)
    }
}

/// Truncated lowering operator with `M[n-1, n] = sqrt(n)`.
pub fn annihilation_op(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("annihilation operator needs dim >= 2, got {dim}")));
    }
    let mut op = Operator::zeros(dim);
    for n in 1..dim {
        op.set(n - 1, n, C64::new((n as f64).sqrt(), 0.0));
    }
    Ok(op)
}

pub fn creation_op(dim: usize) -> Result<Operator> {
    Ok(annihilation_op(dim)?.adjoint())
}

pub fn number_op(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("number operator needs dim >= 2, got {dim}")));
    }
    Ok(Operator::from_fn(dim, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) }))
}

/// Lifts `local` onto `site` of the composite space, identity elsewhere.
pub fn embed(local: &Operator, site: usize, layout: &ModeLayout) -> Result<Operator> {
    layout.check_site(site)?;
    let d = layout.dims()[site];
    if local.dim() != d {
        return Err(Error::InvalidDimension(format!(
            "local operator dim {} does not match site {site} dim {d}",
            local.dim()
        )));
    }
    let total = layout.total_dim();
    let stride = layout.strides()[site];
    let mut out = Operator::zeros(total);
    for col in 0..total {
        let lc = (col / stride) % d;
        let base = col - lc * stride;
        for lr in 0..d {
            let v = local.get(lr, lc);
            if v != C64::new(0.0, 0.0) {
                out.set(base + lr * stride, col, v);
            }
        }
    }
    Ok(out.with_layout(layout.clone()))
}

/// Fock basis state with the given per-site occupations.
pub fn basis_state(layout: &ModeLayout, occupations: &[usize]) -> Result<StateVector> {
    let idx = layout.flatten(occupations)?;
    let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
    amps[idx] = C64::new(1.0, 0.0);
    StateVector::new(layout.clone(), amps)
}

pub fn vacuum(layout: &ModeLayout) -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
    amps[0] = C64::new(1.0, 0.0);
    StateVector { layout: layout.clone(), amplitudes: amps }
}
