//! Reduced states, fidelity and entanglement measures.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{ModeLayout, StateVector};
use crate::linalg::{eigh, eigvalsh, hermitian_part};

/// Eigenvalues below this are treated as zero inside matrix square roots.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    layout: ModeLayout,
    mat: Mat<C64>,
}

impl DensityMatrix {
    pub fn new(layout: ModeLayout, mat: Mat<C64>) -> Result<Self> {
        let d = layout.total_dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::InvalidDimension(format!(
                "density matrix is {}x{}, layout {layout} needs {d}x{d}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { layout, mat })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let a = state.amplitudes();
        let d = a.len();
        Self { layout: state.layout().clone(), mat: Mat::from_fn(d, d, |i, j| a[i] * a[j].conj()) }
    }

    /// `W W^dagger` for a factor `W` with one row per basis state.
    pub fn from_factor(layout: ModeLayout, factor: &Mat<C64>) -> Result<Self> {
        Self::new(layout, factor * factor.adjoint())
    }

    /// Maximally mixed state on `layout`.
    pub fn maximally_mixed(layout: ModeLayout) -> Self {
        let d = layout.total_dim();
        let p = 1.0 / d as f64;
        let mat = Mat::from_fn(d, d, |i, j| if i == j { C64::new(p, 0.0) } else { C64::new(0.0, 0.0) });
        Self { layout, mat }
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn mat(&self) -> &Mat<C64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

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

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigvalsh(&hermitian_part(&self.mat))
    }

    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut p = 0.0;
        for j in 0..d {
            for i in 0..d {
                p += self.mat[(i, j)].norm_sqr();
            }
        }
        p
    }

    /// Checks Hermiticity, unit trace and positivity within `tol`.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::Numerical(format!("density matrix not Hermitian (error {herm:e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Numerical(format!("density matrix trace {tr} != 1")));
        }
        let min = self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::Numerical(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, unitary: &Mat<C64>) -> Self {
        Self { layout: self.layout.clone(), mat: unitary * &self.mat * unitary.adjoint() }
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                m = m.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        m
    }
}

/// Either a pure or a mixed state, for the measures that accept both.
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(s: &'a StateVector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    fn layout(&self) -> &ModeLayout {
        match self {
            StateRef::Pure(s) => s.layout(),
            StateRef::Mixed(s) => s.layout(),
        }
    }
}

/// Splits each composite index into (kept index, traced index).
fn split_indices(layout: &ModeLayout, keep: &[usize]) -> Result<(ModeLayout, Vec<(usize, usize)>, usize)> {
    if keep.is_empty() {
        return Err(Error::InvalidParameter("partial trace needs at least one kept subsystem".into()));
    }
    let kept_layout = layout.sublayout(keep)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..layout.n_sites()).filter(|s| !kept.contains(s)).collect();
    let traced_dim: usize = traced.iter().map(|&s| layout.dims()[s]).product();
    let split = (0..layout.total_dim())
        .map(|idx| {
            let k = kept.iter().fold(0, |acc, &s| acc * layout.dims()[s] + layout.occupation(idx, s));
            let t = traced.iter().fold(0, |acc, &s| acc * layout.dims()[s] + layout.occupation(idx, s));
            (k, t)
        })
        .collect();
    Ok((kept_layout, split, traced_dim))
}

/// Reduced state on the subsystems in `keep`, ordered by ascending site.
pub fn partial_trace<'a>(state: impl Into<StateRef<'a>>, keep: &[usize]) -> Result<DensityMatrix> {
    let state = state.into();
    let (kept_layout, split, traced_dim) = split_indices(state.layout(), keep)?;
    let kd = kept_layout.total_dim();
    let mat = match state {
        StateRef::Pure(psi) => {
            // rho = M M^dagger with M[kept, traced] = psi
            let mut m = Mat::<C64>::zeros(kd, traced_dim);
            for (&(k, t), &a) in split.iter().zip(psi.amplitudes()) {
                m[(k, t)] = a;
            }
            &m * m.adjoint()
        }
        StateRef::Mixed(rho) => {
            let mut out = Mat::<C64>::zeros(kd, kd);
            let by_traced = {
                let mut groups = vec![Vec::new(); traced_dim];
                for (idx, &(k, t)) in split.iter().enumerate() {
                    groups[t].push((idx, k));
                }
                groups
            };
            for group in &by_traced {
                for &(i, ki) in group {
                    for &(j, kj) in group {
                        out[(ki, kj)] += rho.mat()[(i, j)];
                    }
                }
            }
            out
        }
    };
    DensityMatrix::new(kept_layout, mat)
}

/// Precomputed support of a state for repeated fidelity evaluations.
///
/// With `rho = V L V^dagger` restricted to eigenvalues above the floor and
/// `W = V sqrt(L)`, `sqrt(rho) = W V^dagger` and the fidelity
/// `|| sqrt(rho) sqrt(sigma) ||_1` is the sum of the singular values of the
/// small matrix `W_rho^dagger W_sigma`.
#[derive(Clone, Debug)]
pub struct FidelityReference {
    dim: usize,
    support: Mat<C64>,
}

impl FidelityReference {
    pub fn new(rho: &DensityMatrix) -> Result<Self> {
        let (vals, vecs) = eigh(&hermitian_part(rho.mat()))?;
        let keep: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > EIGEN_FLOOR).collect();
        let d = rho.dim();
        let support = Mat::from_fn(d, keep.len(), |i, c| vecs[(i, keep[c])] * vals[keep[c]].sqrt());
        Ok(Self { dim: d, support })
    }

    /// Reference from any factor with `rho = W W^dagger`. The singular
    /// values of `W_rho^dagger W_sigma` do not depend on the choice of
    /// factors, so no decomposition is needed.
    pub fn from_factor(factor: Mat<C64>) -> Self {
        Self { dim: factor.nrows(), support: factor }
    }

    /// The factor `W` with `rho = W W^dagger` (eigenvalues below the floor
    /// dropped when built from a density matrix).
    pub fn factor(&self) -> &Mat<C64> {
        &self.support
    }

    /// Number of columns of the factor; for a density matrix, the number of
    /// eigenvalues above the floor.
    pub fn rank(&self) -> usize {
        self.support.ncols()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fidelity(&self, sigma: &DensityMatrix) -> Result<f64> {
        if sigma.dim() != self.dim {
            return Err(Error::InvalidDimension(format!(
                "fidelity between dimensions {} and {}",
                self.dim,
                sigma.dim()
            )));
        }
        self.fidelity_with(&FidelityReference::new(sigma)?)
    }

    /// Fidelity between two prepared states.
    pub fn fidelity_with(&self, other: &FidelityReference) -> Result<f64> {
        if other.dim != self.dim {
            return Err(Error::InvalidDimension(format!("fidelity between dimensions {} and {}", self.dim, other.dim)));
        }
        if self.rank() == 0 || other.rank() == 0 {
            return Ok(0.0);
        }
        let overlap = self.support.adjoint() * &other.support;
        let sv = overlap.singular_values().map_err(|e| Error::Numerical(format!("singular values failed: {e:?}")))?;
        Ok(sv.iter().sum::<f64>().clamp(0.0, 1.0))
    }
}

/// Factor `W` of the state of every site but the first, `Tr_0 |psi><psi| =
/// W W^dagger`, with one column per level of site 0.
pub fn traced_first_factor(state: &StateVector) -> Result<Mat<C64>> {
    let layout = state.layout();
    if layout.n_sites() < 2 {
        return Err(Error::InvalidParameter("tracing out the only subsystem".into()));
    }
    let d0 = layout.dims()[0];
    let rest = layout.total_dim() / d0;
    let a = state.amplitudes();
    Ok(Mat::from_fn(rest, d0, |m, q| a[q * rest + m]))
}

/// Uhlmann fidelity `Tr sqrt(sqrt(rho) sigma sqrt(rho))`, clipped to [0, 1].
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::InvalidDimension(format!("fidelity between dimensions {} and {}", rho.dim(), sigma.dim())));
    }
    FidelityReference::new(rho)?.fidelity(sigma)
}

fn check_partition(layout: &ModeLayout, partition: &[usize]) -> Result<Vec<usize>> {
    let mut p = partition.to_vec();
    p.sort_unstable();
    p.dedup();
    if layout.n_sites() < 2 {
        return Err(Error::InvalidParameter("bipartition needs at least two subsystems".into()));
    }
    if p.is_empty() || p.len() >= layout.n_sites() {
        return Err(Error::InvalidParameter(format!("partition {partition:?} is not a proper nonempty subset")));
    }
    for &s in &p {
        layout.check_site(s)?;
    }
    Ok(p)
}

/// Transposes the subsystems in `partition`.
pub fn partial_transpose(rho: &DensityMatrix, partition: &[usize]) -> Result<DensityMatrix> {
    let layout = rho.layout();
    let sites = check_partition(layout, partition)?;
    let d = rho.dim();
    // Part of each index that lives on the transposed sites.
    let part: Vec<usize> =
        (0..d).map(|idx| sites.iter().map(|&s| layout.occupation(idx, s) * layout.strides()[s]).sum()).collect();
    let mat = Mat::from_fn(d, d, |i, j| {
        let (pi, pj) = (part[i], part[j]);
        rho.mat()[(i - pi + pj, j - pj + pi)]
    });
    DensityMatrix::new(layout.clone(), mat)
}

/// `log2 || rho^{T_partition} ||_1`.
pub fn log_negativity(rho: &DensityMatrix, partition: &[usize]) -> Result<f64> {
    let pt = partial_transpose(rho, partition)?;
    let vals = eigvalsh(&hermitian_part(pt.mat()))?;
    let trace_norm: f64 = vals.iter().map(|v| v.abs()).sum();
    Ok(trace_norm.log2())
}

/// `<n>` at `site`.
pub fn mean_occupation<'a>(state: impl Into<StateRef<'a>>, site: usize) -> Result<f64> {
    let state = state.into();
    let layout = state.layout();
    layout.check_site(site)?;
    let n = match state {
        StateRef::Pure(psi) => {
            psi.amplitudes().iter().enumerate().map(|(i, a)| a.norm_sqr() * layout.occupation(i, site) as f64).sum()
        }
        StateRef::Mixed(rho) => (0..rho.dim()).map(|i| rho.mat()[(i, i)].re * layout.occupation(i, site) as f64).sum(),
    };
    Ok(n)
}
