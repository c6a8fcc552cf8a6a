//! Lanczos approximation of `exp(-i H t) v` for operators too large to
//! diagonalize.
//!
//! Each substep builds an orthonormal Krylov basis `V_m` of `H` from the
//! current vector, tridiagonal `T_m = V_m^dagger H V_m`, and approximates
//! `exp(-i H tau) v = |v| V_m exp(-i T_m tau) e_1`. The substep `tau` is the
//! largest one whose a-posteriori error estimate
//! `beta_m |e_m^T exp(-i T_m tau) e_1|` stays inside its share of the
//! tolerance.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::HermitianEntries;
use crate::linalg::eigh_real;

const MAX_HALVINGS: usize = 60;

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Maximum Krylov subspace dimension per substep.
    pub max_dim: usize,
    /// Target 2-norm error of the full propagation.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { max_dim: 40, tol: 1e-10 }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(-i H t) psi` via restarted Lanczos substeps.
pub fn expm_action<H: HermitianEntries + ?Sized>(h: &H, psi: &[C64], t: f64, opts: KrylovOptions) -> Result<Vec<C64>> {
    let dim = h.dim();
    assert_eq!(psi.len(), dim, "dimension mismatch");
    let mut v = psi.to_vec();
    if t == 0.0 {
        return Ok(v);
    }
    let total = t.abs();
    let sign = t.signum();
    let mut done = 0.0;
    let mut w = vec![C64::new(0.0, 0.0); dim];
    while done < total {
        let beta0 = norm(&v);
        if beta0 == 0.0 {
            return Ok(v);
        }
        // Lanczos with full reorthogonalization.
        let m_max = opts.max_dim.min(dim).max(1);
        let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|x| x / beta0).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut breakdown = false;
        for j in 0..m_max {
            h.apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= qi * c;
                    }
                }
            }
            let b = norm(&w);
            beta.push(b);
            if b <= 1e-12 * a.abs().max(1.0) {
                breakdown = true;
                break;
            }
            if j + 1 < m_max {
                basis.push(w.iter().map(|x| x / b).collect());
            }
        }
        let m = alpha.len();
        let mut tri = Mat::<f64>::zeros(m, m);
        for i in 0..m {
            tri[(i, i)] = alpha[i];
            if i + 1 < m {
                tri[(i, i + 1)] = beta[i];
                tri[(i + 1, i)] = beta[i];
            }
        }
        let (evals, evecs) = eigh_real(&tri)?;
        let small_exp = |tau: f64| -> Vec<C64> {
            (0..m)
                .map(|i| (0..m).map(|k| C64::from_polar(evecs[(i, k)] * evecs[(0, k)], -sign * evals[k] * tau)).sum())
                .collect()
        };
        let remaining = total - done;
        let mut tau = remaining;
        let mut coeffs = small_exp(tau);
        if !breakdown {
            let mut halvings = 0;
            loop {
                let err = beta0 * beta[m - 1] * coeffs[m - 1].norm();
                // Below this the estimate is rounding noise from the small exponential.
                let noise = 16.0 * f64::EPSILON * m as f64 * beta0 * beta[m - 1];
                if err <= opts.tol * tau / total || err <= noise {
                    break;
                }
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::Numerical(format!(
                        "Krylov substep underflow after {done} of {total} (error estimate {err:e})"
                    )));
                }
                tau *= 0.5;
                coeffs = small_exp(tau);
            }
        }
        v.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (q, c) in basis.iter().zip(&coeffs) {
            let c = c * beta0;
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi += qi * c;
            }
        }
        done += tau;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::spectral::BlockSpectral;
    use crate::hilbert::{ModeLayout, Operator};
    use crate::model::{DeviceParams, StaticHamiltonian};

    #[test]
    fn zero_time_is_identity() {
        let h = Operator::identity(3);
        let psi = vec![C64::new(0.1, 0.2), C64::new(0.3, 0.4), C64::new(0.5, 0.6)];
        assert_eq!(expm_action(&h, &psi, 0.0, KrylovOptions::default()).unwrap(), psi);
    }

    #[test]
    fn agrees_with_spectral_on_device() {
        let layout = ModeLayout::new(vec![4, 6, 6]).unwrap();
        let device = DeviceParams::from_mhz(40.0, 10.0, &[1.0, -1.5], &[1.0, 1.0], layout).unwrap();
        let h = StaticHamiltonian::undriven(&device).unwrap();
        let d = h.diag().len();
        let psi: Vec<C64> = (0..d).map(|i| C64::new(((i * 7) % 11) as f64, ((i * 3) % 5) as f64 - 2.0)).collect();
        let n = norm(&psi);
        let psi: Vec<C64> = psi.iter().map(|x| x / n).collect();
        let spec = BlockSpectral::new(&h).unwrap();
        for &t in &[0.01, 0.37, 2.0, -1.1] {
            let a = spec.evolve(&psi, t);
            let b = expm_action(&h, &psi, t, KrylovOptions { max_dim: 30, tol: 1e-11 }).unwrap();
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            assert!(diff < 1e-9, "t={t} diff={diff}");
        }
    }

    #[test]
    fn small_invariant_subspace_breakdown() {
        // psi is an eigenvector: Lanczos stops after one vector.
        let h = Operator::from_fn(3, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) });
        let psi = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let out = expm_action(&h, &psi, 2.0, KrylovOptions::default()).unwrap();
        assert!((out[1] - C64::from_polar(1.0, -2.0)).norm() < 1e-13);
    }
}
