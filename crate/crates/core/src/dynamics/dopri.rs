//! Dormand-Prince 5(4) with embedded error estimate and step-size control.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MAX_STEPS: usize = 50_000_000;

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` in place.
///
/// `f(t, y, dy)` must overwrite `dy`.
pub fn integrate<F>(mut f: F, y: &mut [C64], t0: f64, t1: f64, control: StepControl) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len();
    let mut stats = IntegrationStats::default();
    if t1 <= t0 {
        return Ok(stats);
    }
    let zero = C64::new(0.0, 0.0);
    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![zero; n]);
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];

    let mut t = t0;
    let mut h = control.initial_step.min(t1 - t0);
    f(t, y, &mut k[0]);
    stats.rhs_evals += 1;

    while t < t1 {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::IntegrationFailure { time: t, reason: "step budget exhausted".into() });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure { time: t, reason: format!("step size underflow (h = {h:e})") });
        }

        let (head, tail) = k.split_at_mut(1);
        let k1 = &head[0];
        let [k2, k3, k4, k5, k6, k7] = tail else { unreachable!() };

        combine(&mut stage, y, h, &[(A21, k1)]);
        f(t + C2 * h, &stage, k2);
        combine(&mut stage, y, h, &[(A31, k1), (A32, k2)]);
        f(t + C3 * h, &stage, k3);
        combine(&mut stage, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
        f(t + C4 * h, &stage, k4);
        combine(&mut stage, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        f(t + C5 * h, &stage, k5);
        combine(&mut stage, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        f(t + h, &stage, k6);
        combine(&mut y_new, y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        f(t + h, &y_new, k7);
        stats.rhs_evals += 6;

        let mut acc = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = control.abs_tol + control.rel_tol * y[i].norm().max(y_new[i].norm());
            acc += (e.norm() / scale).powi(2);
        }
        let err = (acc / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::IntegrationFailure { time: t, reason: "non-finite error estimate".into() });
        }

        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            stats.accepted += 1;
            let factor = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
            h *= factor;
        } else {
            stats.rejected += 1;
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
    Ok(stats)
}

fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &Vec<C64>)]) {
    out.copy_from_slice(y);
    for &(a, k) in terms {
        let s = a * h;
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += v * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn control(tol: f64) -> StepControl {
        StepControl { rel_tol: tol, abs_tol: tol * 1e-2, initial_step: 1e-3 }
    }

    #[test]
    fn harmonic_phase() {
        // dy/dt = -i w y
        let w = 3.7;
        let mut y = vec![C64::new(1.0, 0.0)];
        integrate(|_, y, dy| dy[0] = C64::new(0.0, -w) * y[0], &mut y, 0.0, 2.0, control(1e-10)).unwrap();
        let want = C64::from_polar(1.0, -w * 2.0);
        assert!((y[0] - want).norm() < 1e-8);
    }

    #[test]
    fn time_dependent_rhs() {
        // dy/dt = 2t y, y(0) = 1 -> exp(t^2)
        let mut y = vec![C64::new(1.0, 0.0)];
        integrate(|t, y, dy| dy[0] = y[0] * (2.0 * t), &mut y, 0.0, 1.0, control(1e-10)).unwrap();
        assert!((y[0].re - 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn underflow_is_reported() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let err = integrate(|t, _, dy| dy[0] = C64::new(1.0 / (0.5 - t), 0.0), &mut y, 0.0, 1.0, control(1e-10));
        assert!(matches!(err, Err(Error::IntegrationFailure { .. })));
    }
}
