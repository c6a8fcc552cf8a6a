//! Soft-margin C-SVM trained by sequential minimal optimization on a
//! precomputed Gram matrix.
//!
//! Solves `max_a sum(a) - 1/2 a^T Q a` with `Q_ij = y_i y_j K_ij`,
//! `0 <= a_i <= C` and `sum(y_i a_i) = 0`, choosing each working pair by
//! maximal violation and second-order gain. Indefinite Gram matrices are
//! accepted; non-positive curvature along a pair is replaced by a small
//! constant.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::ml::dataset::Label;

/// Stopping tolerance on the maximal KKT violation.
pub const KKT_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// One coefficient per training sample, in training order.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub train_ids: Vec<String>,
    /// Ids with a nonzero coefficient.
    pub support_ids: Vec<String>,
    /// Label mapped to `+1`; the other label maps to `-1`.
    pub positive_label: Label,
    pub negative_label: Label,
    /// `+1` / `-1` per training sample.
    pub signs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    /// `sum_i a_i y_i K(x_i, x) + b` from the kernel row against the
    /// training samples.
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        assert_eq!(kernel_row.len(), self.dual_coefficients.len(), "kernel row length");
        self.dual_coefficients
            .iter()
            .zip(&self.signs)
            .zip(kernel_row)
            .filter(|((a, _), _)| **a != 0.0)
            .map(|((a, y), k)| a * y * k)
            .sum::<f64>()
            + self.bias
    }

    /// Positive decision values give the positive label; zero and negative
    /// values give the negative label.
    pub fn predict(&self, kernel_row: &[f64]) -> Label {
        if self.decision(kernel_row) > 0.0 {
            self.positive_label
        } else {
            self.negative_label
        }
    }

    pub fn n_support(&self) -> usize {
        self.support_ids.len()
    }
}

/// Label 1 is the positive class.
pub fn svm_train(gram: &KernelMatrix, labels: &[Label], c: f64) -> Result<SvmModel> {
    if !gram.is_square() {
        return Err(Error::Svm("training needs a square Gram matrix over the training samples".into()));
    }
    let n = gram.nrows();
    let k = Mat::from_fn(n, n, |i, j| gram.get(i, j));
    train_matrix(&k, labels, c, gram.row_ids.clone())
}

/// Trains on a dense Gram matrix with explicit ids.
pub fn train_matrix(k: &Mat<f64>, labels: &[Label], c: f64, ids: Vec<String>) -> Result<SvmModel> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::Svm(format!("Gram matrix is {}x{}", n, k.ncols())));
    }
    if labels.len() != n || ids.len() != n {
        return Err(Error::Svm(format!("{} labels and {} ids for {n} samples", labels.len(), ids.len())));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Svm(format!("C must be positive and finite, got {c}")));
    }
    let (positive_label, negative_label) = (1, 2);
    if let Some(l) = labels.iter().find(|&&l| l != 1 && l != 2) {
        return Err(Error::Svm(format!("label {l} is not 1 or 2")));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::Svm("training labels contain a single class".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l == positive_label { 1.0 } else { -1.0 }).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 10_000_000usize.max(100 * n);
    let mut iterations = 0;
    let mut converged = false;

    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    while iterations < max_iter {
        // i: maximal violating index in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                if -y[t] * grad[t] > gmax || i_sel == usize::MAX {
                    i_sel = t;
                }
                gmax = -y[t] * grad[t];
            }
        }
        // j: best second-order gain in I_low.
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > 0.0 {
                let a = k[(i_sel, i_sel)] + k[(t, t)] - 2.0 * k[(i_sel, t)];
                let a = if a > 0.0 { a } else { TAU };
                let gain = -(b * b) / a;
                if gain < best {
                    best = gain;
                    j_sel = t;
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < KKT_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = k[(i, i)] + k[(j, j)] + 2.0 * q(i, j);
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = k[(i, i)] + k[(j, j)] - 2.0 * q(i, j);
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // Bias from free coefficients, else the midpoint of the feasible range.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    let support_ids = (0..n).filter(|&t| alpha[t] > 0.0).map(|t| ids[t].clone()).collect();
    Ok(SvmModel {
        dual_coefficients: alpha,
        bias: -rho,
        c,
        train_ids: ids,
        support_ids,
        positive_label,
        negative_label,
        signs: y,
        iterations,
        converged,
    })
}

/// Prediction from a kernel row against the training samples.
pub fn svm_predict(model: &SvmModel, kernel_row: &[f64]) -> Label {
    model.predict(kernel_row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    fn linear_gram(x: &[[f64; 2]]) -> Mat<f64> {
        Mat::from_fn(x.len(), x.len(), |i, j| x[i][0] * x[j][0] + x[i][1] * x[j][1])
    }

    fn separable() -> (Vec<[f64; 2]>, Vec<Label>) {
        // 20 points split by x + y = 1 with margin.
        let mut x = Vec::new();
        let mut l = Vec::new();
        for k in 0..20 {
            let s = k as f64 / 19.0;
            let off = 0.15 + 0.1 * ((k * 7) % 5) as f64 / 5.0;
            if k % 2 == 0 {
                x.push([s, 1.0 - s + off]);
                l.push(1);
            } else {
                x.push([s, 1.0 - s - off]);
                l.push(2);
            }
        }
        (x, l)
    }

    /// Linear kernel with a constant feature so the bias is learned freely.
    fn affine_gram(x: &[[f64; 2]]) -> Mat<f64> {
        Mat::from_fn(x.len(), x.len(), |i, j| x[i][0] * x[j][0] + x[i][1] * x[j][1] + 1.0)
    }

    fn margins(m: &SvmModel, k: &Mat<f64>) -> Vec<f64> {
        (0..k.nrows())
            .map(|i| m.signs[i] * m.decision(&(0..k.nrows()).map(|j| k[(i, j)]).collect::<Vec<_>>()))
            .collect()
    }

    #[test]
    fn two_points() {
        let k = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let m = train_matrix(&k, &[1, 2], 10.0, ids(2)).unwrap();
        assert_eq!(m.n_support(), 2);
        assert_eq!(m.predict(&[1.0, 0.0]), 1);
        assert_eq!(m.predict(&[0.0, 1.0]), 2);
        assert!((m.dual_coefficients[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separable_training_set() {
        let (x, l) = separable();
        let k = affine_gram(&x);
        let m = train_matrix(&k, &l, 1e3, ids(x.len())).unwrap();
        assert!(m.converged);
        for i in 0..x.len() {
            let row: Vec<f64> = (0..x.len()).map(|j| k[(i, j)]).collect();
            assert_eq!(m.predict(&row), l[i]);
        }
        let balance: f64 = m.dual_coefficients.iter().zip(&m.signs).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-6);
    }

    #[test]
    fn kkt_conditions() {
        let (x, l) = separable();
        let k = linear_gram(&x);
        for &c in &[0.05, 1.0, 50.0] {
            let m = train_matrix(&k, &l, c, ids(x.len())).unwrap();
            let tol = 2.0 * KKT_TOL;
            for (a, g) in m.dual_coefficients.iter().zip(margins(&m, &k)) {
                assert!(*a >= 0.0 && *a <= c);
                if *a == 0.0 {
                    assert!(g >= 1.0 - tol, "a=0 margin {g}");
                } else if *a == c {
                    assert!(g <= 1.0 + tol, "a=C margin {g}");
                } else {
                    assert!((g - 1.0).abs() <= tol, "free margin {g}");
                }
            }
        }
    }

    #[test]
    fn negated_labels_negate_predictions() {
        let (x, l) = separable();
        let k = affine_gram(&x);
        let flipped: Vec<Label> = l.iter().map(|&v| 3 - v).collect();
        let a = train_matrix(&k, &l, 5.0, ids(x.len())).unwrap();
        let b = train_matrix(&k, &flipped, 5.0, ids(x.len())).unwrap();
        for probe in [[0.2, 0.3], [0.9, 0.8], [0.5, 0.45], [0.1, 0.95]] {
            let row: Vec<f64> = x.iter().map(|p| p[0] * probe[0] + p[1] * probe[1] + 1.0).collect();
            assert_ne!(a.predict(&row), b.predict(&row));
            assert!((a.decision(&row) + b.decision(&row)).abs() < 0.05);
        }
    }

    #[test]
    fn errors() {
        let k = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(matches!(train_matrix(&k, &[1, 1], 1.0, ids(2)), Err(Error::Svm(_))));
        let rect = KernelMatrix::new(vec!["a".into()], vec!["a".into(), "b".into()], vec![vec![1.0, 0.5]]).unwrap();
        assert!(svm_train(&rect, &[1], 1.0).is_err());
        assert!(train_matrix(&k, &[1, 2], 0.0, ids(2)).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let (x, l) = separable();
        let m = train_matrix(&affine_gram(&x), &l, 2.0, ids(x.len())).unwrap();
        let back: SvmModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    /// Exact dual maximizer by enumerating each coefficient as 0, C or
    /// free, solving the equality-constrained stationarity system for the
    /// free set and keeping the best feasible candidate.
    fn brute_force_dual(k: &Mat<f64>, y: &[f64], c: f64) -> (Vec<f64>, f64) {
        let n = y.len();
        let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];
        let objective = |a: &[f64]| -> f64 {
            let mut w: f64 = a.iter().sum();
            for i in 0..n {
                for j in 0..n {
                    w -= 0.5 * a[i] * a[j] * q(i, j);
                }
            }
            w
        };
        let mut best = (vec![0.0; n], f64::NEG_INFINITY);
        for code in 0..3usize.pow(n as u32) {
            let mut state = vec![0u8; n];
            let mut cc = code;
            for s in state.iter_mut() {
                *s = (cc % 3) as u8;
                cc /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
            let mut a: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
            let m = free.len();
            if m > 0 {
                // [Q_FF y_F; y_F^T 0] [a_F; nu] = [1 - Q_F,fixed a_fixed; -y_fixed . a_fixed]
                let dim = m + 1;
                let mut sys = vec![vec![0.0; dim + 1]; dim];
                for (r, &i) in free.iter().enumerate() {
                    for (s, &j) in free.iter().enumerate() {
                        sys[r][s] = q(i, j);
                    }
                    sys[r][m] = y[i];
                    sys[r][dim] = 1.0 - (0..n).filter(|t| state[*t] != 2).map(|t| q(i, t) * a[t]).sum::<f64>();
                    sys[m][r] = y[i];
                }
                sys[m][dim] = -(0..n).filter(|t| state[*t] != 2).map(|t| y[t] * a[t]).sum::<f64>();
                // Gaussian elimination with partial pivoting.
                let mut ok = true;
                for col in 0..dim {
                    let piv = (col..dim).max_by(|&p, &q| sys[p][col].abs().total_cmp(&sys[q][col].abs())).unwrap();
                    if sys[piv][col].abs() < 1e-12 {
                        ok = false;
                        break;
                    }
                    sys.swap(col, piv);
                    for r in 0..dim {
                        if r != col {
                            let f = sys[r][col] / sys[col][col];
                            for cidx in col..=dim {
                                sys[r][cidx] -= f * sys[col][cidx];
                            }
                        }
                    }
                }
                if !ok {
                    continue;
                }
                for (r, &i) in free.iter().enumerate() {
                    a[i] = sys[r][dim] / sys[r][r];
                }
            }
            let feasible = a.iter().all(|&v| (-1e-12..=c + 1e-12).contains(&v))
                && y.iter().zip(&a).map(|(yi, ai)| yi * ai).sum::<f64>().abs() < 1e-9;
            if feasible {
                let w = objective(&a);
                if w > best.1 {
                    best = (a, w);
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn matches_brute_force_dual(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 6),
            labels in proptest::collection::vec(1u8..=2, 6),
            c in 0.1f64..20.0,
            gamma in 0.5f64..8.0,
        ) {
            prop_assume!(labels.contains(&1) && labels.contains(&2));
            let k = Mat::from_fn(6, 6, |i, j| {
                let d = (pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2);
                (-gamma * d).exp()
            });
            let m = train_matrix(&k, &labels, c, ids(6)).unwrap();
            let (exact, w_exact) = brute_force_dual(&k, &m.signs, c);
            let q = |i: usize, j: usize| m.signs[i] * m.signs[j] * k[(i, j)];
            let a = &m.dual_coefficients;
            let mut w: f64 = a.iter().sum();
            for i in 0..6 { for j in 0..6 { w -= 0.5 * a[i] * a[j] * q(i, j); } }
            prop_assert!(w <= w_exact + 1e-9);
            prop_assert!(w_exact - w <= 1e-3 * w_exact.abs().max(1.0), "objective {w} vs {w_exact}");
            // Predictions agree wherever the exact decision is not marginal.
            let kernel_sum = |coef: &[f64], probe: usize| -> f64 {
                (0..6).map(|j| coef[j] * m.signs[j] * k[(probe, j)]).sum()
            };
            let free: Vec<usize> = (0..6).filter(|&i| exact[i] > 1e-9 && exact[i] < c - 1e-9).collect();
            if !free.is_empty() {
                let b = free.iter().map(|&i| m.signs[i] - kernel_sum(&exact, i)).sum::<f64>() / free.len() as f64;
                for probe in 0..6 {
                    let f = kernel_sum(&exact, probe) + b;
                    if f.abs() > 0.1 {
                        let row: Vec<f64> = (0..6).map(|j| k[(probe, j)]).collect();
                        prop_assert_eq!(m.decision(&row) > 0.0, f > 0.0);
                    }
                }
            }
        }
    }
}
