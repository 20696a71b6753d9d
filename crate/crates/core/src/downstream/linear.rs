//! Linear models: one-vs-rest coordinate descent (logistic or squared hinge
//! loss with L1 or L2 penalty) and multinomial logistic regression by
//! L-BFGS.
//!
//! Objectives follow the `C * sum(loss) + penalty` convention; intercepts
//! are not penalised.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::Penalty;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Loss {
    Logistic,
    SquaredHinge,
}

impl Loss {
    /// Value, first and second derivative with respect to the margin.
    #[inline]
    fn eval(self, m: f64) -> (f64, f64, f64) {
        match self {
            Loss::Logistic => {
                let e = libm::exp(-m.abs());
                let (value, s) = if m > 0.0 { (libm::log1p(e), e / (1.0 + e)) } else { (-m + libm::log1p(e), 1.0 / (1.0 + e)) };
                (value, -s, s * (1.0 - s))
            }
            Loss::SquaredHinge => {
                if m < 1.0 {
                    ((1.0 - m) * (1.0 - m), -2.0 * (1.0 - m), 2.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        }
    }
}

/// `rows x classes` weights plus intercepts; the decision for class `k` is
/// `w_k . x + b_k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bias[k] + dot(self.weights.row(k), x);
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut scores = vec![0.0; self.bias.len()];
        self.decision(x, &mut scores);
        crate::fusion::argmax(&scores)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CdSettings {
    pub loss: Loss,
    pub penalty: Penalty,
    pub c: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

/// One binary problem by cyclic coordinate descent with a Newton step per
/// coordinate and backtracking line search. `cols` is column-major data,
/// `y` holds +1/-1.
fn fit_binary_cd(cols: &[f64], n: usize, d: usize, y: &[f64], s: &CdSettings) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut z = vec![0.0; n];
    let ones = vec![1.0; n];
    // loss and derivatives at the current margins, refreshed from the
    // accepted trial point
    let mut cur: Vec<(f64, f64, f64)> = (0..n).map(|i| s.loss.eval(y[i] * z[i])).collect();
    let mut trial = cur.clone();

    let reg = |v: f64| match s.penalty {
        Penalty::L1 => v.abs(),
        Penalty::L2 => 0.5 * v * v,
    };

    for _ in 0..s.max_epochs {
        let mut max_step: f64 = 0.0;
        let mut max_w: f64 = 0.0;
        for j in 0..=d {
            let (x, is_bias) = if j < d { (&cols[j * n..(j + 1) * n], false) } else { (&ones[..], true) };
            let current = if is_bias { b } else { w[j] };
            let (mut g, mut h, mut base) = (0.0, 0.0, 0.0);
            for i in 0..n {
                if x[i] == 0.0 {
                    continue;
                }
                let (v, d1, d2) = cur[i];
                g += d1 * y[i] * x[i];
                h += d2 * x[i] * x[i];
                base += v;
            }
            g *= s.c;
            h = h * s.c + 1e-12;

            let step = if is_bias {
                -g / h
            } else {
                match s.penalty {
                    Penalty::L2 => -(g + current) / (h + 1.0),
                    Penalty::L1 => {
                        if g + 1.0 <= h * current {
                            -(g + 1.0) / h
                        } else if g - 1.0 >= h * current {
                            -(g - 1.0) / h
                        } else {
                            -current
                        }
                    }
                }
            };
            if step == 0.0 || !step.is_finite() {
                continue;
            }
            let reg_change = |lambda: f64| if is_bias { 0.0 } else { reg(current + lambda * step) - reg(current) };
            let predicted = g * step + reg_change(1.0);

            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut total = 0.0;
                for i in 0..n {
                    if x[i] != 0.0 {
                        trial[i] = s.loss.eval(y[i] * (z[i] + lambda * step * x[i]));
                        total += trial[i].0;
                    }
                }
                let delta = s.c * (total - base) + reg_change(lambda);
                if delta <= 0.01 * lambda * predicted.min(0.0) {
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                continue;
            }
            let moved = lambda * step;
            if is_bias {
                b += moved;
            } else {
                w[j] += moved;
                max_w = max_w.max(w[j].abs());
            }
            for i in 0..n {
                if x[i] != 0.0 {
                    z[i] += moved * x[i];
                    cur[i] = trial[i];
                }
            }
            max_step = max_step.max(moved.abs());
        }
        if max_step <= s.tol * (1.0 + max_w) {
            break;
        }
    }
    (w, b)
}

/// One-vs-rest: one binary model per class.
pub(crate) fn fit_ovr_cd(x: &Matrix, y: &[usize], k: usize, s: &CdSettings) -> LinearModel {
    let (n, d) = (x.rows(), x.cols());
    let cols = x.transposed_data();
    let mut weights = Matrix::zeros(k, d);
    let mut bias = vec![0.0; k];
    for (class, bias) in bias.iter_mut().enumerate() {
        let yb: Vec<f64> = y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let (w, b) = fit_binary_cd(&cols, n, d, &yb, s);
        weights.row_mut(class).copy_from_slice(&w);
        *bias = b;
    }
    LinearModel { weights, bias }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsSettings {
    pub c: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub tol: f64,
}

/// Objective and gradient of L2-penalised multinomial cross-entropy.
/// `theta` holds the `k x d` weights followed by the `k` intercepts.
fn multinomial_objective(theta: &[f64], x: &Matrix, y: &[usize], k: usize, c: f64, grad: &mut [f64]) -> f64 {
    let d = x.cols();
    let (w, b) = theta.split_at(k * d);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let mut scores = vec![0.0; k];
    for (i, row) in x.iter_rows().enumerate() {
        for c_ in 0..k {
            scores[c_] = b[c_] + dot(&w[c_ * d..(c_ + 1) * d], row);
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for s in scores.iter_mut() {
            *s = libm::exp(*s - max);
            z += *s;
        }
        loss += libm::log(z) + max - (libm::log(scores[y[i]]) + max);
        for c_ in 0..k {
            let p = scores[c_] / z - if c_ == y[i] { 1.0 } else { 0.0 };
            if p != 0.0 {
                let g = &mut grad[c_ * d..(c_ + 1) * d];
                for (gj, xj) in g.iter_mut().zip(row) {
                    *gj += c * p * xj;
                }
                grad[k * d + c_] += c * p;
            }
        }
    }
    let mut penalty = 0.0;
    for (gj, wj) in grad[..k * d].iter_mut().zip(w) {
        *gj += wj;
        penalty += 0.5 * wj * wj;
    }
    c * loss + penalty
}

/// Multinomial logistic regression with L2 penalty by L-BFGS.
pub(crate) fn fit_multinomial_lbfgs(x: &Matrix, y: &[usize], k: usize, s: &LbfgsSettings) -> LinearModel {
    let d = x.cols();
    let dim = k * d + k;
    let mut theta = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut f = multinomial_objective(&theta, x, y, k, s.c, &mut grad);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trial = vec![0.0; dim];
    let mut trial_grad = vec![0.0; dim];

    for iter in 0..s.max_iter {
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) <= s.tol {
            break;
        }
        // two-loop recursion
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (sv, yv, rho) in history.iter().rev() {
            let a = rho * dot(sv, &dir);
            for (di, yi) in dir.iter_mut().zip(yv) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((sv, yv, _)) = history.back() {
            let gamma = dot(sv, yv) / dot(yv, yv);
            dir.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let norm = libm::sqrt(dot(&grad, &grad));
            dir.iter_mut().for_each(|v| *v /= norm.max(1.0));
        }
        for ((sv, yv, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(yv, &dir);
            for (di, si) in dir.iter_mut().zip(sv) {
                *di += (a - beta) * si;
            }
        }
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }

        let mut step = 1.0;
        let mut f_new = f;
        let mut ok = false;
        for _ in 0..40 {
            for ((t, th), di) in trial.iter_mut().zip(&theta).zip(&dir) {
                *t = th + step * di;
            }
            f_new = multinomial_objective(&trial, x, y, k, s.c, &mut trial_grad);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if !ok {
            break;
        }
        let sv: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        core::mem::swap(&mut theta, &mut trial);
        core::mem::swap(&mut grad, &mut trial_grad);
        let improvement = f - f_new;
        f = f_new;
        if sy > 1e-10 {
            if history.len() == s.memory {
                history.pop_front();
            }
            history.push_back((sv, yv, 1.0 / sy));
        }
        if iter > 0 && improvement.abs() <= 1e-12 * (1.0 + f.abs()) {
            break;
        }
    }

    let weights = Matrix::new(k, d, theta[..k * d].to_vec()).expect("shape");
    LinearModel { weights, bias: theta[k * d..].to_vec() }
}
