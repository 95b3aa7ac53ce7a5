//! L2-regularized logistic regression by dual coordinate descent.
//!
//! Minimizes `0.5 * (|w|^2 + b^2) + C * sum_i log(1 + exp(-y_i (w.x_i + b)))`.
//! The bias is an extra feature fixed at 1 and is regularized like any
//! other weight. The dual variables are updated one at a time with a few
//! Newton steps on the one-dimensional subproblem.

use super::NodeClassifier;
use crate::features::SparseVector;
use crate::scalar::Real;
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bias given to a classifier trained without one of the two classes.
pub const CONSTANT_BIAS: f64 = 10.0;

const MAX_INNER_NEWTON: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Loss weight `C`; larger means weaker regularization.
    pub reg_c: f64,
    /// Stop once the largest dual gradient magnitude in an epoch falls below this.
    pub tol: f64,
    /// Maximum passes over the data.
    pub max_iters: usize,
    /// Weights with magnitude below this are dropped after training; 0 keeps all.
    pub weight_threshold: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            reg_c: 1.0,
            tol: 1e-2,
            max_iters: 100,
            weight_threshold: 0.1,
        }
    }
}

/// Fits a classifier separating `positives` from `negatives`.
///
/// If one side is empty the result is a constant classifier whose probability
/// saturates toward the class that is present.
pub fn train_logistic<F: Real>(
    positives: &[&SparseVector<F>],
    negatives: &[&SparseVector<F>],
    params: &SolverParams,
) -> NodeClassifier<F> {
    let xs: Vec<&SparseVector<F>> = positives.iter().chain(negatives).copied().collect();
    let ys: Vec<bool> = std::iter::repeat_n(true, positives.len())
        .chain(std::iter::repeat_n(false, negatives.len()))
        .collect();
    train_binary(&xs, &ys, params, 0)
}

/// Fits on `xs` with targets `ys`; `seed` fixes the coordinate visiting order.
pub fn train_binary<F: Real>(
    xs: &[&SparseVector<F>],
    ys: &[bool],
    params: &SolverParams,
    seed: u64,
) -> NodeClassifier<F> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let dim = xs.first().map_or(0, |x| x.dim());
    let n_pos = ys.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == n {
        if n > 0 {
            warn!("training a node classifier on a single class ({n} points); using a constant classifier");
        }
        let sign = if n > 0 && n_pos == n { 1.0 } else { -1.0 };
        return NodeClassifier::constant(dim, F::from_f64_lossy(sign * CONSTANT_BIAS));
    }

    let c = F::from_f64_lossy(params.reg_c);
    let half = F::from_f64_lossy(0.5);
    let tenth = F::from_f64_lossy(0.1);
    let sign_of = |y: bool| if y { F::one() } else { -F::one() };

    let mut w = vec![F::zero(); dim];
    let mut b = F::zero();
    // alpha[2i] is the dual variable, alpha[2i + 1] = C - alpha[2i]
    let mut alpha = vec![F::zero(); 2 * n];
    let init = (F::from_f64_lossy(1e-3) * c).min(F::from_f64_lossy(1e-8));
    let mut xsq = Vec::with_capacity(n);
    for (i, x) in xs.iter().enumerate() {
        alpha[2 * i] = init;
        alpha[2 * i + 1] = c - init;
        let y = sign_of(ys[i]);
        x.axpy_into(y * init, &mut w);
        b += y * init;
        xsq.push(x.values().iter().map(|&v| v * v).sum::<F>() + F::one());
    }

    let eps = F::from_f64_lossy(params.tol);
    let mut inner_eps = F::from_f64_lossy(1e-2);
    let inner_eps_min = F::from_f64_lossy(1e-8).min(eps);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..params.max_iters {
        order.shuffle(&mut rng);
        let mut newton_steps = 0usize;
        let mut grad_max = F::zero();
        for &i in &order {
            let x = xs[i];
            let y = sign_of(ys[i]);
            let a = xsq[i];
            let margin = y * (x.dot_dense(&w) + b);

            let (mut ind1, mut ind2, mut sign) = (2 * i, 2 * i + 1, F::one());
            if half * a * (alpha[ind2] - alpha[ind1]) + margin < F::zero() {
                ind1 = 2 * i + 1;
                ind2 = 2 * i;
                sign = -F::one();
            }
            let alpha_old = alpha[ind1];
            let mut z = alpha_old;
            if c - z < half * c {
                z = tenth * z;
            }
            let mut gp = a * (z - alpha_old) + sign * margin + (z / (c - z)).ln();
            grad_max = grad_max.max(gp.abs());

            let mut inner = 0;
            while inner <= MAX_INNER_NEWTON {
                if gp.abs() < inner_eps {
                    break;
                }
                let gpp = a + c / (c - z) / z;
                let next = z - gp / gpp;
                z = if next <= F::zero() { z * tenth } else { next };
                gp = a * (z - alpha_old) + sign * margin + (z / (c - z)).ln();
                newton_steps += 1;
                inner += 1;
            }
            if inner > 0 {
                alpha[ind1] = z;
                alpha[ind2] = c - z;
                let step = sign * (z - alpha_old) * y;
                x.axpy_into(step, &mut w);
                b += step;
            }
        }
        if grad_max < eps {
            break;
        }
        if newton_steps <= n / 10 {
            inner_eps = inner_eps_min.max(tenth * inner_eps);
        }
    }

    let threshold = F::from_f64_lossy(params.weight_threshold);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (j, &v) in w.iter().enumerate() {
        if v != F::zero() && v.abs() >= threshold {
            indices.push(j as u32);
            values.push(v);
        }
    }
    NodeClassifier::new(SparseVector::from_parts_unchecked(dim, indices, values), b)
}
