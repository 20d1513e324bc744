//! Pure numeric helpers shared by the loss suite and the metrics:
//! temperature softmax and KL divergence.

use crate::error::{Error, Result};
use crate::scalar::{Scalar, PROB_FLOOR};

/// Temperature softmax over a logit vector, computed with max-subtraction.
pub fn softmax_temperature<S: Scalar>(logits: &[S], tau: S) -> Result<Vec<S>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax over an empty vector"));
    }
    if tau <= S::zero() {
        return Err(Error::invalid(format!("softmax temperature must be > 0, got {tau}")));
    }
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let mut out: Vec<S> = logits.iter().map(|&l| ((l - max) / tau).exp()).collect();
    let total: S = out.iter().copied().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Outcome of a KL evaluation; `clamped` reports that some `q_i` was floored
/// at 1e-12 where `p_i > 0` (the divergence is then finite by construction).
#[derive(Clone, Copy, Debug)]
pub struct KlOutcome<S> {
    pub value: S,
    pub clamped: bool,
}

/// `KL(p || q) = sum_i p_i log(p_i / q_i)` with the `0 log 0 = 0` convention.
pub fn kl_divergence<S: Scalar>(p: &[S], q: &[S]) -> Result<KlOutcome<S>> {
    if p.len() != q.len() {
        return Err(Error::shape("kl_divergence", format!("{}", p.len()), format!("{}", q.len())));
    }
    if p.is_empty() {
        return Err(Error::invalid("KL of empty distributions"));
    }
    let tol = S::c(1e-6);
    for (name, v) in [("p", p), ("q", q)] {
        let sum: S = v.iter().copied().sum();
        if (sum - S::one()).abs() > tol || v.iter().any(|&x| x < S::zero()) {
            return Err(Error::invalid(format!("{name} is not a probability vector (sum {sum})")));
        }
    }
    let floor = S::c(PROB_FLOOR);
    let mut value = S::zero();
    let mut clamped = false;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi <= S::zero() {
            continue;
        }
        let mut qc = qi;
        if qc < floor {
            qc = floor;
            clamped = true;
        }
        value += pi * (pi / qc).ln();
    }
    Ok(KlOutcome { value, clamped })
}

/// Batch-mean of per-row temperature softmaxes: the assignment distribution
/// `q` (real logits) / `o` (fake logits) used by the balance losses.
pub fn assignment_distribution<S: Scalar>(logit_rows: &[&[S]], tau: S) -> Result<Vec<S>> {
    let n = logit_rows.len();
    if n == 0 {
        return Err(Error::invalid("assignment distribution over empty batch"));
    }
    let m = logit_rows[0].len();
    let mut mean = vec![S::zero(); m];
    for row in logit_rows {
        let p = softmax_temperature(row, tau)?;
        for (acc, x) in mean.iter_mut().zip(p) {
            *acc += x;
        }
    }
    let inv = S::one() / S::c(n as f64);
    mean.iter_mut().for_each(|x| *x *= inv);
    Ok(mean)
}
