//! Multiple-choice-learning machinery: top-k expert selection, the oracle
//! loss, and the confident (CMCL) variant. Independent of the GAN stack.

use crate::error::{Error, Result};
use crate::ops::kl_divergence;
use crate::scalar::{Scalar, PROB_FLOOR};
use crate::tensor::Tensor;

/// Binary indicator matrix with exactly `k` ones per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpertAssignment {
    flags: Vec<bool>,
    rows: usize,
    models: usize,
    k: usize,
}

impl ExpertAssignment {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn models(&self) -> usize {
        self.models
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_expert(&self, row: usize, model: usize) -> bool {
        self.flags[row * self.models + model]
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.flags[row * self.models..(row + 1) * self.models]
    }

    /// Expert indicator as a 0/1 tensor (for masking losses).
    pub fn mask<S: Scalar>(&self) -> Tensor<S> {
        let data = self.flags.iter().map(|&f| if f { S::one() } else { S::zero() }).collect();
        Tensor::from_vec(self.rows, self.models, data).expect("mask shape")
    }

    /// Complement mask `1 - v`.
    pub fn complement_mask<S: Scalar>(&self) -> Tensor<S> {
        let data = self.flags.iter().map(|&f| if f { S::zero() } else { S::one() }).collect();
        Tensor::from_vec(self.rows, self.models, data).expect("mask shape")
    }

    /// Per-model expert counts over all rows.
    pub fn model_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.models];
        for row in 0..self.rows {
            for (m, &f) in self.row(row).iter().enumerate() {
                if f {
                    counts[m] += 1;
                }
            }
        }
        counts
    }
}

/// Mark the `k` best entries per row; ties break toward the lowest index.
pub fn select_topk<S: Scalar>(scores: &Tensor<S>, k: usize, higher_is_better: bool) -> Result<ExpertAssignment> {
    let (n, m) = scores.shape();
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if k > m {
        return Err(Error::invalid(format!("k = {k} exceeds model count {m}")));
    }
    let mut flags = vec![false; n * m];
    let mut order: Vec<usize> = Vec::with_capacity(m);
    for i in 0..n {
        let row = scores.row(i);
        order.clear();
        order.extend(0..m);
        // Stable sort keeps the lowest index first among ties.
        if higher_is_better {
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).expect("finite scores"));
        } else {
            order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("finite scores"));
        }
        for &j in order.iter().take(k) {
            flags[i * m + j] = true;
        }
    }
    Ok(ExpertAssignment {
        flags,
        rows: n,
        models: m,
        k,
    })
}

/// Oracle loss: per row, sum of the `k` smallest entries; returns the
/// minimizing assignment alongside.
pub fn oracle_loss<S: Scalar>(losses: &Tensor<S>, k: usize) -> Result<(S, ExpertAssignment)> {
    if !losses.all_finite() {
        return Err(Error::invalid("loss matrix contains non-finite entries"));
    }
    let assignment = select_topk(losses, k, false)?;
    let mut total = S::zero();
    for i in 0..losses.rows() {
        for (m, &x) in losses.row(i).iter().enumerate() {
            if assignment.is_expert(i, m) {
                total += x;
            }
        }
    }
    Ok((total, assignment))
}

/// Confident oracle loss over per-model predictive distributions.
///
/// `distributions[m]` is the N x C output of model `m`; `targets[i]` indexes
/// the true class of sample `i`. Experts pay cross entropy on the target,
/// non-experts pay `beta * KL(U || P_m)` toward the uniform distribution.
pub fn cmcl_loss<S: Scalar>(
    distributions: &[Tensor<S>],
    targets: &[usize],
    assignment: &ExpertAssignment,
    beta: S,
) -> Result<S> {
    let models = distributions.len();
    if models != assignment.models() {
        return Err(Error::shape(
            "cmcl_loss",
            format!("{} models", assignment.models()),
            format!("{models}"),
        ));
    }
    let n = targets.len();
    let classes = distributions.first().map_or(0, |d| d.cols());
    if classes == 0 {
        return Err(Error::invalid("cmcl_loss needs at least one class"));
    }
    let tol = S::c(1e-6);
    for d in distributions {
        if d.rows() != n || d.cols() != classes {
            return Err(Error::shape(
                "cmcl_loss",
                format!("{n}x{classes}"),
                format!("{:?}", d.shape()),
            ));
        }
        for i in 0..n {
            let sum: S = d.row(i).iter().copied().sum();
            if (sum - S::one()).abs() > tol || d.row(i).iter().any(|&x| x < S::zero()) {
                return Err(Error::invalid(format!("model distribution row {i} is not normalized (sum {sum})")));
            }
        }
    }
    if assignment.rows() != n {
        return Err(Error::shape("cmcl_loss", format!("{n} rows"), format!("{}", assignment.rows())));
    }
    let uniform = vec![S::one() / S::c(classes as f64); classes];
    let floor = S::c(PROB_FLOOR);
    let mut total = S::zero();
    for i in 0..n {
        if targets[i] >= classes {
            return Err(Error::invalid(format!("target {} out of range for {classes} classes", targets[i])));
        }
        for (m, dist) in distributions.iter().enumerate() {
            let row = dist.row(i);
            if assignment.is_expert(i, m) {
                total += -(row[targets[i]].max(floor).ln());
            } else if beta > S::zero() {
                total += beta * kl_divergence(&uniform, row)?.value;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn topk_unique_max() {
        let a = select_topk(&t(1, 3, &[0.9, 0.1, 0.5]), 1, true).unwrap();
        assert_eq!(a.row(0), &[true, false, false]);
    }

    #[test]
    fn topk_two_of_three() {
        let a = select_topk(&t(1, 3, &[0.9, 0.1, 0.5]), 2, true).unwrap();
        assert_eq!(a.row(0), &[true, false, true]);
    }

    #[test]
    fn topk_tie_breaks_to_lowest_index() {
        let a = select_topk(&t(1, 2, &[0.5, 0.5]), 1, true).unwrap();
        assert_eq!(a.row(0), &[true, false]);
    }

    #[test]
    fn topk_rejects_bad_k() {
        let s = t(1, 2, &[0.1, 0.2]);
        assert!(select_topk(&s, 0, true).is_err());
        assert!(select_topk(&s, 3, true).is_err());
    }

    #[test]
    fn oracle_loss_small_matrix() {
        let (loss, a) = oracle_loss(&t(2, 2, &[1.0, 2.0, 3.0, 0.5]), 1).unwrap();
        assert_relative_eq!(loss, 1.5, epsilon = 1e-12);
        assert_eq!(a.row(0), &[true, false]);
        assert_eq!(a.row(1), &[false, true]);
    }

    #[test]
    fn oracle_loss_constant_row() {
        let c = 0.7;
        for k in 1..=3 {
            let (loss, _) = oracle_loss(&t(1, 3, &[c, c, c]), k).unwrap();
            assert_relative_eq!(loss, k as f64 * c, epsilon = 1e-12);
        }
    }

    #[test]
    fn cmcl_uniform_nonexperts_add_nothing() {
        let p1 = t(1, 2, &[0.9, 0.1]);
        let p2 = t(1, 2, &[0.5, 0.5]);
        let a = select_topk(&t(1, 2, &[1.0, 0.0]), 1, true).unwrap();
        let with_beta = cmcl_loss(&[p1.clone(), p2.clone()], &[0], &a, 1.0).unwrap();
        let without = cmcl_loss(&[p1, p2], &[0], &a, 0.0).unwrap();
        assert_relative_eq!(with_beta, without, epsilon = 1e-12);
    }

    #[test]
    fn cmcl_known_value() {
        // Expert on model 1; model 2 predicts [0.9, 0.1], so the penalty is
        // KL([0.5,0.5] || [0.9,0.1]) = 0.510826.
        let p1 = t(1, 2, &[0.8, 0.2]);
        let p2 = t(1, 2, &[0.9, 0.1]);
        let a = select_topk(&t(1, 2, &[1.0, 0.0]), 1, true).unwrap();
        let expert_term = -(0.8f64.ln());
        let total = cmcl_loss(&[p1, p2], &[0], &a, 1.0).unwrap();
        assert_relative_eq!(total, expert_term + 0.510826, epsilon = 1e-6);
    }

    #[test]
    fn cmcl_rejects_malformed_distribution() {
        let bad = t(1, 2, &[0.9, 0.3]);
        let ok = t(1, 2, &[0.5, 0.5]);
        let a = select_topk(&t(1, 2, &[1.0, 0.0]), 1, true).unwrap();
        assert!(cmcl_loss(&[bad, ok], &[0], &a, 1.0).is_err());
    }
}
