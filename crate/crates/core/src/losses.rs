//! The MCL-GAN loss suite: expert and non-expert adversarial terms, balance
//! losses on assignment distributions, L1 sparsity on scores, and the
//! composed discriminator/generator totals. All terms are built on the tape
//! so gradients flow only to the leaves each side is allowed to update.

use crate::error::{Error, Result};
use crate::mcl::ExpertAssignment;
use crate::scalar::{Scalar, PROB_FLOOR};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossVariant {
    Standard,
    LeastSquares,
    Hinge,
}

impl LossVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(LossVariant::Standard),
            "least_squares" => Ok(LossVariant::LeastSquares),
            "hinge" => Ok(LossVariant::Hinge),
            other => Err(Error::invalid(format!(
                "unknown loss variant '{other}' (expected standard, least_squares, hinge)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossVariant::Standard => "standard",
            LossVariant::LeastSquares => "least_squares",
            LossVariant::Hinge => "hinge",
        }
    }
}

/// Loss weighting and selection hyperparameters.
#[derive(Clone, Debug)]
pub struct LossWeights<S> {
    /// Non-expert regularization weight.
    pub alpha: S,
    /// Balance weight for the discriminator side (base value of the schedule).
    pub beta_d: S,
    /// Balance weight for the generator side.
    pub beta_g: S,
    /// L1 sparsity weight.
    pub gamma: S,
    /// Softmax temperature for assignment distributions.
    pub tau: S,
    /// Experts per sample.
    pub k: usize,
    /// Target assignment distribution (uniform by default).
    pub mu: Vec<S>,
    /// First entry `a` of the non-expert soft label [a, 1-a].
    pub soft_label: S,
}

impl<S: Scalar> LossWeights<S> {
    pub fn defaults(m: usize) -> Self {
        LossWeights {
            alpha: S::c(0.01),
            beta_d: S::c(0.5),
            beta_g: S::zero(),
            gamma: S::zero(),
            tau: S::one(),
            k: 1,
            mu: vec![S::one() / S::c(m as f64); m],
            soft_label: S::c(0.5),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 || self.k > m {
            return Err(Error::invalid(format!("k = {} out of range for M = {m}", self.k)));
        }
        if self.tau <= S::zero() {
            return Err(Error::invalid("tau must be positive"));
        }
        if self.mu.len() != m {
            return Err(Error::shape("LossWeights::mu", format!("{m}"), format!("{}", self.mu.len())));
        }
        let sum: S = self.mu.iter().copied().sum();
        if (sum - S::one()).abs() > S::c(1e-6) {
            return Err(Error::invalid(format!("mu must sum to 1, got {sum}")));
        }
        for w in [self.alpha, self.beta_d, self.beta_g, self.gamma] {
            if w < S::zero() || !w.is_finite() {
                return Err(Error::invalid("loss weights must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

fn check_mask<S: Scalar>(tape: &Tape<S>, node: NodeId, a: &ExpertAssignment, context: &'static str) -> Result<()> {
    let v = tape.value(node);
    if v.shape() != (a.rows(), a.models()) {
        return Err(Error::shape(
            context,
            format!("{}x{}", a.rows(), a.models()),
            format!("{:?}", v.shape()),
        ));
    }
    Ok(())
}

/// Eq-1 family: expert discriminators' loss on real samples.
pub fn expert_loss_real<S: Scalar>(
    tape: &mut Tape<S>,
    logits: NodeId,
    scores: NodeId,
    v: &ExpertAssignment,
    variant: LossVariant,
) -> Result<NodeId> {
    check_mask(tape, scores, v, "expert_loss_real")?;
    let mask = v.mask::<S>();
    match variant {
        LossVariant::Standard => {
            let ln_s = tape.ln_prob(scores);
            let masked = tape.mul_const_tensor(ln_s, mask)?;
            let s = tape.sum_all(masked);
            Ok(tape.neg(s))
        }
        LossVariant::LeastSquares => {
            let diff = tape.add_scalar(scores, -S::one());
            let sq = tape.square(diff);
            let masked = tape.mul_const_tensor(sq, mask)?;
            Ok(tape.sum_all(masked))
        }
        LossVariant::Hinge => {
            let margin = tape.one_minus(logits);
            let hinge = tape.relu(margin);
            let masked = tape.mul_const_tensor(hinge, mask)?;
            Ok(tape.sum_all(masked))
        }
    }
}

/// Eq-2 family: every discriminator must reject fakes (no expert mask).
pub fn expert_loss_fake_disc<S: Scalar>(
    tape: &mut Tape<S>,
    logits: NodeId,
    scores: NodeId,
    variant: LossVariant,
) -> Result<NodeId> {
    match variant {
        LossVariant::Standard => {
            let rejected = tape.one_minus(scores);
            let ln_r = tape.ln_prob(rejected);
            let s = tape.sum_all(ln_r);
            Ok(tape.neg(s))
        }
        LossVariant::LeastSquares => {
            let sq = tape.square(scores);
            Ok(tape.sum_all(sq))
        }
        LossVariant::Hinge => {
            let margin = tape.add_scalar(logits, S::one());
            let hinge = tape.relu(margin);
            Ok(tape.sum_all(hinge))
        }
    }
}

/// Eq-3 family: generator loss through its expert discriminators.
pub fn expert_loss_gen<S: Scalar>(
    tape: &mut Tape<S>,
    logits: NodeId,
    scores: NodeId,
    u: &ExpertAssignment,
    variant: LossVariant,
) -> Result<NodeId> {
    check_mask(tape, scores, u, "expert_loss_gen")?;
    let mask = u.mask::<S>();
    match variant {
        LossVariant::Standard => {
            let rejected = tape.one_minus(scores);
            let ln_r = tape.ln_prob(rejected);
            let masked = tape.mul_const_tensor(ln_r, mask)?;
            Ok(tape.sum_all(masked))
        }
        LossVariant::LeastSquares => {
            let diff = tape.add_scalar(scores, -S::one());
            let sq = tape.square(diff);
            let masked = tape.mul_const_tensor(sq, mask)?;
            Ok(tape.sum_all(masked))
        }
        LossVariant::Hinge => {
            let neg = tape.neg(logits);
            let masked = tape.mul_const_tensor(neg, mask)?;
            Ok(tape.sum_all(masked))
        }
    }
}

/// Eqs. 4-5: soft-label cross entropy for non-experts (all variants).
pub fn nonexpert_loss<S: Scalar>(
    tape: &mut Tape<S>,
    scores: NodeId,
    assignment: &ExpertAssignment,
    soft_label: S,
) -> Result<NodeId> {
    check_mask(tape, scores, assignment, "nonexpert_loss")?;
    let mask = assignment.complement_mask::<S>();
    let ln_s = tape.ln_prob(scores);
    let rejected = tape.one_minus(scores);
    let ln_r = tape.ln_prob(rejected);
    let a_term = tape.scale(ln_s, -soft_label);
    let b_term = tape.scale(ln_r, -(S::one() - soft_label));
    let ce = tape.add(a_term, b_term)?;
    let masked = tape.mul_const_tensor(ce, mask)?;
    Ok(tape.sum_all(masked))
}

/// Eq. 6: KL(mu || q) where q is the batch-mean temperature softmax over
/// real-sample pre-sigmoid logits.
pub fn balance_loss_disc<S: Scalar>(
    tape: &mut Tape<S>,
    real_logits: NodeId,
    mu: &[S],
    tau: S,
) -> Result<NodeId> {
    let m = tape.value(real_logits).cols();
    if mu.len() != m {
        return Err(Error::shape("balance_loss_disc", format!("{m}"), format!("{}", mu.len())));
    }
    let sm = tape.softmax_rows(real_logits, tau)?;
    let q = tape.mean_rows(sm);
    kl_to_node(tape, mu, q)
}

/// Eq. 7: KL(q || o); q from real logits is a detached constant target,
/// o is the batch-mean softmax of fake logits (differentiable).
pub fn balance_loss_gen<S: Scalar>(
    tape: &mut Tape<S>,
    q_target: &[S],
    fake_logits: NodeId,
    tau: S,
) -> Result<NodeId> {
    let m = tape.value(fake_logits).cols();
    if q_target.len() != m {
        return Err(Error::shape("balance_loss_gen", format!("{m}"), format!("{}", q_target.len())));
    }
    let sm = tape.softmax_rows(fake_logits, tau)?;
    let o = tape.mean_rows(sm);
    kl_to_node(tape, q_target, o)
}

/// KL(p_const || node) = sum p ln p - sum p ln(node).
fn kl_to_node<S: Scalar>(tape: &mut Tape<S>, p: &[S], node: NodeId) -> Result<NodeId> {
    let floor = S::c(PROB_FLOOR);
    let entropy_part: S = p
        .iter()
        .map(|&pi| if pi > S::zero() { pi * pi.max(floor).ln() } else { S::zero() })
        .sum();
    let weights = Tensor::from_vec(1, p.len(), p.to_vec())?;
    let ln_q = tape.ln_prob(node);
    let weighted = tape.mul_const_tensor(ln_q, weights)?;
    let cross = tape.sum_all(weighted);
    let neg_cross = tape.neg(cross);
    Ok(tape.add_scalar(neg_cross, entropy_part))
}

/// L1 sparsity on real-sample scores: mean over samples of the per-sample
/// L1 norm of the M score entries.
pub fn sparsity_loss<S: Scalar>(tape: &mut Tape<S>, real_scores: NodeId) -> NodeId {
    let n = tape.value(real_scores).rows();
    let s = tape.sum_all(real_scores);
    tape.scale(s, S::one() / S::c(n as f64))
}

pub struct DiscLossTerms {
    pub expert_real: NodeId,
    pub expert_fake: NodeId,
    pub nonexpert: NodeId,
    pub balance: NodeId,
    pub sparsity: NodeId,
    pub total: NodeId,
}

/// Eq. 8, discriminator side:
/// `L_e(x) + L_e(x~) + alpha L_ne(x) + beta_d(step) L_bal(x) + gamma L_1`.
#[allow(clippy::too_many_arguments)]
pub fn total_disc_loss<S: Scalar>(
    tape: &mut Tape<S>,
    real_logits: NodeId,
    real_scores: NodeId,
    fake_logits: NodeId,
    fake_scores: NodeId,
    v: &ExpertAssignment,
    weights: &LossWeights<S>,
    balance_weight: S,
    variant: LossVariant,
) -> Result<DiscLossTerms> {
    let expert_real = expert_loss_real(tape, real_logits, real_scores, v, variant)?;
    let expert_fake = expert_loss_fake_disc(tape, fake_logits, fake_scores, variant)?;
    let nonexpert = nonexpert_loss(tape, real_scores, v, weights.soft_label)?;
    let balance = balance_loss_disc(tape, real_logits, &weights.mu, weights.tau)?;
    let sparsity = sparsity_loss(tape, real_scores);

    let mut total = tape.add(expert_real, expert_fake)?;
    let ne_w = tape.scale(nonexpert, weights.alpha);
    total = tape.add(total, ne_w)?;
    let bal_w = tape.scale(balance, balance_weight);
    total = tape.add(total, bal_w)?;
    let sp_w = tape.scale(sparsity, weights.gamma);
    total = tape.add(total, sp_w)?;
    Ok(DiscLossTerms {
        expert_real,
        expert_fake,
        nonexpert,
        balance,
        sparsity,
        total,
    })
}

pub struct GenLossTerms {
    pub expert: NodeId,
    pub nonexpert: NodeId,
    pub balance: NodeId,
    pub total: NodeId,
}

/// Eq. 8, generator side:
/// `L_e(x~) + alpha L_ne(x~) + beta_g(step) L_bal(x~)`.
pub fn total_gen_loss<S: Scalar>(
    tape: &mut Tape<S>,
    fake_logits: NodeId,
    fake_scores: NodeId,
    u: &ExpertAssignment,
    q_target: &[S],
    weights: &LossWeights<S>,
    balance_weight: S,
    variant: LossVariant,
) -> Result<GenLossTerms> {
    let expert = expert_loss_gen(tape, fake_logits, fake_scores, u, variant)?;
    let nonexpert = nonexpert_loss(tape, fake_scores, u, weights.soft_label)?;
    let balance = balance_loss_gen(tape, q_target, fake_logits, weights.tau)?;

    let ne_w = tape.scale(nonexpert, weights.alpha);
    let mut total = tape.add(expert, ne_w)?;
    let bal_w = tape.scale(balance, balance_weight);
    total = tape.add(total, bal_w)?;
    Ok(GenLossTerms {
        expert,
        nonexpert,
        balance,
        total,
    })
}
