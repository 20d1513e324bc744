//! Reverse-mode automatic differentiation over dense rank-2 arrays.
//!
//! Eager tape: every operation appends a node holding its value and a
//! backward rule; creation order is a topological order, so `backward`
//! is a single reverse sweep. Gradients accumulate until `zero_grads`.

use crate::error::{Error, Result};
use crate::scalar::{Scalar, PROB_CEIL, PROB_FLOOR};
use crate::tensor::{matmul_a_bt_into, matmul_at_b_into, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op<S> {
    /// Non-differentiable input; no gradient tracked.
    Constant,
    /// Trainable leaf; gradient readable after backward.
    Param,
    MatMul(NodeId, NodeId),
    /// a: n x m, bias: 1 x m added to every row.
    AddRowBroadcast(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    MulElem(NodeId, NodeId),
    Scale(NodeId, S),
    AddScalar(NodeId),
    Neg(NodeId),
    Relu(NodeId),
    LeakyRelu(NodeId, S),
    Sigmoid(NodeId),
    /// ln(clamp(x, lo, hi)); zero gradient outside the clamp band.
    LnClamped(NodeId, S, S),
    Square(NodeId),
    SumAll(NodeId),
    /// n x m -> 1 x m column means.
    MeanRows(NodeId),
    /// Row-wise temperature softmax.
    SoftmaxRows(NodeId, S),
    /// Elementwise product with a fixed (non-differentiated) tensor.
    MulConstTensor(NodeId, Tensor<S>),
}

struct Node<S> {
    value: Tensor<S>,
    grad: Tensor<S>,
    op: Op<S>,
}

pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> NodeId {
        let (r, c) = value.shape();
        self.nodes.push(Node {
            value,
            grad: Tensor::zeros(r, c),
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Param)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad.fill(S::zero());
        }
    }

    fn same_shape(&self, a: NodeId, b: NodeId, context: &'static str) -> Result<()> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if !va.same_shape(vb) {
            return Err(Error::shape(
                context,
                format!("{:?}", va.shape()),
                format!("{:?}", vb.shape()),
            ));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add_row_broadcast(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[bias.0].value);
        if vb.rows() != 1 || vb.cols() != va.cols() {
            return Err(Error::shape(
                "add_row_broadcast",
                format!("1x{}", va.cols()),
                format!("{:?}", vb.shape()),
            ));
        }
        let mut value = va.clone();
        for i in 0..value.rows() {
            for (x, &b) in value.row_mut(i).iter_mut().zip(vb.row(0).iter()) {
                *x += b;
            }
        }
        Ok(self.push(value, Op::AddRowBroadcast(a, bias)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "add")?;
        let mut value = self.nodes[a.0].value.clone();
        for (x, &y) in value.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *x += y;
        }
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "sub")?;
        let mut value = self.nodes[a.0].value.clone();
        for (x, &y) in value.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *x -= y;
        }
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "mul_elem")?;
        let mut value = self.nodes[a.0].value.clone();
        for (x, &y) in value.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *x *= y;
        }
        Ok(self.push(value, Op::MulElem(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| x * c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: S) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| x + c);
        self.push(value, Op::AddScalar(a))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| -x);
        self.push(value, Op::Neg(a))
    }

    /// `1 - a`, the usual companion of sigmoid scores.
    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let neg = self.neg(a);
        self.add_scalar(neg, S::one())
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| x.max(S::zero()));
        self.push(value, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: S) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| if x > S::zero() { x } else { x * slope });
        self.push(value, Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| {
            if x >= S::zero() {
                S::one() / (S::one() + (-x).exp())
            } else {
                let e = x.exp();
                e / (S::one() + e)
            }
        });
        self.push(value, Op::Sigmoid(a))
    }

    /// Natural log with input clamped to the default probability band.
    pub fn ln_prob(&mut self, a: NodeId) -> NodeId {
        self.ln_clamped(a, S::c(PROB_FLOOR), S::c(PROB_CEIL))
    }

    pub fn ln_clamped(&mut self, a: NodeId, lo: S, hi: S) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| x.max(lo).min(hi).ln());
        self.push(value, Op::LnClamped(a, lo, hi))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| x * x);
        self.push(value, Op::Square(a))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::scalar(self.nodes[a.0].value.sum());
        self.push(value, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.nodes[a.0].value.len();
        let s = self.sum_all(a);
        self.scale(s, S::one() / S::c(n as f64))
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value;
        let (n, m) = v.shape();
        let mut out = Tensor::zeros(1, m);
        for i in 0..n {
            for (acc, &x) in out.row_mut(0).iter_mut().zip(v.row(i).iter()) {
                *acc += x;
            }
        }
        let inv = S::one() / S::c(n as f64);
        out.data_mut().iter_mut().for_each(|x| *x *= inv);
        self.push(out, Op::MeanRows(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId, tau: S) -> Result<NodeId> {
        if tau <= S::zero() {
            return Err(Error::invalid(format!("softmax temperature must be > 0, got {tau}")));
        }
        let v = &self.nodes[a.0].value;
        let mut out = v.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let mut total = S::zero();
            for x in row.iter_mut() {
                *x = ((*x - max) / tau).exp();
                total += *x;
            }
            row.iter_mut().for_each(|x| *x /= total);
        }
        Ok(self.push(out, Op::SoftmaxRows(a, tau)))
    }

    pub fn mul_const_tensor(&mut self, a: NodeId, mask: Tensor<S>) -> Result<NodeId> {
        let va = &self.nodes[a.0].value;
        if !va.same_shape(&mask) {
            return Err(Error::shape(
                "mul_const_tensor",
                format!("{:?}", va.shape()),
                format!("{:?}", mask.shape()),
            ));
        }
        let mut value = va.clone();
        for (x, &m) in value.data_mut().iter_mut().zip(mask.data()) {
            *x *= m;
        }
        Ok(self.push(value, Op::MulConstTensor(a, mask)))
    }

    /// Reverse sweep from a scalar root; accumulates into leaf grads.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let rv = &self.nodes[root.0].value;
        if !rv.is_scalar() {
            return Err(Error::NonScalarRoot {
                rows: rv.rows(),
                cols: rv.cols(),
            });
        }
        // Intermediate grads are scratch for this sweep; only leaves
        // (Param / Constant) accumulate across calls.
        for node in self.nodes.iter_mut() {
            if !matches!(node.op, Op::Constant | Op::Param) {
                node.grad.fill(S::zero());
            }
        }
        {
            let g = self.nodes[root.0].grad.data_mut();
            g[0] += S::one();
        }
        for idx in (0..=root.0).rev() {
            // Split borrows: take the node's grad and op out, write into parents.
            let grad = std::mem::replace(&mut self.nodes[idx].grad, Tensor::zeros(0, 0));
            let op = std::mem::replace(&mut self.nodes[idx].op, Op::Constant);
            self.propagate(idx, &op, &grad);
            self.nodes[idx].op = op;
            self.nodes[idx].grad = grad;
        }
        Ok(())
    }

    fn propagate(&mut self, idx: usize, op: &Op<S>, g: &Tensor<S>) {
        match op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                // ga += g * b^T
                let gb_in = self.nodes[b.0].value.clone();
                let ga_in = self.nodes[a.0].value.clone();
                matmul_a_bt_into(&mut self.nodes[a.0].grad, g, &gb_in, true);
                matmul_at_b_into(&mut self.nodes[b.0].grad, &ga_in, g, true);
            }
            Op::AddRowBroadcast(a, bias) => {
                let (a, bias) = (*a, *bias);
                add_into(&mut self.nodes[a.0].grad, g);
                let gb = self.nodes[bias.0].grad.data_mut();
                for i in 0..g.rows() {
                    for (acc, &x) in gb.iter_mut().zip(g.row(i).iter()) {
                        *acc += x;
                    }
                }
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                add_into(&mut self.nodes[a.0].grad, g);
                add_into(&mut self.nodes[b.0].grad, g);
            }
            Op::Sub(a, b) => {
                let (a, b) = (*a, *b);
                add_into(&mut self.nodes[a.0].grad, g);
                sub_into(&mut self.nodes[b.0].grad, g);
            }
            Op::MulElem(a, b) => {
                let (a, b) = (*a, *b);
                let va = self.nodes[a.0].value.clone();
                let vb = self.nodes[b.0].value.clone();
                for ((ga, &gi), &x) in self.nodes[a.0].grad.data_mut().iter_mut().zip(g.data()).zip(vb.data()) {
                    *ga += gi * x;
                }
                for ((gb, &gi), &x) in self.nodes[b.0].grad.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                    *gb += gi * x;
                }
            }
            Op::Scale(a, c) => {
                let (a, c) = (*a, *c);
                for (ga, &gi) in self.nodes[a.0].grad.data_mut().iter_mut().zip(g.data()) {
                    *ga += gi * c;
                }
            }
            Op::AddScalar(a) => {
                add_into(&mut self.nodes[a.0].grad, g);
            }
            Op::Neg(a) => {
                sub_into(&mut self.nodes[a.0].grad, g);
            }
            Op::Relu(a) => {
                let a = *a;
                let va = self.nodes[a.0].value.clone();
                for ((ga, &gi), &x) in self.nodes[a.0].grad.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                    if x > S::zero() {
                        *ga += gi;
                    }
                }
            }
            Op::LeakyRelu(a, slope) => {
                let (a, slope) = (*a, *slope);
                let va = self.nodes[a.0].value.clone();
                for ((ga, &gi), &x) in self.nodes[a.0].grad.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                    *ga += if x > S::zero() { gi } else { gi * slope };
                }
            }
            Op::Sigmoid(a) => {
                let a = *a;
                let s = self.nodes[idx].value.clone();
                for ((ga, &gi), &si) in self.nodes[a.0].grad.data_mut().iter_mut().zip(g.data()).zip(s.data()) {
                    *ga += gi * si * (S::one() - si);
                }
            }
            Op::LnClamped(a, lo, hi) => {
                let (a, lo, hi) = (*a, *lo, *hi);
                let va = self.nodes[a.0].value.clone();
                for ((ga, &gi), &x) in self.nodes[a.0].grad.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                    if x > lo && x < hi {
                        *ga += gi / x;
                    }
                }
            }
            Op::Square(a) => {
                let a = *a;
                let va = self.nodes[a.0].value.clone();
                let two = S::c(2.0);
                for ((ga, &gi), &x) in self.nodes[a.0].grad.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                    *ga += two * gi * x;
                }
            }
            Op::SumAll(a) => {
                let a = *a;
                let gi = g.item();
                for ga in self.nodes[a.0].grad.data_mut() {
                    *ga += gi;
                }
            }
            Op::MeanRows(a) => {
                let a = *a;
                let n = self.nodes[a.0].value.rows();
                let inv = S::one() / S::c(n as f64);
                let grad = &mut self.nodes[a.0].grad;
                for i in 0..n {
                    for (ga, &gi) in grad.row_mut(i).iter_mut().zip(g.row(0).iter()) {
                        *ga += gi * inv;
                    }
                }
            }
            Op::SoftmaxRows(a, tau) => {
                let (a, tau) = (*a, *tau);
                let p = self.nodes[idx].value.clone();
                let grad = &mut self.nodes[a.0].grad;
                for i in 0..p.rows() {
                    let prow = p.row(i);
                    let grow = g.row(i);
                    let dot: S = prow.iter().zip(grow.iter()).map(|(&pi, &gi)| pi * gi).sum();
                    for ((ga, &pi), &gi) in grad.row_mut(i).iter_mut().zip(prow.iter()).zip(grow.iter()) {
                        *ga += pi * (gi - dot) / tau;
                    }
                }
            }
            Op::MulConstTensor(a, mask) => {
                let a = *a;
                for ((ga, &gi), &m) in self.nodes[a.0].grad.data_mut().iter_mut().zip(g.data()).zip(mask.data()) {
                    *ga += gi * m;
                }
            }
        }
    }
}

fn add_into<S: Scalar>(acc: &mut Tensor<S>, g: &Tensor<S>) {
    for (a, &x) in acc.data_mut().iter_mut().zip(g.data()) {
        *a += x;
    }
}

fn sub_into<S: Scalar>(acc: &mut Tensor<S>, g: &Tensor<S>) {
    for (a, &x) in acc.data_mut().iter_mut().zip(g.data()) {
        *a -= x;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_grad_at_one() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(1.0));
        let y = tape.ln_clamped(x, 1e-30, 1e30);
        tape.backward(y).unwrap();
        assert_relative_eq!(tape.grad(x).item(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sigmoid_grad_at_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.0));
        let y = tape.sigmoid(x);
        tape.backward(y).unwrap();
        assert_relative_eq!(tape.grad(x).item(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::<f64>::zeros(2, 2));
        assert!(matches!(tape.backward(x), Err(Error::NonScalarRoot { .. })));
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let y = tape.square(x);
        tape.backward(y).unwrap();
        tape.backward(y).unwrap();
        assert_relative_eq!(tape.grad(x).item(), 12.0, epsilon = 1e-12);
        tape.zero_grads();
        tape.backward(y).unwrap();
        assert_relative_eq!(tape.grad(x).item(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(2.0));
        let y = tape.param(Tensor::scalar(5.0));
        let p = tape.mul_elem(x, y).unwrap();
        tape.backward(p).unwrap();
        // Constant leaf grads still accumulate structurally but are never
        // applied; param grad is what matters.
        assert_relative_eq!(tape.grad(y).item(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn matmul_sum_grads_match_finite_differences() {
        let mut rng = crate::rng::SeededRng::new(11);
        let a0: Vec<f64> = (0..6).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let b0: Vec<f64> = (0..6).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let f = |a: &[f64], b: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let at = tape.param(Tensor::from_vec(3, 2, a.to_vec()).unwrap());
            let bt = tape.param(Tensor::from_vec(2, 3, b.to_vec()).unwrap());
            let c = tape.matmul(at, bt).unwrap();
            let s = tape.sum_all(c);
            tape.value(s).item()
        };
        let mut tape = Tape::new();
        let at = tape.param(Tensor::from_vec(3, 2, a0.clone()).unwrap());
        let bt = tape.param(Tensor::from_vec(2, 3, b0.clone()).unwrap());
        let c = tape.matmul(at, bt).unwrap();
        let s = tape.sum_all(c);
        tape.backward(s).unwrap();
        let h = 1e-5;
        for i in 0..6 {
            let mut ap = a0.clone();
            let mut am = a0.clone();
            ap[i] += h;
            am[i] -= h;
            let fd = (f(&ap, &b0) - f(&am, &b0)) / (2.0 * h);
            let an = tape.grad(at).data()[i];
            assert_relative_eq!(an, fd, max_relative = 1e-4, epsilon = 1e-8);
        }
        for i in 0..6 {
            let mut bp = b0.clone();
            let mut bm = b0.clone();
            bp[i] += h;
            bm[i] -= h;
            let fd = (f(&a0, &bp) - f(&a0, &bm)) / (2.0 * h);
            let an = tape.grad(bt).data()[i];
            assert_relative_eq!(an, fd, max_relative = 1e-4, epsilon = 1e-8);
        }
    }
}
