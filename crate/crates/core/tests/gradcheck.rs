//! Property-based gradient checking: random small networks composed from the
//! tape's operation set, with every parameter entry validated against central
//! finite differences of the re-evaluated loss.

use mcl_gan::tape::Tape;
use mcl_gan::tensor::Tensor;
use proptest::prelude::*;

#[derive(Clone, Copy, Debug)]
enum Act {
    Leaky,
    Sigmoid,
    Relu,
}

#[derive(Clone, Copy, Debug)]
enum Head {
    SquareSum,
    LogProbSum,
    SoftmaxMasked,
    MeanRowsLog,
    ElemMixture,
}

#[derive(Clone, Debug)]
struct Graph {
    n: usize,
    d: usize,
    h: usize,
    m: usize,
    act: Act,
    head: Head,
    tau: f64,
    x: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    mask: Vec<bool>,
}

/// Evaluate the graph's scalar loss and (optionally) the gradients of every
/// parameter leaf. Evaluation path is identical either way, so finite
/// differences of `eval` are an independent oracle for `backward`.
fn eval(g: &Graph, params: &[Vec<f64>], want_grads: bool) -> (f64, Vec<Vec<f64>>) {
    let mut tape = Tape::<f64>::new();
    let x = tape.param(Tensor::from_vec(g.n, g.d, params[0].clone()).unwrap());
    let w1 = tape.param(Tensor::from_vec(g.d, g.h, params[1].clone()).unwrap());
    let b1 = tape.param(Tensor::from_vec(1, g.h, params[2].clone()).unwrap());
    let w2 = tape.param(Tensor::from_vec(g.h, g.m, params[3].clone()).unwrap());

    let pre = tape.matmul(x, w1).unwrap();
    let pre = tape.add_row_broadcast(pre, b1).unwrap();
    let hid = match g.act {
        Act::Leaky => tape.leaky_relu(pre, 0.2),
        Act::Sigmoid => tape.sigmoid(pre),
        Act::Relu => tape.relu(pre),
    };
    let logits = tape.matmul(hid, w2).unwrap();

    let mask = Tensor::from_vec(
        g.n,
        g.m,
        g.mask.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect(),
    )
    .unwrap();
    let loss = match g.head {
        Head::SquareSum => {
            let s = tape.sigmoid(logits);
            let sq = tape.square(s);
            tape.sum_all(sq)
        }
        Head::LogProbSum => {
            let s = tape.sigmoid(logits);
            let ln = tape.ln_prob(s);
            let total = tape.sum_all(ln);
            tape.neg(total)
        }
        Head::SoftmaxMasked => {
            let sm = tape.softmax_rows(logits, g.tau).unwrap();
            let ln = tape.ln_prob(sm);
            let masked = tape.mul_const_tensor(ln, mask).unwrap();
            let total = tape.sum_all(masked);
            tape.neg(total)
        }
        Head::MeanRowsLog => {
            let s = tape.sigmoid(logits);
            let q = tape.mean_rows(s);
            let ln = tape.ln_prob(q);
            let total = tape.sum_all(ln);
            tape.scale(total, -0.5)
        }
        Head::ElemMixture => {
            let sq = tape.mul_elem(logits, logits).unwrap();
            let shifted = tape.add_scalar(logits, 0.3);
            let diff = tape.sub(sq, shifted).unwrap();
            let masked = tape.mul_const_tensor(diff, mask).unwrap();
            tape.mean_all(masked)
        }
    };
    let value = tape.value(loss).item();
    if !want_grads {
        return (value, Vec::new());
    }
    tape.backward(loss).unwrap();
    let grads = [x, w1, b1, w2]
        .iter()
        .map(|&id| tape.grad(id).data().to_vec())
        .collect();
    (value, grads)
}

/// Pre-activations of the hidden layer, used to reject configurations near a
/// piecewise-linear kink where finite differences are invalid.
fn preactivations(g: &Graph) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.n * g.h);
    for i in 0..g.n {
        for j in 0..g.h {
            let mut acc = g.b1[j];
            for t in 0..g.d {
                acc += g.x[i * g.d + t] * g.w1[t * g.h + j];
            }
            out.push(acc);
        }
    }
    out
}

fn vec_in(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (1usize..4, 1usize..4, 1usize..4, 1usize..4)
        .prop_flat_map(|(n, d, h, m)| {
            (
                Just((n, d, h, m)),
                prop_oneof![Just(Act::Leaky), Just(Act::Sigmoid), Just(Act::Relu)],
                prop_oneof![
                    Just(Head::SquareSum),
                    Just(Head::LogProbSum),
                    Just(Head::SoftmaxMasked),
                    Just(Head::MeanRowsLog),
                    Just(Head::ElemMixture),
                ],
                0.5f64..2.0,
                vec_in(n * d, -1.5, 1.5),
                vec_in(d * h, -1.0, 1.0),
                vec_in(h, -0.5, 0.5),
                vec_in(h * m, -1.0, 1.0),
                prop::collection::vec(any::<bool>(), n * m),
            )
        })
        .prop_map(|((n, d, h, m), act, head, tau, x, w1, b1, w2, mask)| Graph {
            n,
            d,
            h,
            m,
            act,
            head,
            tau,
            x,
            w1,
            b1,
            w2,
            mask,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn backward_matches_central_finite_differences(g in graph_strategy()) {
        // Piecewise activations: stay away from the kink so the numeric
        // derivative is well defined.
        if matches!(g.act, Act::Leaky | Act::Relu) {
            prop_assume!(preactivations(&g).iter().all(|p| p.abs() > 1e-3));
        }
        let params = vec![g.x.clone(), g.w1.clone(), g.b1.clone(), g.w2.clone()];
        let (value, grads) = eval(&g, &params, true);
        prop_assert!(value.is_finite());

        let eps = 1e-5;
        for (pi, p) in params.iter().enumerate() {
            for j in 0..p.len() {
                let mut plus = params.clone();
                plus[pi][j] += eps;
                let mut minus = params.clone();
                minus[pi][j] -= eps;
                let (fp, _) = eval(&g, &plus, false);
                let (fm, _) = eval(&g, &minus, false);
                let numeric = (fp - fm) / (2.0 * eps);
                let analytic = grads[pi][j];
                let tol = 1e-4 * analytic.abs().max(numeric.abs()).max(1.0);
                prop_assert!(
                    (numeric - analytic).abs() <= tol,
                    "param {pi} entry {j}: analytic {analytic} vs numeric {numeric} ({:?} / {:?})",
                    g.act,
                    g.head
                );
            }
        }
    }
}
