//! Generator MLP and the shared-trunk multi-head discriminator.
//!
//! The discriminator shares every feature-extraction layer across heads and
//! branches only the final scalar layer: head weights live in a single
//! `feature_dim x M` matrix, so one trunk evaluation serves all heads.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Linear,
}

#[derive(Clone, Debug)]
pub struct Layer<S> {
    pub w: Tensor<S>,
    pub b: Tensor<S>,
    pub act: Activation,
}

#[derive(Clone, Debug)]
pub struct Mlp<S> {
    pub layers: Vec<Layer<S>>,
}

/// Tape handles for one network's parameters, in `param_tensors` order.
pub struct TapeParams {
    pub ids: Vec<NodeId>,
}

impl<S: Scalar> Mlp<S> {
    /// Kaiming-style uniform fan-in init (limit sqrt(6 / fan_in)), zero biases.
    pub fn new(dims: &[usize], acts: &[Activation], rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 || acts.len() != dims.len() - 1 {
            return Err(Error::invalid(format!(
                "MLP needs dims (>= 2) and one activation per layer, got {} dims / {} acts",
                dims.len(),
                acts.len()
            )));
        }
        let mut layers = Vec::with_capacity(acts.len());
        for (i, &act) in acts.iter().enumerate() {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let data: Vec<S> = (0..fan_in * fan_out)
                .map(|_| S::c(rng.uniform_in(-limit, limit)))
                .collect();
            layers.push(Layer {
                w: Tensor::from_vec(fan_in, fan_out, data)?,
                b: Tensor::zeros(1, fan_out),
                act,
            });
        }
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.cols()
    }

    /// Plain forward pass without gradient tracking.
    pub fn eval(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("Mlp::eval", format!("{} cols", self.input_dim()), format!("{}", x.cols())));
        }
        let mut h = x.matmul(&self.layers[0].w)?;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = h.matmul(&layer.w)?;
            }
            for r in 0..h.rows() {
                for (v, &b) in h.row_mut(r).iter_mut().zip(layer.b.row(0).iter()) {
                    *v += b;
                }
            }
            h = apply_activation(h, layer.act);
        }
        Ok(h)
    }

    pub fn insert_params(&self, tape: &mut Tape<S>, trainable: bool) -> TapeParams {
        let mut ids = Vec::with_capacity(self.layers.len() * 2);
        for layer in &self.layers {
            for t in [&layer.w, &layer.b] {
                ids.push(if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                });
            }
        }
        TapeParams { ids }
    }

    pub fn forward(&self, tape: &mut Tape<S>, params: &TapeParams, x: NodeId) -> Result<NodeId> {
        if tape.value(x).cols() != self.input_dim() {
            return Err(Error::shape(
                "Mlp::forward",
                format!("{} cols", self.input_dim()),
                format!("{}", tape.value(x).cols()),
            ));
        }
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = params.ids[2 * i];
            let b = params.ids[2 * i + 1];
            h = tape.matmul(h, w)?;
            h = tape.add_row_broadcast(h, b)?;
            h = match layer.act {
                Activation::Relu => tape.relu(h),
                Activation::LeakyRelu(slope) => tape.leaky_relu(h, S::c(slope)),
                Activation::Linear => h,
            };
        }
        Ok(h)
    }

    pub fn param_tensors(&self) -> Vec<&Tensor<S>> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

fn apply_activation<S: Scalar>(mut h: Tensor<S>, act: Activation) -> Tensor<S> {
    match act {
        Activation::Relu => {
            h.data_mut().iter_mut().for_each(|x| *x = x.max(S::zero()));
        }
        Activation::LeakyRelu(slope) => {
            let s = S::c(slope);
            h.data_mut().iter_mut().for_each(|x| {
                if *x < S::zero() {
                    *x = *x * s;
                }
            });
        }
        Activation::Linear => {}
    }
    h
}

/// Latent -> data-space MLP (hidden ReLU, linear output).
#[derive(Clone, Debug)]
pub struct GeneratorNet<S> {
    pub mlp: Mlp<S>,
}

impl<S: Scalar> GeneratorNet<S> {
    pub fn new(d_z: usize, hidden: &[usize], d_x: usize, rng: &mut SeededRng) -> Result<Self> {
        let mut dims = vec![d_z];
        dims.extend_from_slice(hidden);
        dims.push(d_x);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Linear);
        Ok(GeneratorNet {
            mlp: Mlp::new(&dims, &acts, rng)?,
        })
    }

    pub fn d_z(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn d_x(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn eval(&self, z: &Tensor<S>) -> Result<Tensor<S>> {
        self.mlp.eval(z)
    }

    pub fn forward(&self, tape: &mut Tape<S>, params: &TapeParams, z: NodeId) -> Result<NodeId> {
        self.mlp.forward(tape, params, z)
    }

    pub fn insert_params(&self, tape: &mut Tape<S>, trainable: bool) -> TapeParams {
        self.mlp.insert_params(tape, trainable)
    }

    pub fn param_tensors(&self) -> Vec<&Tensor<S>> {
        self.mlp.param_tensors()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.mlp.param_tensors_mut()
    }
}

/// Shared trunk (LeakyReLU feature MLP) plus M scalar heads stored as the
/// columns of a single `feature_dim x M` matrix.
#[derive(Clone, Debug)]
pub struct MultiDiscriminator<S> {
    pub trunk: Mlp<S>,
    pub head_w: Tensor<S>,
    pub head_b: Tensor<S>,
}

/// Forward outputs of the discriminator bank on a batch.
pub struct DiscForward {
    pub logits: NodeId,
    pub scores: NodeId,
}

impl<S: Scalar> MultiDiscriminator<S> {
    pub fn new(d_x: usize, hidden: &[usize], heads: usize, leaky_slope: f64, rng: &mut SeededRng) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::invalid("discriminator trunk needs at least one hidden layer"));
        }
        if heads == 0 {
            return Err(Error::invalid("discriminator needs at least one head"));
        }
        let mut dims = vec![d_x];
        dims.extend_from_slice(hidden);
        let acts = vec![Activation::LeakyRelu(leaky_slope); hidden.len()];
        let trunk = Mlp::new(&dims, &acts, rng)?;
        let feature_dim = *hidden.last().unwrap();
        let limit = (6.0 / feature_dim as f64).sqrt();
        let data: Vec<S> = (0..feature_dim * heads)
            .map(|_| S::c(rng.uniform_in(-limit, limit)))
            .collect();
        Ok(MultiDiscriminator {
            trunk,
            head_w: Tensor::from_vec(feature_dim, heads, data)?,
            head_b: Tensor::zeros(1, heads),
        })
    }

    pub fn heads(&self) -> usize {
        self.head_w.cols()
    }

    pub fn d_x(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.head_w.len() + self.head_b.len()
    }

    /// Per-head logits without gradient tracking.
    pub fn eval_logits(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let features = self.trunk.eval(x)?;
        let mut logits = features.matmul(&self.head_w)?;
        for r in 0..logits.rows() {
            for (v, &b) in logits.row_mut(r).iter_mut().zip(self.head_b.row(0).iter()) {
                *v += b;
            }
        }
        Ok(logits)
    }

    pub fn insert_params(&self, tape: &mut Tape<S>, trainable: bool) -> TapeParams {
        let mut params = self.trunk.insert_params(tape, trainable);
        for t in [&self.head_w, &self.head_b] {
            params.ids.push(if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            });
        }
        params
    }

    /// One trunk evaluation shared by all heads; scores = sigmoid(logits).
    pub fn forward(&self, tape: &mut Tape<S>, params: &TapeParams, x: NodeId) -> Result<DiscForward> {
        let trunk_params = TapeParams {
            ids: params.ids[..params.ids.len() - 2].to_vec(),
        };
        let features = self.trunk.forward(tape, &trunk_params, x)?;
        let hw = params.ids[params.ids.len() - 2];
        let hb = params.ids[params.ids.len() - 1];
        let pre = tape.matmul(features, hw)?;
        let logits = tape.add_row_broadcast(pre, hb)?;
        let scores = tape.sigmoid(logits);
        Ok(DiscForward { logits, scores })
    }

    pub fn param_tensors(&self) -> Vec<&Tensor<S>> {
        let mut v = self.trunk.param_tensors();
        v.push(&self.head_w);
        v.push(&self.head_b);
        v
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut v = self.trunk.param_tensors_mut();
        v.push(&mut self.head_w);
        v.push(&mut self.head_b);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rng() -> SeededRng {
        SeededRng::new(123)
    }

    #[test]
    fn generator_shape_and_determinism() {
        let gen = GeneratorNet::<f64>::new(2, &[16, 16], 2, &mut rng()).unwrap();
        let mut r = SeededRng::new(5);
        let z = Tensor::from_vec(4, 2, (0..8).map(|_| r.standard_normal()).collect()).unwrap();
        let a = gen.eval(&z).unwrap();
        let b = gen.eval(&z).unwrap();
        assert_eq!(a.shape(), (4, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn generator_rejects_dimension_mismatch() {
        let gen = GeneratorNet::<f64>::new(2, &[8], 2, &mut rng()).unwrap();
        let z = Tensor::<f64>::zeros(3, 5);
        assert!(gen.eval(&z).is_err());
    }

    #[test]
    fn scores_are_sigmoid_of_logits() {
        let disc = MultiDiscriminator::<f64>::new(2, &[16], 4, 0.2, &mut rng()).unwrap();
        let mut r = SeededRng::new(9);
        let x = Tensor::from_vec(5, 2, (0..10).map(|_| r.uniform_in(-2.0, 2.0)).collect()).unwrap();
        let mut tape = Tape::new();
        let params = disc.insert_params(&mut tape, false);
        let xid = tape.constant(x);
        let out = disc.forward(&mut tape, &params, xid).unwrap();
        let logits = tape.value(out.logits).clone();
        let scores = tape.value(out.scores).clone();
        for (l, s) in logits.data().iter().zip(scores.data()) {
            assert!(*s > 0.0 && *s < 1.0);
            assert_relative_eq!(*s, 1.0 / (1.0 + (-l).exp()), epsilon = 1e-9);
        }
    }

    #[test]
    fn zeroed_head_gives_neutral_score_and_leaves_others_alone() {
        let mut disc = MultiDiscriminator::<f64>::new(2, &[16], 4, 0.2, &mut rng()).unwrap();
        let mut r = SeededRng::new(10);
        let x = Tensor::from_vec(3, 2, (0..6).map(|_| r.uniform_in(-2.0, 2.0)).collect()).unwrap();
        let before = disc.eval_logits(&x).unwrap();
        for i in 0..disc.head_w.rows() {
            disc.head_w.set(i, 2, 0.0);
        }
        disc.head_b.set(0, 2, 0.0);
        let after = disc.eval_logits(&x).unwrap();
        for row in 0..3 {
            assert_relative_eq!(after.get(row, 2), 0.0, epsilon = 1e-12);
            for m in [0usize, 1, 3] {
                assert_eq!(before.get(row, m), after.get(row, m));
            }
        }
    }

    #[test]
    fn head_perturbation_is_isolated() {
        let mut disc = MultiDiscriminator::<f64>::new(2, &[16, 16], 5, 0.2, &mut rng()).unwrap();
        let mut r = SeededRng::new(11);
        let x = Tensor::from_vec(6, 2, (0..12).map(|_| r.uniform_in(-2.0, 2.0)).collect()).unwrap();
        let before = disc.eval_logits(&x).unwrap();
        let target = 3;
        for i in 0..disc.head_w.rows() {
            let v = disc.head_w.get(i, target);
            disc.head_w.set(i, target, v + r.uniform_in(-0.5, 0.5));
        }
        let after = disc.eval_logits(&x).unwrap();
        for row in 0..6 {
            for m in 0..5 {
                if m == target {
                    continue;
                }
                assert_eq!(before.get(row, m), after.get(row, m), "head {m} changed");
            }
        }
    }

    #[test]
    fn trunk_perturbation_moves_all_heads() {
        let mut disc = MultiDiscriminator::<f64>::new(2, &[16], 3, 0.2, &mut rng()).unwrap();
        let mut r = SeededRng::new(12);
        let x = Tensor::from_vec(4, 2, (0..8).map(|_| r.uniform_in(-2.0, 2.0)).collect()).unwrap();
        let before = disc.eval_logits(&x).unwrap();
        for t in disc.trunk.param_tensors_mut() {
            for v in t.data_mut() {
                *v += 0.05;
            }
        }
        let after = disc.eval_logits(&x).unwrap();
        for m in 0..3 {
            let moved = (0..4).any(|row| before.get(row, m) != after.get(row, m));
            assert!(moved, "head {m} untouched by trunk change");
        }
    }

    #[test]
    fn param_count_grows_per_head_by_feature_dim_plus_one() {
        let mut r1 = rng();
        let mut r2 = rng();
        let d5 = MultiDiscriminator::<f64>::new(2, &[32, 16], 5, 0.2, &mut r1).unwrap();
        let d6 = MultiDiscriminator::<f64>::new(2, &[32, 16], 6, 0.2, &mut r2).unwrap();
        assert_eq!(d6.param_count() - d5.param_count(), d5.feature_dim() + 1);
    }

    #[test]
    fn trunk_evaluated_once_per_batch() {
        // The full forward emits exactly (trunk layers + head) matmuls; head
        // count does not multiply tape size.
        let disc_small = MultiDiscriminator::<f64>::new(2, &[16], 2, 0.2, &mut rng()).unwrap();
        let disc_large = MultiDiscriminator::<f64>::new(2, &[16], 12, 0.2, &mut rng()).unwrap();
        let x = Tensor::<f64>::zeros(3, 2);
        let count_nodes = |disc: &MultiDiscriminator<f64>| {
            let mut tape = Tape::new();
            let params = disc.insert_params(&mut tape, false);
            let xid = tape.constant(x.clone());
            disc.forward(&mut tape, &params, xid).unwrap();
            tape.len()
        };
        assert_eq!(count_nodes(&disc_small), count_nodes(&disc_large));
    }
}
