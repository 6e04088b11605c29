//! Network components and their parameters.
//!
//! Parameter structs are generic over their storage: `T = Tensor` holds
//! values, `T = Var<'t>` holds the same parameters bound to a tape.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var, NORM_EPS};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::tensor::Tensor;

/// Affine map `x W + b` with `W: in x out`, `b: 1 x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear<T = Tensor> {
    pub weight: T,
    pub bias: T,
}

/// Two-layer graph convolution `Ã relu(Ã X W0) W1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams<T = Tensor> {
    pub w0: T,
    pub w1: T,
}

/// Three affine layers `d_z -> h -> h -> d_z` with ReLU in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams<T = Tensor> {
    pub layers: [Linear<T>; 3],
}

/// `d_z -> h -> 1` with ReLU in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorParams<T = Tensor> {
    pub hidden: Linear<T>,
    pub out: Linear<T>,
}

/// Single affine layer `d_z -> classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams<T = Tensor> {
    pub linear: Linear<T>,
}

/// Uniform traversal over the parameter leaves of a component, in a fixed
/// order shared by every storage type.
pub trait Params {
    type Item;
    type With<U>;

    fn leaves(&self) -> Vec<&Self::Item>;
    fn leaves_mut(&mut self) -> Vec<&mut Self::Item>;
    fn map<U>(&self, f: &mut impl FnMut(&Self::Item) -> U) -> Self::With<U>;
}

impl<T> Params for Linear<T> {
    type Item = T;
    type With<U> = Linear<U>;

    fn leaves(&self) -> Vec<&T> {
        vec![&self.weight, &self.bias]
    }

    fn leaves_mut(&mut self) -> Vec<&mut T> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Linear<U> {
        Linear {
            weight: f(&self.weight),
            bias: f(&self.bias),
        }
    }
}

impl<T> Params for EncoderParams<T> {
    type Item = T;
    type With<U> = EncoderParams<U>;

    fn leaves(&self) -> Vec<&T> {
        vec![&self.w0, &self.w1]
    }

    fn leaves_mut(&mut self) -> Vec<&mut T> {
        vec![&mut self.w0, &mut self.w1]
    }

    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> EncoderParams<U> {
        EncoderParams {
            w0: f(&self.w0),
            w1: f(&self.w1),
        }
    }
}

impl<T> Params for PredictorParams<T> {
    type Item = T;
    type With<U> = PredictorParams<U>;

    fn leaves(&self) -> Vec<&T> {
        self.layers.iter().flat_map(Params::leaves).collect()
    }

    fn leaves_mut(&mut self) -> Vec<&mut T> {
        self.layers
            .iter_mut()
            .flat_map(Params::leaves_mut)
            .collect()
    }

    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> PredictorParams<U> {
        let [a, b, c] = &self.layers;
        PredictorParams {
            layers: [a.map(f), b.map(f), c.map(f)],
        }
    }
}

impl<T> Params for DiscriminatorParams<T> {
    type Item = T;
    type With<U> = DiscriminatorParams<U>;

    fn leaves(&self) -> Vec<&T> {
        let mut v = self.hidden.leaves();
        v.extend(self.out.leaves());
        v
    }

    fn leaves_mut(&mut self) -> Vec<&mut T> {
        let mut v = self.hidden.leaves_mut();
        v.extend(self.out.leaves_mut());
        v
    }

    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> DiscriminatorParams<U> {
        DiscriminatorParams {
            hidden: self.hidden.map(f),
            out: self.out.map(f),
        }
    }
}

impl<T> Params for ClassifierParams<T> {
    type Item = T;
    type With<U> = ClassifierParams<U>;

    fn leaves(&self) -> Vec<&T> {
        self.linear.leaves()
    }

    fn leaves_mut(&mut self) -> Vec<&mut T> {
        self.linear.leaves_mut()
    }

    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> ClassifierParams<U> {
        ClassifierParams {
            linear: self.linear.map(f),
        }
    }
}

/// Records every leaf of `params` on `tape`, as trainable parameters or
/// as constants.
pub fn bind<'t, P>(params: &P, tape: &'t Tape, trainable: bool) -> P::With<Var<'t>>
where
    P: Params<Item = Tensor>,
{
    params.map(&mut |t: &Tensor| {
        if trainable {
            tape.param(t.clone())
        } else {
            tape.constant(t.clone())
        }
    })
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect();
    Tensor::new(rows, cols, data).expect("shape matches data length")
}

impl Linear {
    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: glorot(fan_in, fan_out, rng),
            bias: Tensor::zeros(1, fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(fan_in, fan_out),
            bias: Tensor::zeros(1, fan_out),
        }
    }
}

impl<'t> Linear<Var<'t>> {
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(self.weight)?.add_row(self.bias)
    }
}

/// Layer widths of the whole model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub embed: usize,
    pub predictor_hidden: usize,
    pub disc_hidden: usize,
    pub classes: usize,
}

/// Every parameter set of the model. The target encoder is only ever
/// changed by [`ema_update`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub online: EncoderParams,
    pub target: EncoderParams,
    pub predictor: PredictorParams,
    pub discriminator: DiscriminatorParams,
    pub classifier: ClassifierParams,
}

impl ModelState {
    /// Glorot-uniform weights and zero biases; the target starts as an
    /// exact copy of the online encoder.
    pub fn init(dims: ModelDims, rng: &mut ChaCha8Rng) -> Self {
        let online = EncoderParams {
            w0: glorot(dims.input, dims.hidden, rng),
            w1: glorot(dims.hidden, dims.embed, rng),
        };
        let predictor = PredictorParams {
            layers: [
                Linear::glorot(dims.embed, dims.predictor_hidden, rng),
                Linear::glorot(dims.predictor_hidden, dims.predictor_hidden, rng),
                Linear::glorot(dims.predictor_hidden, dims.embed, rng),
            ],
        };
        let discriminator = DiscriminatorParams {
            hidden: Linear::glorot(dims.embed, dims.disc_hidden, rng),
            out: Linear::glorot(dims.disc_hidden, 1, rng),
        };
        let classifier = ClassifierParams {
            linear: Linear::glorot(dims.embed, dims.classes, rng),
        };
        Self {
            target: online.clone(),
            online,
            predictor,
            discriminator,
            classifier,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.online.w0.rows(),
            hidden: self.online.w0.cols(),
            embed: self.online.w1.cols(),
            predictor_hidden: self.predictor.layers[0].weight.cols(),
            disc_hidden: self.discriminator.hidden.weight.cols(),
            classes: self.classifier.linear.weight.cols(),
        }
    }
}

/// Column-centers `h`, then rescales it to Frobenius norm `s * sqrt(n)`.
/// The norm is clamped at `1e-12`, so a constant input maps to zero.
pub fn pairnorm<'t>(h: Var<'t>, s: f64) -> Result<Var<'t>> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::Domain {
            context: "pairnorm",
            msg: format!("scale must be positive, got {s}"),
        });
    }
    let n = h.shape()[0] as f64;
    let centered = h.sub_row(h.mean_rows()?)?;
    Ok(centered.frobenius_normalize(NORM_EPS)?.scale(s * n.sqrt()))
}

/// `Z = PairNorm(Ã relu(Ã X W0) W1)` with PairNorm scale 1.
pub fn encode<'t>(
    params: &EncoderParams<Var<'t>>,
    adj: &NormalizedAdjacency,
    x: Var<'t>,
) -> Result<Var<'t>> {
    let [n, d] = x.shape();
    let [w_in, _] = params.w0.shape();
    if d != w_in || adj.matrix.n_cols() != n {
        return Err(Error::dim(
            "encode",
            format!(
                "features {n}x{d}, W0 expects width {w_in}, adjacency {}x{}",
                adj.matrix.n_rows(),
                adj.matrix.n_cols()
            ),
        ));
    }
    let h1 = x.matmul(params.w0)?.sparse_left_matmul(&adj.matrix)?.relu();
    let h2 = h1.matmul(params.w1)?.sparse_left_matmul(&adj.matrix)?;
    pairnorm(h2, 1.0)
}

/// Forward of the three-layer predictor on embedding rows.
pub fn predict_context<'t>(params: &PredictorParams<Var<'t>>, z: Var<'t>) -> Result<Var<'t>> {
    let [a, b, c] = &params.layers;
    let h = a.forward(z)?.relu();
    let h = b.forward(h)?.relu();
    c.forward(h)
}

/// Per-node log-degree prediction, `n x 1`. With `reverse` the embeddings
/// first pass a gradient-reversal node of strength `alpha`.
pub fn discriminate_degree<'t>(
    params: &DiscriminatorParams<Var<'t>>,
    z: Var<'t>,
    alpha: f64,
    reverse: bool,
) -> Result<Var<'t>> {
    let input = if reverse { z.grl(alpha)? } else { z };
    let h = params.hidden.forward(input)?.relu();
    params.out.forward(h)
}

pub fn classify<'t>(params: &ClassifierParams<Var<'t>>, z: Var<'t>) -> Result<Var<'t>> {
    params.linear.forward(z)
}

/// `target <- lambda * target + (1 - lambda) * online`, elementwise.
pub fn ema_update(target: &mut EncoderParams, online: &EncoderParams, lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(
            "ema_lambda",
            format!("must lie in [0, 1], got {lambda}"),
        ));
    }
    for (t, o) in target.leaves_mut().into_iter().zip(online.leaves()) {
        if t.shape() != o.shape() {
            return Err(Error::dim(
                "ema_update",
                format!("target {:?} vs online {:?}", t.shape(), o.shape()),
            ));
        }
        for (x, &y) in t.data_mut().iter_mut().zip(o.data()) {
            *x = lambda * *x + (1.0 - lambda) * y;
        }
    }
    Ok(())
}
