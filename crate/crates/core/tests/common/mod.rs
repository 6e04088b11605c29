#![allow(dead_code)]

pub mod kernels;

use fairgraph::autodiff::{Tape, Var};
use fairgraph::graph::{
    generate_biased_graph, normalized_adjacency, partition_nodes, split_nodes, GeneratorConfig,
    Graph, GroupPartition, NormalizedAdjacency, PartitionBasis,
};
use fairgraph::model::{
    classify, discriminate_degree, encode, predict_context, ClassifierParams, DiscriminatorParams,
    EncoderParams, Linear, ModelDims, ModelState, Params, PredictorParams,
};
use fairgraph::objectives::{
    loss_adversarial, loss_asym_contrastive, loss_group_balanced, loss_pre, loss_total,
    loss_uniformity, LossBundle, LossWeights,
};
use fairgraph::rng::{substream, Stream};
use fairgraph::tensor::Tensor;
use fairgraph::train::{sample_negatives, sample_neighbors};
use rand::Rng;

/// A small labeled graph with frozen samples, ready for one loss evaluation.
pub struct Fixture {
    pub graph: Graph,
    pub adj: NormalizedAdjacency,
    pub nbrs: Vec<Vec<usize>>,
    pub negs: Vec<Vec<usize>>,
    pub train: Vec<usize>,
    pub groups: GroupPartition,
    pub degrees: Vec<usize>,
    pub model: ModelState,
    pub seed: u64,
}

pub fn fixture(seed: u64, n: usize) -> Fixture {
    let cfg = GeneratorConfig {
        num_classes: 3,
        feature_dim: 4,
        ..GeneratorConfig::new(n, 2.5, 0.8, seed)
    };
    let graph = generate_biased_graph(&cfg).unwrap();
    let adj = normalized_adjacency(&graph, true);
    let mut rng = substream(seed, Stream::Sampling(0));
    let nbrs = sample_neighbors(&graph, Some(3), &mut rng).unwrap();
    let negs = sample_negatives(&graph, 4, &mut rng).unwrap().lists;
    let train = split_nodes(&graph, seed).unwrap().train;
    let groups = partition_nodes(&graph, PartitionBasis::DegreeQuantile, 2, &train).unwrap();
    let dims = ModelDims {
        input: 4,
        hidden: 5,
        embed: 4,
        predictor_hidden: 5,
        disc_hidden: 3,
        classes: 3,
    };
    let mut model = ModelState::init(dims, &mut substream(seed, Stream::Init));
    // Give the target its own weights so online and target paths differ.
    let other = ModelState::init(dims, &mut substream(seed + 1000, Stream::Init));
    model.target = other.online;
    // Nonzero biases exercise the bias adjoints.
    let mut rng = substream(seed, Stream::Uniformity(9));
    let mut biases: Vec<&mut Tensor> = model
        .predictor
        .layers
        .iter_mut()
        .map(|l| &mut l.bias)
        .collect();
    biases.push(&mut model.discriminator.hidden.bias);
    biases.push(&mut model.discriminator.out.bias);
    biases.push(&mut model.classifier.linear.bias);
    for b in biases {
        b.data_mut()
            .iter_mut()
            .for_each(|x| *x = rng.random_range(-0.1..0.1));
    }
    let degrees = graph.degrees();
    Fixture {
        graph,
        adj,
        nbrs,
        negs,
        train,
        groups,
        degrees,
        model,
        seed,
    }
}

/// Trainable tensors in the order used by [`unpack`]: online encoder,
/// predictor, classifier, discriminator.
pub fn trainable(m: &ModelState) -> Vec<Tensor> {
    let mut v: Vec<Tensor> = m.online.leaves().into_iter().cloned().collect();
    v.extend(m.predictor.leaves().into_iter().cloned());
    v.extend(m.classifier.leaves().into_iter().cloned());
    v.extend(m.discriminator.leaves().into_iter().cloned());
    v
}

pub struct Bound<'t> {
    pub online: EncoderParams<Var<'t>>,
    pub predictor: PredictorParams<Var<'t>>,
    pub classifier: ClassifierParams<Var<'t>>,
    pub disc: DiscriminatorParams<Var<'t>>,
}

fn lin<'t>(v: &[Var<'t>]) -> Linear<Var<'t>> {
    Linear {
        weight: v[0],
        bias: v[1],
    }
}

pub fn unpack<'t>(v: &[Var<'t>]) -> Bound<'t> {
    assert_eq!(v.len(), 14);
    Bound {
        online: EncoderParams { w0: v[0], w1: v[1] },
        predictor: PredictorParams {
            layers: [lin(&v[2..4]), lin(&v[4..6]), lin(&v[6..8])],
        },
        classifier: ClassifierParams {
            linear: lin(&v[8..10]),
        },
        disc: DiscriminatorParams {
            hidden: lin(&v[10..12]),
            out: lin(&v[12..14]),
        },
    }
}

/// Every loss term on `tape` from the 14 trainable vars. `reverse` routes
/// the adversarial term through gradient reversal.
pub fn losses<'t>(
    tape: &'t Tape,
    vars: &[Var<'t>],
    fx: &Fixture,
    weights: LossWeights,
    alpha: f64,
    reverse: bool,
) -> LossBundle<'t> {
    let b = unpack(vars);
    let target = EncoderParams {
        w0: tape.constant(fx.model.target.w0.clone()),
        w1: tape.constant(fx.model.target.w1.clone()),
    };
    let x = tape.constant(fx.graph.features().clone());
    let z = encode(&b.online, &fx.adj, x).unwrap();
    let zt = encode(&target, &fx.adj, x).unwrap();
    let p = predict_context(&b.predictor, z).unwrap();
    let l1 = loss_asym_contrastive(z, zt, p, &fx.nbrs, &fx.negs, 0.7).unwrap();
    let d_hat = discriminate_degree(&b.disc, z, alpha, reverse).unwrap();
    let l2 = loss_adversarial(d_hat, &fx.degrees).unwrap();
    let logits = classify(&b.classifier, z).unwrap();
    let l3 = loss_group_balanced(logits, fx.graph.labels(), &fx.groups, &fx.train).unwrap();
    let l_pre = loss_pre(p, zt, &fx.nbrs).unwrap();
    let l_uni = loss_uniformity(z, &mut substream(fx.seed, Stream::Uniformity(0))).unwrap();
    loss_total(l1, l2, l3, l_pre, l_uni, weights).unwrap()
}

pub fn weights(lambda1: f64, lambda2: f64) -> LossWeights {
    LossWeights {
        lambda1,
        lambda2,
        uniformity: 0.0,
    }
}
