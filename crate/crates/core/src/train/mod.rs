//! Alternating discriminator / encoder training with a moving-average
//! target encoder.
//!
//! Each epoch draws fresh positive and negative samples and then:
//! 1. updates the degree discriminator on the adversarial loss, with every
//!    other component frozen;
//! 2. updates the online encoder, predictor and classifier on the total
//!    loss, with the discriminator frozen and the adversarial term flowing
//!    back through gradient reversal;
//! 3. moves the target encoder towards the online one.

mod checkpoint;
mod config;
mod optim;
mod sampling;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{ClassifierMode, TrainConfig};
pub use optim::Adam;
pub use sampling::{sample_negatives, sample_neighbors, Negatives};

use log::{debug, info};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{
    normalized_adjacency, partition_nodes, split_nodes, Graph, GroupPartition, NormalizedAdjacency,
    PartitionBasis, SplitMask,
};
use crate::model::{
    bind, classify, discriminate_degree, ema_update, encode, predict_context, ClassifierParams,
    Linear, ModelDims, ModelState, Params,
};
use crate::objectives::{
    loss_adversarial, loss_asym_contrastive, loss_group_balanced, loss_pre, loss_total,
    loss_uniformity, LossValues, LossWeights,
};
use crate::rng::{substream, Stream};
use crate::tensor::Tensor;

/// Optimizer steps and learning rate of the post-hoc probe.
pub const PROBE_STEPS: usize = 300;
pub const PROBE_LR: f64 = 0.01;

fn grads_of<'t, P>(bound: &P, grads: &Gradients) -> Vec<Tensor>
where
    P: Params<Item = Var<'t>>,
{
    bound
        .leaves()
        .into_iter()
        .map(|&v| grads.get_or_zeros(v))
        .collect()
}

fn shapes<P: Params<Item = Tensor>>(p: &P) -> Vec<[usize; 2]> {
    p.leaves().into_iter().map(Tensor::shape).collect()
}

/// Positive neighbor lists and negative lists, one of each per node.
pub type Samples = (Vec<Vec<usize>>, Vec<Vec<usize>>);

/// Training state over one graph.
pub struct Trainer<'g> {
    graph: &'g Graph,
    config: TrainConfig,
    adj: NormalizedAdjacency,
    degrees: Vec<usize>,
    split: SplitMask,
    balance_groups: GroupPartition,
    model: ModelState,
    encoder_opt: Adam,
    disc_opt: Adam,
    epoch: usize,
}

impl<'g> Trainer<'g> {
    /// Splits the labeled nodes, partitions the training nodes by degree and
    /// initializes the model, all from `config.seed`.
    pub fn new(graph: &'g Graph, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if graph.num_classes() == 0 {
            return Err(Error::Data("training needs labeled nodes".into()));
        }
        let split = split_nodes(graph, config.seed)?;
        let balance_groups = partition_nodes(
            graph,
            PartitionBasis::DegreeQuantile,
            config.group_count,
            &split.train,
        )?;
        let dims = ModelDims {
            input: graph.feature_dim(),
            hidden: config.hidden,
            embed: config.embed,
            predictor_hidden: config.predictor_hidden,
            disc_hidden: config.disc_hidden,
            classes: graph.num_classes(),
        };
        let model = ModelState::init(dims, &mut substream(config.seed, Stream::Init));
        Ok(Self::with_state(
            graph,
            config,
            split,
            balance_groups,
            model,
        ))
    }

    fn with_state(
        graph: &'g Graph,
        config: TrainConfig,
        split: SplitMask,
        balance_groups: GroupPartition,
        model: ModelState,
    ) -> Self {
        let mut enc_shapes = shapes(&model.online);
        enc_shapes.extend(shapes(&model.predictor));
        enc_shapes.extend(shapes(&model.classifier));
        let encoder_opt = Adam::new(config.learning_rate, config.weight_decay, &enc_shapes);
        let disc_opt = Adam::new(
            config.learning_rate,
            config.weight_decay,
            &shapes(&model.discriminator),
        );
        Self {
            adj: normalized_adjacency(graph, config.self_loops),
            degrees: graph.degrees(),
            graph,
            config,
            split,
            balance_groups,
            model,
            encoder_opt,
            disc_opt,
            epoch: 0,
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn split(&self) -> &SplitMask {
        &self.split
    }

    /// Degree groups of the training nodes used by the balanced loss.
    pub fn balance_groups(&self) -> &GroupPartition {
        &self.balance_groups
    }

    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.adj
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Positive and negative samples of epoch `epoch`.
    pub fn samples(&self, epoch: usize) -> Result<Samples> {
        let mut rng = substream(self.config.seed, Stream::Sampling(epoch as u32));
        let nbrs = sample_neighbors(self.graph, self.config.neighbor_sample_size, &mut rng)?;
        let negs = sample_negatives(self.graph, self.config.k_neg, &mut rng)?;
        Ok((nbrs, negs.lists))
    }

    /// One discriminator update on the adversarial loss. The embeddings are
    /// computed from frozen encoder parameters and pass through gradient
    /// reversal, which has nothing to reverse into here.
    pub fn discriminator_step(&mut self) -> Result<f64> {
        let tape = Tape::new();
        let online = bind(&self.model.online, &tape, false);
        let disc = bind(&self.model.discriminator, &tape, true);
        let x = tape.constant(self.graph.features().clone());
        let z = encode(&online, &self.adj, x)?;
        let d_hat = discriminate_degree(&disc, z, self.config.alpha, true)?;
        let l2 = loss_adversarial(d_hat, &self.degrees)?;
        let value = l2.item();
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "epoch {}: non-finite discriminator loss {value}",
                self.epoch
            )));
        }
        let grads = tape.backward(l2)?;
        let g = grads_of(&disc, &grads);
        self.disc_opt
            .step(self.model.discriminator.leaves_mut(), &g)?;
        Ok(value)
    }

    /// One update of the online encoder, predictor and classifier on the
    /// total loss, with the discriminator frozen.
    pub fn encoder_step(&mut self, nbrs: &[Vec<usize>], negs: &[Vec<usize>]) -> Result<LossValues> {
        let cfg = &self.config;
        let tape = Tape::new();
        let online = bind(&self.model.online, &tape, true);
        let predictor = bind(&self.model.predictor, &tape, true);
        let classifier = bind(&self.model.classifier, &tape, true);
        let target = bind(&self.model.target, &tape, false);
        let disc = bind(&self.model.discriminator, &tape, false);

        let x = tape.constant(self.graph.features().clone());
        let z = encode(&online, &self.adj, x)?;
        let z_target = encode(&target, &self.adj, x)?;
        let p = predict_context(&predictor, z)?;

        let l1 = loss_asym_contrastive(z, z_target, p, nbrs, negs, cfg.tau)?;
        let d_hat = discriminate_degree(&disc, z, cfg.alpha, true)?;
        let l2 = loss_adversarial(d_hat, &self.degrees)?;
        let logits = classify(&classifier, z)?;
        let l3 = loss_group_balanced(
            logits,
            self.graph.labels(),
            &self.balance_groups,
            &self.split.train,
        )?;
        let l_pre = loss_pre(p, z_target, nbrs)?;
        let mut uni_rng: ChaCha8Rng = substream(cfg.seed, Stream::Uniformity(self.epoch as u32));
        let l_uni = loss_uniformity(z, &mut uni_rng)?;
        let weights = LossWeights {
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            uniformity: cfg.uniformity_weight,
        };
        let bundle = loss_total(l1, l2, l3, l_pre, l_uni, weights)?;
        let values = bundle.values();
        if !values.all_finite() {
            return Err(Error::Numeric(format!(
                "epoch {}: non-finite loss (l1={}, l2={}, l3={}, l4={}, l_pre={}, l_uni={})",
                self.epoch, values.l1, values.l2, values.l3, values.l4, values.l_pre, values.l_uni
            )));
        }

        let grads = tape.backward(bundle.l4)?;
        let mut g = grads_of(&online, &grads);
        g.extend(grads_of(&predictor, &grads));
        g.extend(grads_of(&classifier, &grads));
        let mut params = self.model.online.leaves_mut();
        params.extend(self.model.predictor.leaves_mut());
        params.extend(self.model.classifier.leaves_mut());
        self.encoder_opt.step(params, &g)?;
        Ok(values)
    }

    /// Discriminator step, encoder step and target update with fresh
    /// samples. Returns the losses of the encoder step.
    pub fn train_epoch(&mut self) -> Result<LossValues> {
        let (nbrs, negs) = self.samples(self.epoch)?;
        let l_disc = self.discriminator_step()?;
        let values = self.encoder_step(&nbrs, &negs)?;
        ema_update(
            &mut self.model.target,
            &self.model.online,
            self.config.ema_lambda,
        )?;
        debug!("epoch {}: discriminator loss {l_disc}", self.epoch);
        self.epoch += 1;
        Ok(values)
    }

    /// Online-encoder embeddings of every node.
    pub fn embeddings(&self) -> Result<Tensor> {
        embed(&self.model, self.graph, &self.adj)
    }

    /// Probe fit on the current embeddings of the training nodes.
    pub fn fit_probe(&self) -> Result<ClassifierParams> {
        fit_probe(
            &self.embeddings()?,
            self.graph.labels(),
            &self.split.train,
            self.graph.num_classes(),
        )
    }

    /// Predicted class of every node, by the joint classifier or by `probe`.
    pub fn predict(&self, probe: Option<&ClassifierParams>) -> Result<Vec<usize>> {
        predict_from(&self.embeddings()?, probe.unwrap_or(&self.model.classifier))
    }

    /// Validation accuracy under the configured classifier mode, with the
    /// probe that produced it in probe mode.
    pub fn validation_accuracy(&self) -> Result<(f64, Option<ClassifierParams>)> {
        let z = self.embeddings()?;
        let probe = match self.config.classifier {
            ClassifierMode::Joint => None,
            ClassifierMode::Probe => Some(fit_probe(
                &z,
                self.graph.labels(),
                &self.split.train,
                self.graph.num_classes(),
            )?),
        };
        let pred = predict_from(&z, probe.as_ref().unwrap_or(&self.model.classifier))?;
        Ok((
            node_accuracy(&pred, self.graph.labels(), &self.split.val),
            probe,
        ))
    }
}

/// Online-encoder embeddings of every node of `g`.
pub fn embed(model: &ModelState, g: &Graph, adj: &NormalizedAdjacency) -> Result<Tensor> {
    let tape = Tape::new();
    let online = bind(&model.online, &tape, false);
    let z = encode(&online, adj, tape.constant(g.features().clone()))?;
    Ok((*z.value()).clone())
}

/// Argmax class of each embedding row under `classifier`.
pub fn predict_from(z: &Tensor, classifier: &ClassifierParams) -> Result<Vec<usize>> {
    let tape = Tape::new();
    let c = bind(classifier, &tape, false);
    Ok(classify(&c, tape.constant(z.clone()))?
        .value()
        .argmax_rows())
}

/// Fraction of `nodes` whose prediction matches their label; unlabeled
/// nodes are skipped. Zero for an empty set.
pub fn node_accuracy(pred: &[usize], labels: &[Option<usize>], nodes: &[usize]) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for &v in nodes {
        if let Some(y) = labels[v] {
            total += 1;
            hit += usize::from(pred[v] == y);
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Softmax regression on frozen embedding rows of `train`, from zero
/// weights, by [`PROBE_STEPS`] full-batch Adam steps on mean cross-entropy.
pub fn fit_probe(
    z: &Tensor,
    labels: &[Option<usize>],
    train: &[usize],
    classes: usize,
) -> Result<ClassifierParams> {
    let (ids, ys): (Vec<usize>, Vec<usize>) = train
        .iter()
        .filter_map(|&v| labels[v].map(|y| (v, y)))
        .unzip();
    if ids.is_empty() {
        return Err(Error::Data("probe needs labeled training nodes".into()));
    }
    let rows = z.gather_rows(&ids);
    let mut probe = ClassifierParams {
        linear: Linear::zeros(z.cols(), classes),
    };
    let mut opt = Adam::new(PROBE_LR, 0.0, &shapes(&probe));
    for _ in 0..PROBE_STEPS {
        let tape = Tape::new();
        let p = bind(&probe, &tape, true);
        let logits = classify(&p, tape.constant(rows.clone()))?;
        let loss = logits
            .log_sum_exp_rows()?
            .sub(logits.select_cols(&ys)?)?
            .mean()?;
        let grads = tape.backward(loss)?;
        let g = grads_of(&p, &grads);
        opt.step(probe.leaves_mut(), &g)?;
    }
    Ok(probe)
}

/// Result of [`fit`].
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub final_model: ModelState,
    /// State with the highest validation accuracy; the initial state counts
    /// as epoch 0 and ties keep the earlier state.
    pub best_model: ModelState,
    pub best_probe: Option<ClassifierParams>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub log: Vec<LossValues>,
    /// Validation accuracy after each epoch.
    pub val_accuracy: Vec<f64>,
    pub split: SplitMask,
}

/// Runs `config.epochs` epochs and keeps the best-validation state.
pub fn fit(g: &Graph, config: &TrainConfig) -> Result<FitOutcome> {
    fit_with(g, config, |_, _, _| {})
}

/// [`fit`] with a callback receiving `(epoch, losses, val_accuracy)` after
/// every epoch.
pub fn fit_with(
    g: &Graph,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &LossValues, f64),
) -> Result<FitOutcome> {
    let mut trainer = Trainer::new(g, config.clone())?;
    let (mut best_val_accuracy, mut best_probe) = trainer.validation_accuracy()?;
    let mut best_model = trainer.model().clone();
    let mut best_epoch = 0;
    let mut log = Vec::with_capacity(config.epochs);
    let mut val_accuracy = Vec::with_capacity(config.epochs);
    for e in 1..=config.epochs {
        let values = trainer.train_epoch()?;
        let (acc, probe) = trainer.validation_accuracy()?;
        info!("epoch {e}: l4 {:.6} val acc {acc:.4}", values.l4);
        on_epoch(e, &values, acc);
        if acc > best_val_accuracy {
            best_val_accuracy = acc;
            best_model = trainer.model().clone();
            best_probe = probe;
            best_epoch = e;
        }
        log.push(values);
        val_accuracy.push(acc);
    }
    Ok(FitOutcome {
        final_model: trainer.model().clone(),
        best_model,
        best_probe,
        best_epoch,
        best_val_accuracy,
        log,
        val_accuracy,
        split: trainer.split().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_biased_graph, GeneratorConfig};

    fn small() -> Graph {
        generate_biased_graph(&GeneratorConfig::new(120, 2.5, 0.8, 7)).unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            hidden: 8,
            embed: 8,
            predictor_hidden: 8,
            disc_hidden: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_state() {
        let g = small();
        let cfg = TrainConfig {
            epochs: 0,
            ..quick()
        };
        let out = fit(&g, &cfg).unwrap();
        assert!(out.log.is_empty());
        let t = Trainer::new(&g, cfg).unwrap();
        assert_eq!(&out.final_model, t.model());
        assert_eq!(out.best_epoch, 0);
    }

    #[test]
    fn discriminator_step_touches_only_the_discriminator() {
        let g = small();
        let mut t = Trainer::new(&g, quick()).unwrap();
        let before = t.model().clone();
        t.discriminator_step().unwrap();
        let after = t.model();
        assert_eq!(before.online, after.online);
        assert_eq!(before.target, after.target);
        assert_eq!(before.predictor, after.predictor);
        assert_eq!(before.classifier, after.classifier);
        assert_ne!(before.discriminator, after.discriminator);
    }

    #[test]
    fn encoder_step_leaves_discriminator_and_target() {
        let g = small();
        let mut t = Trainer::new(&g, quick()).unwrap();
        let (nb, ng) = t.samples(0).unwrap();
        let before = t.model().clone();
        t.encoder_step(&nb, &ng).unwrap();
        assert_eq!(before.discriminator, t.model().discriminator);
        assert_eq!(before.target, t.model().target);
        assert_ne!(before.online, t.model().online);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let g = small();
        let a = fit(&g, &quick()).unwrap();
        let b = fit(&g, &quick()).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.final_model, b.final_model);
        assert!(a.log.iter().all(LossValues::all_finite));
        assert!(a.best_val_accuracy >= *a.val_accuracy.last().unwrap());
    }

    #[test]
    fn probe_mode_reports_a_probe() {
        let g = small();
        let cfg = TrainConfig {
            classifier: ClassifierMode::Probe,
            epochs: 1,
            ..quick()
        };
        let out = fit(&g, &cfg).unwrap();
        assert!(out.best_probe.is_some());
    }

    #[test]
    fn probe_separates_separable_rows() {
        let z = Tensor::new(4, 1, vec![-2.0, -1.0, 1.0, 2.0]).unwrap();
        let labels = vec![Some(0), Some(0), Some(1), Some(1)];
        let probe = fit_probe(&z, &labels, &[0, 1, 2, 3], 2).unwrap();
        assert_eq!(predict_from(&z, &probe).unwrap(), vec![0, 0, 1, 1]);
    }
}
