//! Training losses: asymmetric contrastive, adversarial degree regression,
//! degree-group-balanced cross-entropy, and their weighted total.
//!
//! Neighbor and negative samples are per-node id lists indexed by anchor.
//! Anchors with an empty neighbor list are skipped by the contrastive and
//! prediction losses.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Var, NORM_EPS};
use crate::error::{Error, Result};
use crate::graph::GroupPartition;
use crate::tensor::Tensor;

/// Pair budget of the uniformity term.
pub const UNIFORMITY_PAIRS: usize = 1024;

/// Flattened `(anchor, neighbor)` pairs and the per-pair weight
/// `1 / (|anchors| * |samples(anchor)|)`.
struct Pairs {
    anchor: Vec<usize>,
    neighbor: Vec<usize>,
    /// Position of each pair's anchor within `anchors`.
    slot: Vec<usize>,
    anchors: Vec<usize>,
    weight: Tensor,
}

fn pairs(neighbor_samples: &[Vec<usize>], n: usize) -> Result<Pairs> {
    if neighbor_samples.len() != n {
        return Err(Error::dim(
            "neighbor samples",
            format!("{} lists for {n} nodes", neighbor_samples.len()),
        ));
    }
    let anchors: Vec<usize> = (0..n)
        .filter(|&v| !neighbor_samples[v].is_empty())
        .collect();
    if anchors.is_empty() {
        return Err(Error::Data(
            "every node is isolated; no positive pairs".into(),
        ));
    }
    let mut p = Pairs {
        anchor: Vec::new(),
        neighbor: Vec::new(),
        slot: Vec::new(),
        weight: Tensor::zeros(0, 1),
        anchors,
    };
    let mut w = Vec::new();
    let na = p.anchors.len() as f64;
    for (slot, &v) in p.anchors.iter().enumerate() {
        let nbrs = &neighbor_samples[v];
        for &u in nbrs {
            if u >= n {
                return Err(Error::dim(
                    "neighbor samples",
                    format!("node {u} out of range"),
                ));
            }
            p.anchor.push(v);
            p.neighbor.push(u);
            p.slot.push(slot);
            w.push(1.0 / (na * nbrs.len() as f64));
        }
    }
    p.weight = Tensor::column(w);
    Ok(p)
}

/// Prediction loss: weighted mean over anchors of the mean squared distance
/// between the predicted context `p` of the anchor and the target embedding
/// of each sampled neighbor. Diagnostic only.
pub fn loss_pre<'t>(
    p: Var<'t>,
    z_target: Var<'t>,
    neighbor_samples: &[Vec<usize>],
) -> Result<Var<'t>> {
    let [n, _] = p.shape();
    if z_target.shape() != p.shape() {
        return Err(Error::dim(
            "loss_pre",
            format!(
                "prediction {:?} vs target {:?}",
                p.shape(),
                z_target.shape()
            ),
        ));
    }
    let pr = pairs(neighbor_samples, n)?;
    let diff = p
        .row_gather(&pr.anchor)?
        .sub(z_target.row_gather(&pr.neighbor)?)?;
    let sq = diff.dot_rows(diff)?;
    let w = p.tape().constant(pr.weight);
    Ok(sq.mul(w)?.sum())
}

/// The ordered pairs `(i, j)`, `i != j`, used by [`loss_uniformity`]: all
/// of them when there are at most [`UNIFORMITY_PAIRS`], otherwise that many
/// drawn uniformly with replacement.
pub fn uniformity_pairs(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    if n * (n - 1) <= UNIFORMITY_PAIRS {
        return (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
    }
    (0..UNIFORMITY_PAIRS)
        .map(|_| {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            (i, j)
        })
        .collect()
}

/// Negative mean squared distance over [`uniformity_pairs`]. Lower means
/// more spread out.
pub fn loss_uniformity<'t>(z: Var<'t>, rng: &mut ChaCha8Rng) -> Result<Var<'t>> {
    let [n, _] = z.shape();
    let pairs = uniformity_pairs(n, rng);
    if pairs.is_empty() {
        return Err(Error::Data(format!(
            "uniformity needs at least 2 nodes, got {n}"
        )));
    }
    let (a, b): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
    let diff = z.row_gather(&a)?.sub(z.row_gather(&b)?)?;
    Ok(diff.dot_rows(diff)?.mean()?.scale(-1.0))
}

/// Asymmetric contrastive loss. For each anchor `v` and sampled neighbor
/// `u`, the positive score is `p_v . u / tau` (predicted online context vs
/// target embedding) and each negative `w` of `v` scores `v . w / tau`
/// (online vs online). Every row is L2-normalized first. The per-pair term
/// is `logsumexp(pos, negs) - pos`, averaged over neighbors and anchors.
///
/// `negative_samples` must hold the same number `k` of ids for every node;
/// `k = 0` leaves only the positive in the denominator.
pub fn loss_asym_contrastive<'t>(
    z_online: Var<'t>,
    z_target: Var<'t>,
    p: Var<'t>,
    neighbor_samples: &[Vec<usize>],
    negative_samples: &[Vec<usize>],
    tau: f64,
) -> Result<Var<'t>> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::config("tau", format!("must be positive, got {tau}")));
    }
    let [n, _] = z_online.shape();
    if z_target.shape() != z_online.shape() || p.shape() != z_online.shape() {
        return Err(Error::dim(
            "loss_asym_contrastive",
            format!(
                "online {:?}, target {:?}, prediction {:?}",
                z_online.shape(),
                z_target.shape(),
                p.shape()
            ),
        ));
    }
    if negative_samples.len() != n {
        return Err(Error::dim(
            "negative samples",
            format!("{} lists for {n} nodes", negative_samples.len()),
        ));
    }
    let pr = pairs(neighbor_samples, n)?;
    let k = negative_samples[pr.anchors[0]].len();
    if let Some(&v) = pr.anchors.iter().find(|&&v| negative_samples[v].len() != k) {
        return Err(Error::dim(
            "negative samples",
            format!(
                "node {v} has {} negatives, expected {k}",
                negative_samples[v].len()
            ),
        ));
    }

    let inv_tau = 1.0 / tau;
    let p_hat = p.l2_normalize_rows(NORM_EPS)?;
    let u_hat = z_target.l2_normalize_rows(NORM_EPS)?;
    let v_hat = z_online.l2_normalize_rows(NORM_EPS)?;

    let pos = p_hat
        .row_gather(&pr.anchor)?
        .dot_rows(u_hat.row_gather(&pr.neighbor)?)?
        .scale(inv_tau);
    let logits = if k == 0 {
        pos
    } else {
        let mut na = Vec::with_capacity(pr.anchors.len() * k);
        let mut nb = Vec::with_capacity(pr.anchors.len() * k);
        for &v in &pr.anchors {
            for &w in &negative_samples[v] {
                if w >= n {
                    return Err(Error::dim(
                        "negative samples",
                        format!("node {w} out of range"),
                    ));
                }
                na.push(v);
                nb.push(w);
            }
        }
        let neg = v_hat
            .row_gather(&na)?
            .dot_rows(v_hat.row_gather(&nb)?)?
            .scale(inv_tau)
            .reshape(pr.anchors.len(), k)?;
        pos.hcat(neg.row_gather(&pr.slot)?)?
    };
    let per_pair = logits.log_sum_exp_rows()?.sub(pos)?;
    let w = p.tape().constant(pr.weight);
    Ok(per_pair.mul(w)?.sum())
}

/// Mean squared error of `d_hat` (`n x 1`) against `ln(degree + 1)`.
pub fn loss_adversarial<'t>(d_hat: Var<'t>, degrees: &[usize]) -> Result<Var<'t>> {
    if d_hat.shape() != [degrees.len(), 1] {
        return Err(Error::dim(
            "loss_adversarial",
            format!(
                "prediction {:?} for {} degrees",
                d_hat.shape(),
                degrees.len()
            ),
        ));
    }
    let target = Tensor::column(degrees.iter().map(|&d| (d as f64 + 1.0).ln()).collect());
    let target = d_hat.tape().constant(target);
    d_hat.sub(target)?.square().mean()
}

/// Group-balanced cross-entropy over the training nodes:
/// `sum_k (1/N_k) L_k / sum_k (1/N_k)`, with `L_k` the mean cross-entropy
/// of group `k`'s `N_k` training nodes. Groups with no labeled training
/// node drop out of both sums; training nodes outside every group are
/// ignored.
pub fn loss_group_balanced<'t>(
    logits: Var<'t>,
    labels: &[Option<usize>],
    partition: &GroupPartition,
    train: &[usize],
) -> Result<Var<'t>> {
    let [n, c] = logits.shape();
    if labels.len() != n || partition.assignment.len() != n {
        return Err(Error::dim(
            "loss_group_balanced",
            format!(
                "logits {n}x{c}, {} labels, partition over {} nodes",
                labels.len(),
                partition.assignment.len()
            ),
        ));
    }
    let mut members: Vec<Vec<(usize, usize)>> = vec![Vec::new(); partition.num_groups()];
    for &v in train {
        if v >= n {
            return Err(Error::dim(
                "loss_group_balanced",
                format!("train node {v} out of range"),
            ));
        }
        if let (Some(g), Some(y)) = (partition.assignment[v], labels[v]) {
            if y >= c {
                return Err(Error::Label(format!(
                    "label {y} of node {v} with {c} logits"
                )));
            }
            members[g].push((v, y));
        }
    }
    let inv_total: f64 = members
        .iter()
        .filter(|m| !m.is_empty())
        .map(|m| 1.0 / m.len() as f64)
        .sum();
    if inv_total == 0.0 {
        return Err(Error::Data(
            "no labeled training node falls in any group".into(),
        ));
    }
    let mut ids = Vec::new();
    let mut ys = Vec::new();
    let mut w = Vec::new();
    for m in members.iter().filter(|m| !m.is_empty()) {
        let nk = m.len() as f64;
        for &(v, y) in m {
            ids.push(v);
            ys.push(y);
            w.push(1.0 / (nk * nk * inv_total));
        }
    }
    let rows = logits.row_gather(&ids)?;
    let ce = rows.log_sum_exp_rows()?.sub(rows.select_cols(&ys)?)?;
    let w = logits.tape().constant(Tensor::column(w));
    Ok(ce.mul(w)?.sum())
}

/// All loss terms of one step, still on the tape.
#[derive(Debug, Clone, Copy)]
pub struct LossBundle<'t> {
    pub l1: Var<'t>,
    pub l2: Var<'t>,
    pub l3: Var<'t>,
    pub l_pre: Var<'t>,
    pub l_uni: Var<'t>,
    pub l4: Var<'t>,
}

/// Loss weights of the total objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub uniformity: f64,
}

/// Composes `l4 = l1 + lambda1 l2 + lambda2 l3 (+ uniformity l_uni)` on the
/// tape. Terms with weight zero are left out of the sum entirely.
pub fn loss_total<'t>(
    l1: Var<'t>,
    l2: Var<'t>,
    l3: Var<'t>,
    l_pre: Var<'t>,
    l_uni: Var<'t>,
    weights: LossWeights,
) -> Result<LossBundle<'t>> {
    for (key, w) in [
        ("lambda1", weights.lambda1),
        ("lambda2", weights.lambda2),
        ("uniformity_weight", weights.uniformity),
    ] {
        if w.is_nan() || w < 0.0 {
            return Err(Error::config(key, format!("must be nonnegative, got {w}")));
        }
    }
    let mut l4 = l1;
    for (w, term) in [
        (weights.lambda1, l2),
        (weights.lambda2, l3),
        (weights.uniformity, l_uni),
    ] {
        if w != 0.0 {
            l4 = l4.add(term.scale(w))?;
        }
    }
    Ok(LossBundle {
        l1,
        l2,
        l3,
        l_pre,
        l_uni,
        l4,
    })
}

/// Scalar snapshot of a [`LossBundle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l_pre: f64,
    pub l_uni: f64,
}

impl LossBundle<'_> {
    pub fn values(&self) -> LossValues {
        LossValues {
            l1: self.l1.item(),
            l2: self.l2.item(),
            l3: self.l3.item(),
            l4: self.l4.item(),
            l_pre: self.l_pre.item(),
            l_uni: self.l_uni.item(),
        }
    }
}

impl LossValues {
    pub fn all_finite(&self) -> bool {
        [self.l1, self.l2, self.l3, self.l4, self.l_pre, self.l_uni]
            .iter()
            .all(|v| v.is_finite())
    }

    /// One epoch-log line: `epoch l1 l2 l3 l4 l_pre l_uni`, tab-separated.
    pub fn log_line(&self, epoch: usize) -> String {
        format!(
            "{epoch}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.l1, self.l2, self.l3, self.l4, self.l_pre, self.l_uni
        )
    }
}

/// Header of the epoch log.
pub const LOG_HEADER: &str = "epoch\tl1\tl2\tl3\tl4\tl_pre\tl_uni";
