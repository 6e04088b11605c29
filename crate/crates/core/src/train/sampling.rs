use log::warn;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Per-node positive samples: `min(size, deg)` distinct neighbors, or every
/// neighbor when `size` is `None`. Isolated nodes get an empty list.
pub fn sample_neighbors(
    g: &Graph,
    size: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if size == Some(0) {
        return Err(Error::config("neighbor_sample_size", "must be at least 1"));
    }
    Ok((0..g.num_nodes())
        .map(|v| {
            let nbrs = g.neighbors(v);
            match size {
                Some(s) if s < nbrs.len() => sample(rng, nbrs.len(), s)
                    .into_iter()
                    .map(|i| nbrs[i])
                    .collect(),
                _ => nbrs.to_vec(),
            }
        })
        .collect())
}

/// Negative samples and the number of anchors that fell back to sampling
/// with replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Negatives {
    pub lists: Vec<Vec<usize>>,
    pub with_replacement: usize,
}

/// `k` negatives per anchor drawn uniformly without replacement from the
/// nodes that are neither the anchor nor adjacent to it. Anchors with fewer
/// than `k` such nodes are sampled with replacement instead (from all other
/// nodes if no non-neighbor exists), and a warning is logged.
pub fn sample_negatives(g: &Graph, k: usize, rng: &mut ChaCha8Rng) -> Result<Negatives> {
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::Data(format!(
            "negative sampling needs at least 2 nodes, got {n}"
        )));
    }
    let mut lists = Vec::with_capacity(n);
    let mut fallback = 0;
    for v in 0..n {
        let nbrs = g.neighbors(v);
        let free = n - 1 - nbrs.len();
        let excluded = |w: usize| w == v || nbrs.binary_search(&w).is_ok();
        let list = if free >= k && free >= 2 * k.max(1) && free * 2 >= n {
            // Rejection sampling: most nodes are valid candidates.
            let mut chosen = Vec::with_capacity(k);
            while chosen.len() < k {
                let w = rng.random_range(0..n);
                if !excluded(w) && !chosen.contains(&w) {
                    chosen.push(w);
                }
            }
            chosen
        } else {
            let pool: Vec<usize> = if free > 0 {
                (0..n).filter(|&w| !excluded(w)).collect()
            } else {
                (0..n).filter(|&w| w != v).collect()
            };
            if free >= k {
                sample(rng, pool.len(), k)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect()
            } else {
                fallback += 1;
                (0..k)
                    .map(|_| pool[rng.random_range(0..pool.len())])
                    .collect()
            }
        };
        lists.push(list);
    }
    if fallback > 0 {
        warn!("{fallback} nodes have fewer than {k} non-neighbors; their negatives were sampled with replacement");
    }
    Ok(Negatives {
        lists,
        with_replacement: fallback,
    })
}
