//! Sparse undirected graphs with node features and labels.

mod adjacency;
mod centrality;
mod generate;
mod io;
mod partition;
mod split;

use std::collections::BTreeSet;

pub use adjacency::{normalized_adjacency, NormalizedAdjacency};
pub use centrality::{eigenvector_centrality, Centrality};
pub use generate::{generate_biased_graph, GeneratorConfig};
pub use io::{
    load_graph, load_graph_dir, read_meta, write_dataset, LoadReport, EDGES_FILE, FEATURES_FILE,
    LABELS_FILE, META_FILE,
};
pub use partition::{
    partition_by_scores, partition_nodes, GroupPartition, PartitionBasis, CENTRALITY_MAX_ITER,
    CENTRALITY_TOL,
};
pub use split::{split_nodes, SplitMask};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Immutable undirected graph. Neighbor lists are sorted and symmetric;
/// self-loops and duplicate edges never appear.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    edges: Vec<(usize, usize)>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    features: Tensor,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

/// Counts of input edges dropped while building a [`Graph`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeCleanup {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl Graph {
    /// Builds a graph on `features.rows()` nodes. Duplicate edges (in
    /// either orientation) and self-loops are dropped and counted.
    /// `num_classes` defaults to one more than the largest label.
    pub fn new(
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Tensor,
        labels: Vec<Option<usize>>,
        num_classes: Option<usize>,
    ) -> Result<(Self, EdgeCleanup)> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::dim(
                "Graph::new",
                format!("{} labels for {n} feature rows", labels.len()),
            ));
        }
        let observed = labels.iter().flatten().max().map_or(0, |&c| c + 1);
        let num_classes = num_classes.unwrap_or(observed);
        if let Some((v, c)) = labels
            .iter()
            .enumerate()
            .find_map(|(v, l)| l.filter(|&c| c >= num_classes).map(|c| (v, c)))
        {
            return Err(Error::Label(format!(
                "node {v} has label {c}, but there are {num_classes} classes"
            )));
        }

        let mut cleanup = EdgeCleanup::default();
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Data(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                cleanup.self_loops += 1;
            } else if !set.insert((u.min(v), u.max(v))) {
                cleanup.duplicates += 1;
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();

        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        for d in &degree {
            indptr.push(indptr.last().unwrap() + d);
        }
        let mut fill = indptr[..n].to_vec();
        let mut indices = vec![0; indptr[n]];
        for &(u, v) in &edges {
            indices[fill[u]] = v;
            fill[u] += 1;
            indices[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..n {
            indices[indptr[v]..indptr[v + 1]].sort_unstable();
        }

        Ok((
            Self {
                edges,
                indptr,
                indices,
                features,
                labels,
                num_classes,
            },
            cleanup,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.indices[self.indptr[v]..self.indptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.indptr[v + 1] - self.indptr[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|v| self.degree(v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes())
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&v| self.labels[v].is_some())
            .collect()
    }

    /// Same graph with node `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::dim("Graph::permuted", "permutation length"));
        }
        let mut rows = vec![Vec::new(); n];
        let mut labels = vec![None; n];
        for (old, &new) in perm.iter().enumerate() {
            rows[new] = self.features.row(old).to_vec();
            labels[new] = self.labels[old];
        }
        let features = Tensor::new(n, self.feature_dim(), rows.concat())?;
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        Ok(Self::new(edges, features, labels, Some(self.num_classes))?.0)
    }
}
