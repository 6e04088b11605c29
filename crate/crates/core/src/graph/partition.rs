//! Mutually exclusive node groups by degree or centrality.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{eigenvector_centrality, Graph};
use crate::error::{Error, Result};

/// Tolerance and iteration cap used when a partition needs centrality.
pub const CENTRALITY_TOL: f64 = 1e-10;
pub const CENTRALITY_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionBasis {
    DegreeQuantile,
    /// Bottom and top 20% of the evaluated nodes by degree.
    DegreeExtreme20,
    EigenvectorCentralityQuantile,
}

impl PartitionBasis {
    pub fn name(self) -> &'static str {
        match self {
            PartitionBasis::DegreeQuantile => "degree",
            PartitionBasis::DegreeExtreme20 => "degree-extreme20",
            PartitionBasis::EigenvectorCentralityQuantile => "centrality",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    pub basis: PartitionBasis,
    /// Group of each node; `None` for nodes outside the evaluated set.
    pub assignment: Vec<Option<usize>>,
    /// Cut values `d_1 < ... < d_{m+1}`; group `i` holds scores in
    /// `[d_i, d_{i+1})`. The last cut is `+inf`.
    pub boundaries: Vec<f64>,
    pub warnings: Vec<String>,
}

impl GroupPartition {
    pub fn num_groups(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    /// Member node ids of every group, ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_groups()];
        for (v, g) in self.assignment.iter().enumerate() {
            if let Some(g) = g {
                out[*g].push(v);
            }
        }
        out
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups().iter().map(Vec::len).collect()
    }

    /// Same partition restricted to `nodes`, with groups kept as they are
    /// (some may become empty).
    pub fn restricted_to(&self, nodes: &[usize]) -> Self {
        let mut assignment = vec![None; self.assignment.len()];
        for &v in nodes {
            assignment[v] = self.assignment[v];
        }
        Self {
            assignment,
            ..self.clone()
        }
    }
}

/// Left-closed quantile partition of `scores` over `eval_set` into at most
/// `m` groups. Cuts sit at the sorted scores of positions `floor(k N / m)`;
/// repeated cut values would create empty groups, which are merged into the
/// group to their right with a warning.
pub fn partition_by_scores(
    scores: &[f64],
    m: usize,
    eval_set: &[usize],
    basis: PartitionBasis,
) -> Result<GroupPartition> {
    if m < 2 {
        return Err(Error::config(
            "groups",
            format!("need at least 2 groups, got {m}"),
        ));
    }
    if eval_set.is_empty() {
        return Err(Error::Data("cannot partition an empty node set".into()));
    }
    let mut sorted: Vec<f64> = eval_set.iter().map(|&v| scores[v]).collect();
    sorted.sort_by(f64::total_cmp);
    let big_n = sorted.len();

    let mut boundaries = vec![sorted[0]];
    for k in 1..m {
        let cut = sorted[k * big_n / m];
        if cut > *boundaries.last().unwrap() {
            boundaries.push(cut);
        }
    }
    boundaries.push(f64::INFINITY);

    let mut warnings = Vec::new();
    let got = boundaries.len() - 1;
    if got < m {
        let msg = format!("requested {m} groups, ties leave {got}; empty groups merged rightward");
        warn!("{msg}");
        warnings.push(msg);
    }

    let mut assignment = vec![None; scores.len()];
    for &v in eval_set {
        let s = scores[v];
        // Largest i with boundaries[i] <= s.
        let i = boundaries.partition_point(|&b| b <= s) - 1;
        assignment[v] = Some(i);
    }
    Ok(GroupPartition {
        basis,
        assignment,
        boundaries,
        warnings,
    })
}

fn extreme20(g: &Graph, eval_set: &[usize]) -> Result<GroupPartition> {
    let k = eval_set.len() / 5;
    if k == 0 {
        return Err(Error::Data(format!(
            "20% of {} evaluated nodes is empty",
            eval_set.len()
        )));
    }
    let mut asc: Vec<usize> = eval_set.to_vec();
    asc.sort_by_key(|&v| (g.degree(v), v));
    let mut desc: Vec<usize> = eval_set.to_vec();
    desc.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));

    let mut assignment = vec![None; g.num_nodes()];
    for &v in &asc[..k] {
        assignment[v] = Some(0);
    }
    let mut warnings = Vec::new();
    for &v in &desc[..k] {
        if assignment[v].is_some() {
            let msg = format!("node {v} is in both degree extremes; kept in the bottom group");
            warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        assignment[v] = Some(1);
    }
    let low_cut = g.degree(asc[0]) as f64;
    let high_cut = g.degree(desc[k - 1]) as f64;
    Ok(GroupPartition {
        basis: PartitionBasis::DegreeExtreme20,
        assignment,
        boundaries: vec![low_cut, high_cut, f64::INFINITY],
        warnings,
    })
}

/// Partitions `eval_set` by the chosen basis. `m` is ignored for
/// [`PartitionBasis::DegreeExtreme20`], which always yields two groups:
/// group 0 = lowest degrees, group 1 = highest.
pub fn partition_nodes(
    g: &Graph,
    basis: PartitionBasis,
    m: usize,
    eval_set: &[usize],
) -> Result<GroupPartition> {
    match basis {
        PartitionBasis::DegreeQuantile => {
            let scores: Vec<f64> = g.degrees().into_iter().map(|d| d as f64).collect();
            partition_by_scores(&scores, m, eval_set, basis)
        }
        PartitionBasis::EigenvectorCentralityQuantile => {
            let c = eigenvector_centrality(g, CENTRALITY_TOL, CENTRALITY_MAX_ITER)?;
            let mut p = partition_by_scores(&c.scores, m, eval_set, basis)?;
            if !c.converged {
                let msg = format!(
                    "eigenvector centrality did not converge in {} steps",
                    c.iterations
                );
                warn!("{msg}");
                p.warnings.push(msg);
            }
            Ok(p)
        }
        PartitionBasis::DegreeExtreme20 => extreme20(g, eval_set),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    /// Graph whose node `v` has degree `degs[v]`, built from a hub-free
    /// pairing on extra filler nodes that are left out of `eval_set`.
    fn with_degrees(degs: &[usize]) -> (Graph, Vec<usize>) {
        let n0 = degs.len();
        let mut edges = Vec::new();
        let mut next = n0;
        for (v, &d) in degs.iter().enumerate() {
            for _ in 0..d {
                edges.push((v, next));
                next += 1;
            }
        }
        let n = next;
        let g = Graph::new(edges, Tensor::filled(n, 1, 0.0), vec![None; n], None)
            .unwrap()
            .0;
        (g, (0..n0).collect())
    }

    #[test]
    fn clean_median_split() {
        let (g, eval) = with_degrees(&[1, 1, 5, 5]);
        let p = partition_nodes(&g, PartitionBasis::DegreeQuantile, 2, &eval).unwrap();
        assert_eq!(p.groups(), vec![vec![0, 1], vec![2, 3]]);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn extreme_twenty_percent() {
        let degs: Vec<usize> = (1..=10).collect();
        let (g, eval) = with_degrees(&degs);
        // Oracle: sort by degree, slice 20% off each end.
        let mut order = eval.clone();
        order.sort_by_key(|&v| degs[v]);
        let k = order.len() / 5;
        let p = partition_nodes(&g, PartitionBasis::DegreeExtreme20, 4, &eval).unwrap();
        let groups = p.groups();
        assert_eq!(p.num_groups(), 2);
        let mut low = order[..k].to_vec();
        low.sort();
        let mut high = order[order.len() - k..].to_vec();
        high.sort();
        assert_eq!(groups[0], low);
        assert_eq!(groups[1], high);
        assert_eq!(groups[0], vec![0, 1]);
        assert_eq!(groups[1], vec![8, 9]);
    }

    #[test]
    fn all_equal_scores_merge_to_one_group() {
        let p = partition_by_scores(
            &[3.0; 8],
            4,
            &(0..8).collect::<Vec<_>>(),
            PartitionBasis::DegreeQuantile,
        )
        .unwrap();
        assert_eq!(p.num_groups(), 1);
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn excluded_nodes_have_no_group() {
        let p = partition_by_scores(
            &[1.0, 2.0, 3.0, 4.0],
            2,
            &[0, 2, 3],
            PartitionBasis::DegreeQuantile,
        )
        .unwrap();
        assert_eq!(p.assignment[1], None);
        assert!(p.assignment[0].is_some());
    }

    #[test]
    fn single_group_request_is_a_config_error() {
        assert!(partition_by_scores(&[1.0], 1, &[0], PartitionBasis::DegreeQuantile).is_err());
    }
}
