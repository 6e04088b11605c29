//! Browser bindings for three small operations: comparing the accuracy
//! distributions of two groups, generating a biased graph and inspecting
//! its degree groups, and a short training run with a fairness audit.
//!
//! Every export takes plain numbers and returns a JSON string. Failures
//! come back as `{"error": "..."}` so the page never has to catch.

use fairgraph::graph::{
    eigenvector_centrality, generate_biased_graph, partition_nodes, split_nodes, GeneratorConfig,
    Graph, PartitionBasis, CENTRALITY_MAX_ITER, CENTRALITY_TOL,
};
use fairgraph::metrics::{adg, adg_exact, audit, kde_cdf, kde_grid, AdgMode};
use fairgraph::train::{fit_with, Checkpoint, TrainConfig};
use fairgraph::Result;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

/// Largest graph the page may request.
pub const MAX_NODES: usize = 2000;
/// Every `CDF_STRIDE`-th grid point is sent to the page.
const CDF_STRIDE: usize = 5;

#[derive(Debug, Serialize)]
pub struct GapView {
    pub grid: Vec<f64>,
    pub cdf_a: Vec<f64>,
    pub cdf_b: Vec<f64>,
    pub bandwidth_a: f64,
    pub bandwidth_b: f64,
    /// Gap between the smoothed distributions.
    pub kde: f64,
    /// Gap between the empirical distributions.
    pub exact: f64,
}

fn outcomes(correct: usize, total: usize) -> Vec<f64> {
    (0..total)
        .map(|i| if i < correct { 1.0 } else { 0.0 })
        .collect()
}

/// Accuracy-distribution gap between a group with `correct_a` of `total_a`
/// nodes right and one with `correct_b` of `total_b`.
pub fn gap_view(
    correct_a: usize,
    total_a: usize,
    correct_b: usize,
    total_b: usize,
) -> Result<GapView> {
    let (a, b) = (
        outcomes(correct_a.min(total_a), total_a),
        outcomes(correct_b.min(total_b), total_b),
    );
    let (da, db) = (kde_cdf(&a)?, kde_cdf(&b)?);
    let kde = adg(&da, &db)?;
    let exact = adg_exact(&a, &b)?;
    let every = |v: &[f64]| v.iter().step_by(CDF_STRIDE).copied().collect::<Vec<_>>();
    Ok(GapView {
        grid: every(&kde_grid()),
        cdf_a: every(&da.cdf),
        cdf_b: every(&db.cdf),
        bandwidth_a: da.bandwidth,
        bandwidth_b: db.bandwidth,
        kde,
        exact,
    })
}

#[derive(Debug, Serialize)]
pub struct GroupSummary {
    pub sizes: Vec<usize>,
    pub mean_degree: Vec<f64>,
    /// Mean squared feature norm per group; higher means noisier features.
    pub feature_energy: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct GraphView {
    pub nodes: usize,
    pub edges: usize,
    /// `degree_counts[d]` nodes have degree `d`.
    pub degree_counts: Vec<usize>,
    pub centrality_converged: bool,
    pub degree_groups: GroupSummary,
    pub centrality_groups: GroupSummary,
}

fn summarize(g: &Graph, basis: PartitionBasis, groups: usize) -> Result<GroupSummary> {
    let all: Vec<usize> = (0..g.num_nodes()).collect();
    let p = partition_nodes(g, basis, groups, &all)?;
    let x = g.features();
    let mean = |members: &[usize], f: &dyn Fn(usize) -> f64| {
        members.iter().map(|&v| f(v)).sum::<f64>() / members.len().max(1) as f64
    };
    let groups = p.groups();
    Ok(GroupSummary {
        sizes: p.group_sizes(),
        mean_degree: groups
            .iter()
            .map(|m| mean(m, &|v| g.degree(v) as f64))
            .collect(),
        feature_energy: groups
            .iter()
            .map(|m| mean(m, &|v| x.row(v).iter().map(|a| a * a).sum()))
            .collect(),
    })
}

/// Generates a graph and summarizes its degree and centrality groups.
pub fn graph_view(n: usize, gamma: f64, bias: f64, seed: u64, groups: usize) -> Result<GraphView> {
    let g = generate_biased_graph(&GeneratorConfig::new(n.min(MAX_NODES), gamma, bias, seed))?;
    let mut degree_counts = vec![0; g.max_degree() + 1];
    for d in g.degrees() {
        degree_counts[d] += 1;
    }
    let centrality = eigenvector_centrality(&g, CENTRALITY_TOL, CENTRALITY_MAX_ITER)?;
    Ok(GraphView {
        nodes: g.num_nodes(),
        edges: g.num_edges(),
        degree_counts,
        centrality_converged: centrality.converged,
        degree_groups: summarize(&g, PartitionBasis::DegreeQuantile, groups)?,
        centrality_groups: summarize(&g, PartitionBasis::EigenvectorCentralityQuantile, groups)?,
    })
}

#[derive(Debug, Serialize)]
pub struct TrainView {
    /// Total encoder loss per epoch.
    pub loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub best_epoch: usize,
    pub test_accuracy: f64,
    pub delta_dsp: f64,
    pub delta_deo: f64,
    pub oadg: f64,
    pub group_sizes: Vec<usize>,
}

/// Trains on a generated graph (gamma 2.5, bias 0.8) and audits the best
/// checkpoint on the test split over centrality groups.
pub fn train_view(
    n: usize,
    seed: u64,
    epochs: usize,
    lambda1: f64,
    lambda2: f64,
) -> Result<TrainView> {
    let g = generate_biased_graph(&GeneratorConfig::new(n.min(MAX_NODES), 2.5, 0.8, seed))?;
    let cfg = TrainConfig {
        seed,
        epochs,
        lambda1,
        lambda2,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let out = fit_with(&g, &cfg, |_, _, _| {})?;
    let ck = Checkpoint::new(cfg.clone(), out.best_model, out.best_probe);
    let pred = ck.predict(&g)?;
    let test = split_nodes(&g, seed)?.test;
    let r = audit(
        &g,
        &pred,
        &test,
        PartitionBasis::EigenvectorCentralityQuantile,
        cfg.group_count,
        AdgMode::Kde,
        &ck.config_hash,
    )?;
    Ok(TrainView {
        loss: out.log.iter().map(|l| l.l4).collect(),
        val_accuracy: out.val_accuracy,
        best_epoch: out.best_epoch,
        test_accuracy: r.accuracy,
        delta_dsp: r.delta_dsp,
        delta_deo: r.delta_deo,
        oadg: r.oadg,
        group_sizes: r.group_sizes,
    })
}

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[wasm_bindgen]
pub fn explore_gap(correct_a: u32, total_a: u32, correct_b: u32, total_b: u32) -> String {
    to_json(gap_view(
        correct_a as usize,
        total_a as usize,
        correct_b as usize,
        total_b as usize,
    ))
}

#[wasm_bindgen]
pub fn generate_groups(n: u32, gamma: f64, bias: f64, seed: u32, groups: u32) -> String {
    to_json(graph_view(
        n as usize,
        gamma,
        bias,
        seed as u64,
        groups as usize,
    ))
}

#[wasm_bindgen]
pub fn train_small(n: u32, seed: u32, epochs: u32, lambda1: f64, lambda2: f64) -> String {
    to_json(train_view(
        n as usize,
        seed as u64,
        epochs as usize,
        lambda1,
        lambda2,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn gap_of_identical_groups_is_zero() {
        let v = gap_view(30, 40, 30, 40).unwrap();
        assert_eq!(v.exact, 0.0);
        assert!(v.kde.abs() < 1e-9);
        assert_eq!(v.grid.len(), v.cdf_a.len());
        assert!((v.cdf_a.last().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_gap_is_accuracy_difference() {
        let v = gap_view(9, 10, 1, 4).unwrap();
        assert!((v.exact - 0.65).abs() < 1e-12);
        assert!(v.kde > 0.0);
    }

    #[test]
    fn graph_groups_cover_every_node() {
        let v = graph_view(300, 2.5, 0.8, 1, 4).unwrap();
        assert_eq!(v.degree_counts.iter().sum::<usize>(), 300);
        assert_eq!(v.centrality_groups.sizes.iter().sum::<usize>(), 300);
        assert_eq!(v.degree_groups.sizes.iter().sum::<usize>(), 300);
        let md = &v.degree_groups.mean_degree;
        assert!(md.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn short_training_run_reports_metrics() {
        let v = train_view(200, 0, 3, 0.5, 0.5).unwrap();
        assert_eq!(v.loss.len(), 3);
        assert!(v.loss.iter().all(|l| l.is_finite()));
        assert!((0.0..=1.0).contains(&v.test_accuracy));
    }

    #[test]
    fn exports_return_json_or_error() {
        let ok: Value = serde_json::from_str(&explore_gap(1, 2, 2, 2)).unwrap();
        assert!(ok.get("kde").is_some());
        let bad: Value = serde_json::from_str(&generate_groups(5, 2.5, 0.8, 0, 4)).unwrap();
        assert!(bad["error"].as_str().unwrap().contains('n'));
        let empty: Value = serde_json::from_str(&explore_gap(0, 0, 1, 1)).unwrap();
        assert!(empty.get("error").is_some());
    }
}
