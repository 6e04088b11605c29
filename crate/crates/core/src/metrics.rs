//! Accuracy and degree-fairness metrics: prediction-rate and
//! true-positive-rate gaps between two groups, and accuracy-distribution
//! gaps (Wasserstein-1 between per-node correctness distributions) over
//! any number of groups.

use std::collections::HashMap;

use log::warn;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::graph::{partition_nodes, Graph, GroupPartition, PartitionBasis};

/// Predicted and true labels of a set of nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    nodes: Vec<usize>,
    predicted: Vec<usize>,
    truth: Vec<usize>,
    index: HashMap<usize, usize>,
}

impl PredictionSet {
    pub fn new(nodes: Vec<usize>, predicted: Vec<usize>, truth: Vec<usize>) -> Result<Self> {
        if nodes.len() != predicted.len() || nodes.len() != truth.len() {
            return Err(Error::dim(
                "prediction set",
                format!(
                    "{} nodes, {} predictions, {} labels",
                    nodes.len(),
                    predicted.len(),
                    truth.len()
                ),
            ));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            if index.insert(v, i).is_some() {
                return Err(Error::Data(format!(
                    "node {v} appears twice in the prediction set"
                )));
            }
        }
        Ok(Self {
            nodes,
            predicted,
            truth,
            index,
        })
    }

    /// Labeled members of `nodes`, with predictions taken from a full
    /// per-node prediction vector.
    pub fn from_labels(
        predicted: &[usize],
        labels: &[Option<usize>],
        nodes: &[usize],
    ) -> Result<Self> {
        let mut ids = Vec::new();
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for &v in nodes {
            if v >= predicted.len() || v >= labels.len() {
                return Err(Error::dim(
                    "prediction set",
                    format!("node {v} out of range"),
                ));
            }
            if let Some(y) = labels[v] {
                ids.push(v);
                pred.push(predicted[v]);
                truth.push(y);
            }
        }
        Self::new(ids, pred, truth)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    pub fn truth(&self) -> &[usize] {
        &self.truth
    }

    /// `1.0` where the prediction is right, else `0.0`.
    pub fn correctness(&self) -> Vec<f64> {
        self.predicted
            .iter()
            .zip(&self.truth)
            .map(|(p, t)| if p == t { 1.0 } else { 0.0 })
            .collect()
    }

    fn positions(&self, group: &[usize], what: &str) -> Result<Vec<usize>> {
        if group.is_empty() {
            return Err(Error::Data(format!("{what} is empty")));
        }
        group
            .iter()
            .map(|v| {
                self.index
                    .get(v)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("{what} node {v} has no prediction")))
            })
            .collect()
    }
}

pub fn accuracy(preds: &PredictionSet) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Data("accuracy of an empty prediction set".into()));
    }
    Ok(preds.correctness().iter().sum::<f64>() / preds.len() as f64)
}

fn check_disjoint(g0: &[usize], g1: &[usize]) -> Result<()> {
    let set: std::collections::HashSet<_> = g0.iter().collect();
    if let Some(v) = g1.iter().find(|v| set.contains(v)) {
        return Err(Error::Data(format!("node {v} is in both groups")));
    }
    Ok(())
}

/// Mean over classes of `|P(pred = y | G0) - P(pred = y | G1)|`, in `[0, 1]`.
pub fn delta_dsp(preds: &PredictionSet, g0: &[usize], g1: &[usize], classes: usize) -> Result<f64> {
    let p0 = preds.positions(g0, "group 0")?;
    let p1 = preds.positions(g1, "group 1")?;
    check_disjoint(g0, g1)?;
    if classes == 0 {
        return Err(Error::Label("no classes".into()));
    }
    let rate = |pos: &[usize], y: usize| {
        pos.iter().filter(|&&i| preds.predicted[i] == y).count() as f64 / pos.len() as f64
    };
    Ok((0..classes)
        .map(|y| (rate(&p0, y) - rate(&p1, y)).abs())
        .sum::<f64>()
        / classes as f64)
}

/// Mean over classes of `|TPR(y | G0) - TPR(y | G1)|`, in `[0, 1]`. Classes
/// missing from either group's true labels are skipped.
pub fn delta_deo(preds: &PredictionSet, g0: &[usize], g1: &[usize], classes: usize) -> Result<f64> {
    let p0 = preds.positions(g0, "group 0")?;
    let p1 = preds.positions(g1, "group 1")?;
    check_disjoint(g0, g1)?;
    let tpr = |pos: &[usize], y: usize| -> Option<f64> {
        let with_y: Vec<usize> = pos
            .iter()
            .copied()
            .filter(|&i| preds.truth[i] == y)
            .collect();
        if with_y.is_empty() {
            return None;
        }
        let hit = with_y.iter().filter(|&&i| preds.predicted[i] == y).count();
        Some(hit as f64 / with_y.len() as f64)
    };
    let gaps: Vec<f64> = (0..classes)
        .filter_map(|y| Some((tpr(&p0, y)? - tpr(&p1, y)?).abs()))
        .collect();
    if gaps.is_empty() {
        return Err(Error::Data(
            "no class has true members in both groups".into(),
        ));
    }
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

pub const KDE_GRID_LO: f64 = -0.5;
pub const KDE_GRID_HI: f64 = 1.5;
pub const KDE_GRID_POINTS: usize = 1001;
pub const KDE_MIN_BANDWIDTH: f64 = 0.05;

/// Smoothed distribution of a correctness sample on the fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyDistribution {
    pub bandwidth: f64,
    /// Grid density, rescaled to integrate to 1 over the grid.
    pub density: Vec<f64>,
    /// Cumulative trapezoid of `density`; ends at 1.
    pub cdf: Vec<f64>,
}

/// The evaluation grid: [`KDE_GRID_POINTS`] uniform points on
/// `[KDE_GRID_LO, KDE_GRID_HI]`.
pub fn kde_grid() -> Vec<f64> {
    let step = (KDE_GRID_HI - KDE_GRID_LO) / (KDE_GRID_POINTS - 1) as f64;
    (0..KDE_GRID_POINTS)
        .map(|i| KDE_GRID_LO + i as f64 * step)
        .collect()
}

/// `1.06 * sd * n^(-1/5)` with the sample standard deviation, floored at
/// [`KDE_MIN_BANDWIDTH`].
pub fn silverman_bandwidth(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (1.06 * var.sqrt() * n.powf(-0.2)).max(KDE_MIN_BANDWIDTH)
}

/// Gaussian KDE of `sample` with Silverman's bandwidth, evaluated on
/// [`kde_grid`]. Mass that falls outside the grid is dropped and the
/// density renormalized.
pub fn kde_cdf(sample: &[f64]) -> Result<AccuracyDistribution> {
    if sample.len() < 2 {
        return Err(Error::Data(format!(
            "KDE needs at least 2 values, got {}",
            sample.len()
        )));
    }
    if let Some(x) = sample.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain {
            context: "kde_cdf",
            msg: format!("non-finite sample value {x}"),
        });
    }
    let h = silverman_bandwidth(sample);
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for x in sorted {
        match atoms.last_mut() {
            Some((v, c)) if *v == x => *c += 1.0,
            _ => atoms.push((x, 1.0)),
        }
    }
    let grid = kde_grid();
    let step = grid[1] - grid[0];
    let mut density: Vec<f64> = grid
        .iter()
        .map(|&x| {
            atoms
                .iter()
                .map(|&(v, c)| c * (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    let mut cdf = Vec::with_capacity(grid.len());
    cdf.push(0.0);
    for i in 1..grid.len() {
        cdf.push(cdf[i - 1] + 0.5 * step * (density[i - 1] + density[i]));
    }
    let total = *cdf.last().expect("grid is nonempty");
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Domain {
            context: "kde_cdf",
            msg: "sample lies entirely outside the grid".into(),
        });
    }
    density.iter_mut().for_each(|d| *d /= total);
    cdf.iter_mut().for_each(|f| *f /= total);
    Ok(AccuracyDistribution {
        bandwidth: h,
        density,
        cdf,
    })
}

/// Trapezoid integral of `|F_i - F_j|` over the grid.
pub fn adg(a: &AccuracyDistribution, b: &AccuracyDistribution) -> Result<f64> {
    if a.cdf.len() != KDE_GRID_POINTS || b.cdf.len() != KDE_GRID_POINTS {
        return Err(Error::dim(
            "adg",
            format!(
                "CDFs on {} and {} points, grid has {KDE_GRID_POINTS}",
                a.cdf.len(),
                b.cdf.len()
            ),
        ));
    }
    let step = (KDE_GRID_HI - KDE_GRID_LO) / (KDE_GRID_POINTS - 1) as f64;
    let diff: Vec<f64> = a
        .cdf
        .iter()
        .zip(&b.cdf)
        .map(|(x, y)| (x - y).abs())
        .collect();
    Ok(diff.windows(2).map(|w| 0.5 * step * (w[0] + w[1])).sum())
}

/// Exact Wasserstein-1 distance between two empirical distributions.
pub fn adg_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data(
            "Wasserstein distance of an empty sample".into(),
        ));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let mut points: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let cdf = |s: &[f64], x: f64| s.partition_point(|&v| v <= x) as f64 / s.len() as f64;
    Ok(points
        .windows(2)
        .map(|w| (cdf(&sa, w[0]) - cdf(&sb, w[0])).abs() * (w[1] - w[0]))
        .sum())
}

/// How accuracy-distribution gaps are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AdgMode {
    Kde,
    Exact,
}

impl AdgMode {
    pub fn name(self) -> &'static str {
        match self {
            AdgMode::Kde => "kde",
            AdgMode::Exact => "exact",
        }
    }
}

/// Pairwise accuracy-distribution gaps of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct OadgResult {
    /// `pairs[i][j]` for `i < j` when both groups were usable, else `None`.
    pub pairs: Vec<Vec<Option<f64>>>,
    pub oadg: f64,
    /// Members of each group inside the prediction set.
    pub group_sizes: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Mean gap over all pairs of usable groups. Groups without predicted
/// members (or with fewer than 2 in KDE mode) are left out with a warning.
pub fn oadg(
    preds: &PredictionSet,
    partition: &GroupPartition,
    mode: AdgMode,
) -> Result<OadgResult> {
    let m = partition.num_groups();
    let correct = preds.correctness();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); m];
    for (i, &v) in preds.nodes().iter().enumerate() {
        if let Some(Some(g)) = partition.assignment.get(v) {
            samples[*g].push(correct[i]);
        }
    }
    let group_sizes: Vec<usize> = samples.iter().map(Vec::len).collect();
    let min_size = match mode {
        AdgMode::Kde => 2,
        AdgMode::Exact => 1,
    };
    let mut warnings = Vec::new();
    let usable: Vec<usize> = (0..m)
        .filter(|&g| {
            let ok = samples[g].len() >= min_size;
            if !ok {
                let msg = format!(
                    "group {g} has {} evaluated nodes and is left out",
                    samples[g].len()
                );
                warn!("{msg}");
                warnings.push(msg);
            }
            ok
        })
        .collect();
    if usable.len() < 2 {
        return Err(Error::Data(format!(
            "{} usable groups; need at least 2",
            usable.len()
        )));
    }
    let dists = match mode {
        AdgMode::Kde => Some(
            usable
                .iter()
                .map(|&g| kde_cdf(&samples[g]).map(|d| (g, d)))
                .collect::<Result<HashMap<_, _>>>()?,
        ),
        AdgMode::Exact => None,
    };
    let mut pairs = vec![vec![None; m]; m];
    let mut total = 0.0;
    let mut count = 0usize;
    for (a, &i) in usable.iter().enumerate() {
        for &j in &usable[a + 1..] {
            let d = match &dists {
                Some(d) => adg(&d[&i], &d[&j])?,
                None => adg_exact(&samples[i], &samples[j])?,
            };
            pairs[i][j] = Some(d);
            total += d;
            count += 1;
        }
    }
    Ok(OadgResult {
        pairs,
        oadg: total / count as f64,
        group_sizes,
        warnings,
    })
}

/// Everything reported for one prediction set under one basis and mode.
/// Rates are fractions in `[0, 1]`; the JSON rendering shows percents.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub delta_dsp: f64,
    pub delta_deo: f64,
    pub oadg: f64,
    pub adg_pairs: Vec<Vec<Option<f64>>>,
    pub basis: PartitionBasis,
    pub group_sizes: Vec<usize>,
    pub mode: AdgMode,
    pub config_hash: String,
    pub warnings: Vec<String>,
}

fn percent(x: f64) -> Box<RawValue> {
    let s = if x.is_finite() {
        format!("{:.2}", 100.0 * x)
    } else {
        "null".into()
    };
    RawValue::from_string(s).expect("formatted float is valid JSON")
}

#[derive(Serialize)]
struct ReportJson<'a> {
    accuracy: Box<RawValue>,
    delta_dsp: Box<RawValue>,
    delta_deo: Box<RawValue>,
    oadg: Box<RawValue>,
    adg_pairs: Vec<Vec<Option<Box<RawValue>>>>,
    basis: &'a str,
    group_sizes: &'a [usize],
    mode: &'a str,
    config_hash: &'a str,
    warnings: &'a [String],
}

impl MetricsReport {
    fn json_view(&self) -> ReportJson<'_> {
        ReportJson {
            accuracy: percent(self.accuracy),
            delta_dsp: percent(self.delta_dsp),
            delta_deo: percent(self.delta_deo),
            oadg: percent(self.oadg),
            adg_pairs: self
                .adg_pairs
                .iter()
                .map(|row| row.iter().map(|c| c.map(percent)).collect())
                .collect(),
            basis: self.basis.name(),
            group_sizes: &self.group_sizes,
            mode: self.mode.name(),
            config_hash: &self.config_hash,
            warnings: &self.warnings,
        }
    }

    /// Pretty JSON with rates in percent, two decimals.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.json_view()).expect("report serializes")
    }

    /// Several reports as one JSON array.
    pub fn many_to_json(reports: &[MetricsReport]) -> String {
        let views: Vec<_> = reports.iter().map(MetricsReport::json_view).collect();
        serde_json::to_string_pretty(&views).expect("reports serialize")
    }
}

/// Full audit of per-node predictions on `nodes` (normally the test set):
/// accuracy, parity gaps between the bottom and top 20% by degree, and the
/// accuracy-distribution gaps of `basis` with `groups` groups.
pub fn audit(
    g: &Graph,
    predicted: &[usize],
    nodes: &[usize],
    basis: PartitionBasis,
    groups: usize,
    mode: AdgMode,
    config_hash: &str,
) -> Result<MetricsReport> {
    let preds = PredictionSet::from_labels(predicted, g.labels(), nodes)?;
    let acc = accuracy(&preds)?;
    let extremes = partition_nodes(g, PartitionBasis::DegreeExtreme20, 2, preds.nodes())?;
    let ex = extremes.groups();
    let classes = g.num_classes();
    let dsp = delta_dsp(&preds, &ex[0], &ex[1], classes)?;
    let deo = delta_deo(&preds, &ex[0], &ex[1], classes)?;
    let partition = partition_nodes(g, basis, groups, preds.nodes())?;
    let gaps = oadg(&preds, &partition, mode)?;
    let mut warnings = extremes.warnings.clone();
    warnings.extend(partition.warnings.iter().cloned());
    warnings.extend(gaps.warnings);
    Ok(MetricsReport {
        accuracy: acc,
        delta_dsp: dsp,
        delta_deo: deo,
        oadg: gaps.oadg,
        adg_pairs: gaps.pairs,
        basis,
        group_sizes: gaps.group_sizes,
        mode,
        config_hash: config_hash.to_string(),
        warnings,
    })
}
