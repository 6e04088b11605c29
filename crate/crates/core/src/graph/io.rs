//! Plain-text dataset files.
//!
//! - `edges.tsv`: `u v` per line, 0-based, `#` comments allowed.
//! - `features.tsv`: one row of floats per node, in node order.
//! - `labels.tsv`: `node label`; absent nodes (or label `-1`) are unlabeled.
//! - `meta.txt`: optional `key=value` lines; `classes` fixes the class count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;

use super::{EdgeCleanup, Graph};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const META_FILE: &str = "meta.txt";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub cleanup: EdgeCleanup,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut id = |what: &str| -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| parse_err(path, i + 1, format!("missing {what} node id")))?;
            tok.parse()
                .map_err(|_| parse_err(path, i + 1, format!("bad node id `{tok}`")))
        };
        let u = id("first")?;
        let v = id("second")?;
        if it.next().is_some() {
            return Err(parse_err(path, i + 1, "expected exactly two node ids"));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_features(path: &Path) -> Result<Tensor> {
    let text = fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let mut count = 0;
        for tok in line.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("bad float `{tok}`")))?;
            data.push(x);
            count += 1;
        }
        match width {
            None if count == 0 => return Err(parse_err(path, i + 1, "empty feature row")),
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::dim(
                    "load_graph",
                    format!(
                        "{}:{}: feature row has {count} values, expected {w}",
                        path.display(),
                        i + 1
                    ),
                ))
            }
            Some(_) => {}
        }
        rows += 1;
    }
    Tensor::new(rows, width.unwrap_or(0), data)
}

fn read_labels(path: &Path, n: usize) -> Result<Vec<Option<usize>>> {
    let text = fs::read_to_string(path)?;
    let mut labels = vec![None; n];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(path, i + 1, "expected `node_id label`"));
        }
        let v: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad node id `{}`", toks[0])))?;
        let y: i64 = toks[1]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad label `{}`", toks[1])))?;
        if v >= n {
            return Err(Error::Data(format!(
                "{}:{}: node {v} has no feature row ({n} rows)",
                path.display(),
                i + 1
            )));
        }
        labels[v] = match y {
            -1 => None,
            y if y < -1 => {
                return Err(Error::Label(format!(
                    "{}:{}: label {y} below -1",
                    path.display(),
                    i + 1
                )))
            }
            y => Some(y as usize),
        };
    }
    Ok(labels)
}

/// Loads a graph from the three dataset files. The node count is the
/// feature row count; every edge endpoint must be below it.
pub fn load_graph(
    edges_path: &Path,
    features_path: &Path,
    labels_path: &Path,
    num_classes: Option<usize>,
) -> Result<(Graph, LoadReport)> {
    let edges = read_edges(edges_path)?;
    let features = read_features(features_path)?;
    let n = features.rows();
    if let Some(max_id) = edges.iter().map(|&(u, v)| u.max(v)).max() {
        if max_id >= n {
            return Err(Error::Data(format!(
                "edge endpoint {max_id} but only {n} feature rows"
            )));
        }
    }
    let labels = read_labels(labels_path, n)?;
    let (g, cleanup) = Graph::new(edges, features, labels, num_classes)?;
    if cleanup.duplicates > 0 || cleanup.self_loops > 0 {
        warn!(
            "{}: dropped {} duplicate edges and {} self-loops",
            edges_path.display(),
            cleanup.duplicates,
            cleanup.self_loops
        );
    }
    Ok((g, LoadReport { cleanup }))
}

/// `key=value` pairs from `meta.txt`, empty when the file is absent.
pub fn read_meta(dir: &Path) -> Result<BTreeMap<String, String>> {
    let path = dir.join(META_FILE);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(&path)?;
    let mut meta = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(&path, i + 1, "expected key=value"))?;
        meta.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(meta)
}

/// Loads `edges.tsv`, `features.tsv` and `labels.tsv` from `dir`, taking
/// the class count from `meta.txt` when present.
pub fn load_graph_dir(dir: &Path) -> Result<(Graph, LoadReport)> {
    let meta = read_meta(dir)?;
    let classes = match meta.get("classes") {
        Some(c) => Some(
            c.parse()
                .map_err(|_| Error::Data(format!("meta.txt: bad classes value `{c}`")))?,
        ),
        None => None,
    };
    load_graph(
        &dir.join(EDGES_FILE),
        &dir.join(FEATURES_FILE),
        &dir.join(LABELS_FILE),
        classes,
    )
}

/// Writes the dataset files for `g` plus `meta.txt` with the given pairs.
pub fn write_dataset(dir: &Path, g: &Graph, meta: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut edges = String::new();
    for &(u, v) in g.edges() {
        writeln!(edges, "{u}\t{v}").unwrap();
    }
    fs::write(dir.join(EDGES_FILE), edges)?;

    let mut feats = String::new();
    for v in 0..g.num_nodes() {
        let row: Vec<String> = g.features().row(v).iter().map(f64::to_string).collect();
        feats.push_str(&row.join("\t"));
        feats.push('\n');
    }
    fs::write(dir.join(FEATURES_FILE), feats)?;

    let mut labels = String::new();
    for (v, y) in g.labels().iter().enumerate() {
        if let Some(y) = y {
            writeln!(labels, "{v}\t{y}").unwrap();
        }
    }
    fs::write(dir.join(LABELS_FILE), labels)?;

    let mut m = String::new();
    for (k, v) in meta {
        writeln!(m, "{k}={v}").unwrap();
    }
    fs::write(dir.join(META_FILE), m)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, edges: &str, feats: &str, labels: &str) {
        fs::write(dir.join(EDGES_FILE), edges).unwrap();
        fs::write(dir.join(FEATURES_FILE), feats).unwrap();
        fs::write(dir.join(LABELS_FILE), labels).unwrap();
    }

    #[test]
    fn loads_and_dedups() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "# header\n0 1\n1 0\n0 1\n",
            "1.0\n2.0\n",
            "0 1\n1 0\n",
        );
        let (g, rep) = load_graph_dir(dir.path()).unwrap();
        assert_eq!(g.degrees(), vec![1, 1]);
        assert_eq!(rep.cleanup.duplicates, 2);
        assert_eq!(g.labels(), &[Some(1), Some(0)]);
    }

    #[test]
    fn malformed_edge_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "0 1\n0 x\n", "1\n2\n", "");
        match load_graph_dir(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_features_are_a_dimension_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "0 1\n", "1\t2\n3\n", "");
        assert!(matches!(
            load_graph_dir(dir.path()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn label_below_sentinel_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "0 1\n", "1\n2\n", "0 -2\n");
        assert!(matches!(load_graph_dir(dir.path()), Err(Error::Label(_))));
    }

    #[test]
    fn label_above_class_count_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "0 1\n", "1\n2\n", "0 5\n");
        fs::write(dir.path().join(META_FILE), "classes=3\n").unwrap();
        assert!(matches!(load_graph_dir(dir.path()), Err(Error::Label(_))));
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let feats = Tensor::new(3, 2, vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0, 7.0, 8.0]).unwrap();
        let (g, _) = Graph::new(
            [(0, 1), (1, 2)],
            feats,
            vec![Some(0), None, Some(1)],
            Some(2),
        )
        .unwrap();
        write_dataset(dir.path(), &g, &[("classes", "2".into())]).unwrap();
        let (back, _) = load_graph_dir(dir.path()).unwrap();
        assert_eq!(back, g);
    }
}
