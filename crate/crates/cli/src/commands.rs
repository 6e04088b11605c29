use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fairgraph::graph::{
    generate_biased_graph, load_graph_dir, split_nodes, write_dataset, GeneratorConfig, Graph,
    PartitionBasis, EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE,
};
use fairgraph::metrics::{audit, AdgMode, MetricsReport};
use fairgraph::objectives::LOG_HEADER;
use fairgraph::train::{fit_with, Checkpoint, TrainConfig};
use fairgraph::{Error, Result};
use log::warn;
use serde::Serialize;

use crate::manifest::{revision, RunManifest};
use crate::plot::ablation_svg;
use crate::{AblateArgs, ConfigArgs, EvaluateArgs, GenerateArgs, TrainArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const EPOCH_LOG_FILE: &str = "epochs.tsv";
pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";

fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && !force {
        return Err(Error::Config {
            key: "out".into(),
            msg: format!(
                "{} already exists; pass --force to overwrite",
                dir.display()
            ),
        });
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Defaults, then the config file, then flags.
pub fn build_config(args: &ConfigArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &args.config {
        for (_, k, v) in TrainConfig::parse_pairs(&fs::read_to_string(path)?)? {
            cfg.set(&k, &v)?;
        }
    }
    let flags: [(&str, Option<String>); 11] = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("epochs", args.epochs.map(|v| v.to_string())),
        ("lambda1", args.lambda1.map(|v| v.to_string())),
        ("lambda2", args.lambda2.map(|v| v.to_string())),
        ("alpha", args.alpha.map(|v| v.to_string())),
        ("ema", args.ema.map(|v| v.to_string())),
        ("tau", args.tau.map(|v| v.to_string())),
        ("neighbors", args.neighbors.clone()),
        ("kneg", args.kneg.map(|v| v.to_string())),
        ("groups", args.groups.map(|v| v.to_string())),
        ("classifier", args.classifier.clone()),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    [EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE]
        .iter()
        .map(|f| dir.join(f))
        .filter(|p| p.is_file())
        .collect()
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = GeneratorConfig {
        n: a.n,
        gamma: a.gamma,
        num_classes: a.classes,
        feature_dim: a.feature_dim,
        bias: a.bias,
        homophily: a.homophily,
        noise: a.noise,
        seed: a.seed,
    };
    let g = generate_biased_graph(&cfg)?;
    prepare_out(&a.out, a.force)?;
    write_dataset(&a.out, &g, &cfg.meta())?;
    println!(
        "wrote {} nodes, {} edges to {}",
        g.num_nodes(),
        g.num_edges(),
        a.out.display()
    );
    RunManifest {
        command: "generate".into(),
        config: None,
        data: Vec::new(),
        seeds: vec![a.seed],
        out: a.out.clone(),
        revision: revision(),
        duration_secs: start.elapsed().as_secs_f64(),
        files: [EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE]
            .map(String::from)
            .to_vec(),
    }
    .write()
}

fn load(dir: &Path) -> Result<Graph> {
    let (g, report) = load_graph_dir(dir)?;
    let c = report.cleanup;
    if c.duplicates + c.self_loops > 0 {
        warn!(
            "dropped {} duplicate edges and {} self-loops",
            c.duplicates, c.self_loops
        );
    }
    Ok(g)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = build_config(&a.config)?;
    let g = load(&a.data)?;
    prepare_out(&a.out, a.force)?;

    let mut log = format!("{LOG_HEADER}\n");
    let out = fit_with(&g, &cfg, |epoch, values, _| {
        log.push_str(&values.log_line(epoch));
        log.push('\n');
    })?;
    fs::write(a.out.join(EPOCH_LOG_FILE), log)?;
    Checkpoint::new(cfg.clone(), out.best_model, out.best_probe)
        .save(&a.out.join(CHECKPOINT_FILE))?;
    println!(
        "best epoch {} with validation accuracy {:.2}%",
        out.best_epoch,
        100.0 * out.best_val_accuracy
    );

    RunManifest {
        command: "train".into(),
        config: a.config.config.clone(),
        data: dataset_files(&a.data),
        seeds: vec![cfg.seed],
        out: a.out.clone(),
        revision: revision(),
        duration_secs: start.elapsed().as_secs_f64(),
        files: vec![CHECKPOINT_FILE.into(), EPOCH_LOG_FILE.into()],
    }
    .write()
}

fn parse_err(path: &Path, line: usize, msg: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    }
}

/// Reads `node label` lines into a per-node vector; unlisted nodes get
/// `None`.
pub fn read_predictions(path: &Path, n: usize) -> Result<Vec<Option<usize>>> {
    let text = fs::read_to_string(path)?;
    let mut out = vec![None; n];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [node, label] = fields[..] else {
            return Err(parse_err(path, i + 1, "expected `node label`".into()));
        };
        let node: usize = node
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad node id `{node}`")))?;
        let label: usize = label
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad label `{label}`")))?;
        if node >= n {
            return Err(parse_err(
                path,
                i + 1,
                format!("node {node} outside 0..{n}"),
            ));
        }
        out[node] = Some(label);
    }
    Ok(out)
}

fn write_predictions(path: &Path, pred: &[usize]) -> Result<()> {
    let mut text = String::new();
    for (v, y) in pred.iter().enumerate() {
        writeln!(text, "{v}\t{y}").unwrap();
    }
    fs::write(path, text)?;
    Ok(())
}

fn summary_line(r: &MetricsReport) -> String {
    format!(
        "{:<10} {:<5}  acc {:6.2}  dsp {:6.2}  deo {:6.2}  oadg {:6.2}",
        r.basis.name(),
        r.mode.name(),
        100.0 * r.accuracy,
        100.0 * r.delta_dsp,
        100.0 * r.delta_deo,
        100.0 * r.oadg
    )
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let start = Instant::now();
    let g = load(&a.data)?;
    let checkpoint = a.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    let cfg = match &checkpoint {
        Some(ck) => {
            let wants_config = a.config.config.is_some() || a.config.seed.is_some();
            if wants_config && build_config(&a.config)?.hash() != ck.config_hash {
                warn!("config given on the command line differs from the checkpoint's; using the checkpoint's");
            }
            ck.config.clone()
        }
        None => build_config(&a.config)?,
    };

    let test = split_nodes(&g, cfg.seed)?.test;
    let pred: Vec<usize> = match (&a.predictions, &checkpoint) {
        (Some(path), _) => {
            let given = read_predictions(path, g.num_nodes())?;
            let mut pred = vec![0; g.num_nodes()];
            for &v in &test {
                pred[v] = given[v].ok_or_else(|| {
                    Error::Data(format!(
                        "{} has no prediction for test node {v}",
                        path.display()
                    ))
                })?;
            }
            pred
        }
        (None, Some(ck)) => ck.predict(&g)?,
        (None, None) => {
            return Err(Error::Config {
                key: "checkpoint".into(),
                msg: "pass --checkpoint or --predictions".into(),
            })
        }
    };
    prepare_out(&a.out, a.force)?;

    let bases = match a.basis {
        Some(b) => vec![b.basis()],
        None => vec![
            PartitionBasis::EigenvectorCentralityQuantile,
            PartitionBasis::DegreeQuantile,
        ],
    };
    let modes = match a.mode {
        Some(m) => vec![m.mode()],
        None => vec![AdgMode::Kde, AdgMode::Exact],
    };
    let hash = cfg.hash();
    let mut reports = Vec::new();
    for &basis in &bases {
        for &mode in &modes {
            reports.push(audit(
                &g,
                &pred,
                &test,
                basis,
                cfg.group_count,
                mode,
                &hash,
            )?);
        }
    }
    for r in &reports {
        println!("{}", summary_line(r));
    }
    fs::write(
        a.out.join(REPORT_FILE),
        MetricsReport::many_to_json(&reports) + "\n",
    )?;
    let mut files = vec![REPORT_FILE.to_string()];
    if a.predictions.is_none() {
        write_predictions(&a.out.join(PREDICTIONS_FILE), &pred)?;
        files.push(PREDICTIONS_FILE.into());
    }

    let mut data = dataset_files(&a.data);
    data.extend(a.checkpoint.iter().cloned());
    data.extend(a.predictions.iter().cloned());
    RunManifest {
        command: "evaluate".into(),
        config: a.config.config.clone(),
        data,
        seeds: vec![cfg.seed],
        out: a.out.clone(),
        revision: revision(),
        duration_secs: start.elapsed().as_secs_f64(),
        files,
    }
    .write()
}

/// Ablation variants: name, lambda1 override, lambda2 override.
pub const VARIANTS: [(&str, Option<f64>, Option<f64>); 4] = [
    ("full", None, None),
    ("no-adversarial", Some(0.0), None),
    ("no-balanced", None, Some(0.0)),
    ("neither", Some(0.0), Some(0.0)),
];

#[derive(Debug, Serialize)]
struct AblationRun {
    variant: &'static str,
    seed: u64,
    lambda1: f64,
    lambda2: f64,
    accuracy: f64,
    oadg: f64,
}

#[derive(Debug, Serialize)]
pub struct AblationRow {
    pub variant: &'static str,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seeds: usize,
    pub median_accuracy: f64,
    pub median_oadg: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn ablation_table(rows: &[AblationRow], basis: PartitionBasis, mode: AdgMode) -> String {
    let mut t = format!(
        "{:<16} {:>7} {:>7} {:>5} {:>12} {:>12}\n",
        "variant", "lambda1", "lambda2", "seeds", "median acc", "median oadg"
    );
    for r in rows {
        writeln!(
            t,
            "{:<16} {:>7} {:>7} {:>5} {:>12.2} {:>12.2}",
            r.variant,
            r.lambda1,
            r.lambda2,
            r.seeds,
            100.0 * r.median_accuracy,
            100.0 * r.median_oadg
        )
        .unwrap();
    }
    writeln!(
        t,
        "oadg over {} groups, {} mode, test nodes",
        basis.name(),
        mode.name()
    )
    .unwrap();
    t
}

pub fn ablate(a: &AblateArgs) -> Result<()> {
    let start = Instant::now();
    let base = build_config(&a.config)?;
    if a.seeds.is_empty() {
        return Err(Error::Config {
            key: "seeds".into(),
            msg: "need at least one seed".into(),
        });
    }
    let g = load(&a.data)?;
    prepare_out(&a.out, a.force)?;
    let (basis, mode) = (a.basis.basis(), a.mode.mode());

    let mut runs = Vec::new();
    for &seed in &a.seeds {
        for (variant, l1, l2) in VARIANTS {
            let cfg = TrainConfig {
                seed,
                lambda1: l1.unwrap_or(base.lambda1),
                lambda2: l2.unwrap_or(base.lambda2),
                ..base.clone()
            };
            let out = fit_with(&g, &cfg, |_, _, _| {})?;
            let ck = Checkpoint::new(cfg.clone(), out.best_model, out.best_probe);
            let pred = ck.predict(&g)?;
            let test = split_nodes(&g, seed)?.test;
            let r = audit(
                &g,
                &pred,
                &test,
                basis,
                cfg.group_count,
                mode,
                &ck.config_hash,
            )?;
            eprintln!(
                "seed {seed} {variant}: acc {:.2} oadg {:.2}",
                100.0 * r.accuracy,
                100.0 * r.oadg
            );
            runs.push(AblationRun {
                variant,
                seed,
                lambda1: cfg.lambda1,
                lambda2: cfg.lambda2,
                accuracy: r.accuracy,
                oadg: r.oadg,
            });
        }
    }

    let rows: Vec<AblationRow> = VARIANTS
        .iter()
        .map(|&(variant, _, _)| {
            let mine: Vec<&AblationRun> = runs.iter().filter(|r| r.variant == variant).collect();
            AblationRow {
                variant,
                lambda1: mine[0].lambda1,
                lambda2: mine[0].lambda2,
                seeds: mine.len(),
                median_accuracy: median(mine.iter().map(|r| r.accuracy).collect()),
                median_oadg: median(mine.iter().map(|r| r.oadg).collect()),
            }
        })
        .collect();

    let table = ablation_table(&rows, basis, mode);
    print!("{table}");
    fs::write(a.out.join("ablation.txt"), &table)?;
    let json = serde_json::json!({ "rows": rows, "runs": runs });
    fs::write(
        a.out.join("ablation.json"),
        serde_json::to_string_pretty(&json)? + "\n",
    )?;
    let mut files = vec!["ablation.txt".to_string(), "ablation.json".to_string()];
    if a.plot {
        fs::write(a.out.join("ablation.svg"), ablation_svg(&rows))?;
        files.push("ablation.svg".into());
    }

    RunManifest {
        command: "ablate".into(),
        config: a.config.config.clone(),
        data: dataset_files(&a.data),
        seeds: a.seeds.clone(),
        out: a.out.clone(),
        revision: revision(),
        duration_secs: start.elapsed().as_secs_f64(),
        files,
    }
    .write()
}
