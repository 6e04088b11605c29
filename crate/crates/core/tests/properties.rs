use fairgraph::autodiff::Tape;
use fairgraph::graph::{
    eigenvector_centrality, generate_biased_graph, normalized_adjacency, partition_nodes,
    split_nodes, GeneratorConfig, Graph, GroupPartition, PartitionBasis,
};
use fairgraph::metrics::{adg_exact, delta_deo, delta_dsp, oadg, AdgMode, PredictionSet};
use fairgraph::model::{bind, ema_update, encode, pairnorm, ModelDims, ModelState};
use fairgraph::objectives::loss_group_balanced;
use fairgraph::rng::{substream, Stream};
use fairgraph::tensor::Tensor;
use proptest::prelude::*;

fn graph_from(n: usize, edges: &[(usize, usize)], feature_dim: usize, seed: u64) -> Graph {
    let mut rng = substream(seed, Stream::Generator);
    let data = (0..n * feature_dim)
        .map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0))
        .collect();
    let features = Tensor::new(n, feature_dim, data).unwrap();
    let labels = (0..n).map(|v| Some(v % 3)).collect();
    Graph::new(edges.iter().copied(), features, labels, Some(3))
        .unwrap()
        .0
}

prop_compose! {
    fn arb_graph(max_n: usize)(n in 2..=max_n)
        (edges in prop::collection::vec((0..n, 0..n), 0..3 * n), n in Just(n), seed in any::<u64>())
        -> Graph {
        graph_from(n, &edges, 3, seed)
    }
}

fn connected_with_edges(g: &Graph) -> bool {
    g.num_edges() > 0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn degree_sum_is_twice_the_edge_count(g in arb_graph(50)) {
        prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.num_edges());
        for v in 0..g.num_nodes() {
            for &u in g.neighbors(v) {
                prop_assert!(g.has_edge(u, v));
                prop_assert_ne!(u, v);
            }
        }
    }

    #[test]
    fn normalized_adjacency_matches_dense_oracle(g in arb_graph(50), self_loops in any::<bool>()) {
        let n = g.num_nodes();
        let mut a = vec![vec![0.0; n]; n];
        for &(u, v) in g.edges() {
            a[u][v] = 1.0;
            a[v][u] = 1.0;
        }
        if self_loops {
            (0..n).for_each(|i| a[i][i] = 1.0);
        }
        let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        let m = normalized_adjacency(&g, self_loops).matrix.to_dense();
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                let want = if a[i][j] == 0.0 { 0.0 } else { a[i][j] / (d[i] * d[j]).sqrt() };
                prop_assert!((m.get(i, j) - want).abs() <= 1e-12);
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                row_sum += m.get(i, j);
            }
            prop_assert!(row_sum.is_finite());
            if d[i] > 0.0 {
                prop_assert!(row_sum > 0.0);
            } else {
                prop_assert_eq!(row_sum, 0.0);
            }
        }
    }

    #[test]
    fn centrality_is_an_eigenvector(g in arb_graph(40).prop_filter("needs an edge", connected_with_edges)) {
        let tol = 1e-10;
        let c = eigenvector_centrality(&g, tol, 200_000).unwrap();
        let x = &c.scores;
        let ax: Vec<f64> = (0..g.num_nodes())
            .map(|v| g.neighbors(v).iter().map(|&u| x[u]).sum())
            .collect();
        let lambda: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let residual = ax.iter().zip(x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(c.converged);
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        prop_assert!(residual <= 10.0 * tol * lambda, "residual {} lambda {}", residual, lambda);
    }

    #[test]
    fn degree_quantile_groups_are_balanced_up_to_ties(g in arb_graph(50), m in 2usize..6) {
        let nodes: Vec<usize> = (0..g.num_nodes()).collect();
        let p = partition_nodes(&g, PartitionBasis::DegreeQuantile, m, &nodes).unwrap();
        let deg = g.degrees();
        for (v, &d) in deg.iter().enumerate() {
            let i = p.assignment[v].unwrap();
            prop_assert!(p.boundaries[i] <= d as f64 && (d as f64) < p.boundaries[i + 1]);
        }
        let mut tie = std::collections::HashMap::new();
        deg.iter().for_each(|d| *tie.entry(d).or_insert(0usize) += 1);
        let largest_tie = *tie.values().max().unwrap();
        let sizes = p.group_sizes();
        if p.num_groups() < m {
            prop_assert!(!p.warnings.is_empty());
            return Ok(());
        }
        let n = nodes.len();
        for (i, &size) in sizes.iter().enumerate() {
            let ideal = (i + 1) * n / m - i * n / m;
            prop_assert!(size.abs_diff(ideal) < largest_tie.max(1), "sizes {:?}, largest tie {}", sizes, largest_tie);
        }
    }

    #[test]
    fn split_is_a_disjoint_cover(g in arb_graph(50).prop_filter("5+ nodes", |g| g.num_nodes() >= 5), seed in any::<u64>()) {
        let s = split_nodes(&g, seed).unwrap();
        let n = g.num_nodes();
        prop_assert_eq!(s.val.len(), n / 5);
        prop_assert_eq!(s.test.len(), n / 5);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn pairnorm_centers_and_rescales(rows in 1usize..12, cols in 1usize..6, s in 0.1f64..4.0, seed in any::<u64>(), constant in any::<bool>()) {
        let mut rng = substream(seed, Stream::Init);
        let data: Vec<f64> = (0..rows * cols)
            .map(|j| if constant { (j % cols) as f64 } else { rand::Rng::random_range(&mut rng, -5.0..5.0) })
            .collect();
        let tape = Tape::new();
        let h = tape.constant(Tensor::new(rows, cols, data).unwrap());
        let out = pairnorm(h, s).unwrap().value();
        for j in 0..cols {
            let mean = (0..rows).map(|i| out.get(i, j)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() <= 1e-10);
        }
        let norm = out.frobenius_norm();
        let target = s * (rows as f64).sqrt();
        prop_assert!(norm <= 1e-8 || (norm - target).abs() <= 1e-8, "norm {} target {}", norm, target);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn encoder_is_permutation_equivariant(g in arb_graph(30), seed in any::<u64>(), self_loops in any::<bool>()) {
        let n = g.num_nodes();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut substream(seed, Stream::Split));
        let pg = g.permuted(&perm).unwrap();
        let dims = ModelDims { input: 3, hidden: 6, embed: 4, predictor_hidden: 4, disc_hidden: 4, classes: 3 };
        let model = ModelState::init(dims, &mut substream(seed, Stream::Init));
        let run = |g: &Graph| {
            let tape = Tape::new();
            let params = bind(&model.online, &tape, false);
            let x = tape.constant(g.features().clone());
            let z = encode(&params, &normalized_adjacency(g, self_loops), x).unwrap().value();
            (*z).clone()
        };
        let z = run(&g);
        let pz = run(&pg);
        for (v, &pv) in perm.iter().enumerate() {
            for (a, b) in z.row(v).iter().zip(pz.row(pv)) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn ema_distance_decays_geometrically(seed in any::<u64>(), k in 1usize..60) {
        let dims = ModelDims { input: 3, hidden: 5, embed: 4, predictor_hidden: 4, disc_hidden: 4, classes: 2 };
        let online = ModelState::init(dims, &mut substream(seed, Stream::Init)).online;
        let mut target = ModelState::init(dims, &mut substream(seed ^ 1, Stream::Init)).online;
        let dist = |t: &fairgraph::model::EncoderParams| {
            let a = t.w0.zip_map(&online.w0, |x, y| x - y).frobenius_norm();
            let b = t.w1.zip_map(&online.w1, |x, y| x - y).frobenius_norm();
            (a * a + b * b).sqrt()
        };
        let d0 = dist(&target);
        for _ in 0..k {
            ema_update(&mut target, &online, 0.99).unwrap();
        }
        let want = 0.99f64.powi(k as i32) * d0;
        prop_assert!((dist(&target) - want).abs() <= 1e-12 * d0.max(1.0));
    }

    #[test]
    fn group_balanced_loss_ignores_uniform_duplication(seed in any::<u64>(), n in 4usize..20, m in 1usize..4) {
        let mut rng = substream(seed, Stream::Init);
        let c = 3;
        let logits = Tensor::new(n, c, (0..n * c).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect()).unwrap();
        let labels: Vec<Option<usize>> = (0..n).map(|v| Some((v * 7 + seed as usize) % c)).collect();
        let groups = m.min(n);
        let partition = GroupPartition {
            basis: PartitionBasis::DegreeQuantile,
            assignment: (0..n).map(|v| Some(v % groups)).collect(),
            boundaries: (0..=groups).map(|i| i as f64).collect(),
            warnings: Vec::new(),
        };
        let train: Vec<usize> = (0..n).collect();
        let twice: Vec<usize> = train.iter().chain(&train).copied().collect();
        let eval = |nodes: &[usize]| {
            let tape = Tape::new();
            loss_group_balanced(tape.constant(logits.clone()), &labels, &partition, nodes).unwrap().item()
        };
        prop_assert!((eval(&train) - eval(&twice)).abs() <= 1e-12);
        if groups == 1 {
            let mean_ce: f64 = (0..n)
                .map(|v| {
                    let r = logits.row(v);
                    let mx = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    mx + r.iter().map(|x| (x - mx).exp()).sum::<f64>().ln() - r[labels[v].unwrap()]
                })
                .sum::<f64>() / n as f64;
            prop_assert!((eval(&train) - mean_ce).abs() <= 1e-12);
        }
    }
}

fn binary(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop::bool::ANY.prop_map(|b| f64::from(u8::from(b))),
        1..=len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exact_gap_on_binary_samples_is_the_accuracy_difference(a in binary(300), b in binary(300)) {
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        prop_assert!((adg_exact(&a, &b).unwrap() - (mean(&a) - mean(&b)).abs()).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn oadg_ignores_group_relabeling(
        truth in prop::collection::vec(0usize..3, 8..60),
        seed in any::<u64>(),
        m in 2usize..5,
        exact in any::<bool>(),
    ) {
        let n = truth.len();
        let mut rng = substream(seed, Stream::Sampling(0));
        let pred: Vec<usize> = truth.iter().map(|&t| if rand::Rng::random_bool(&mut rng, 0.7) { t } else { (t + 1) % 3 }).collect();
        let preds = PredictionSet::new((0..n).collect(), pred, truth).unwrap();
        let mut relabel: Vec<usize> = (0..m).collect();
        rand::seq::SliceRandom::shuffle(relabel.as_mut_slice(), &mut rng);
        let part = |map: &[usize]| GroupPartition {
            basis: PartitionBasis::DegreeQuantile,
            assignment: (0..n).map(|v| Some(map[v % m])).collect(),
            boundaries: (0..=m).map(|i| i as f64).collect(),
            warnings: Vec::new(),
        };
        let mode = if exact { AdgMode::Exact } else { AdgMode::Kde };
        let identity: Vec<usize> = (0..m).collect();
        let a = oadg(&preds, &part(&identity), mode).unwrap();
        let b = oadg(&preds, &part(&relabel), mode).unwrap();
        prop_assert!((a.oadg - b.oadg).abs() <= 1e-12);
        for i in 0..m {
            for j in i + 1..m {
                let (x, y) = (relabel[i].min(relabel[j]), relabel[i].max(relabel[j]));
                prop_assert!((a.pairs[i][j].unwrap() - b.pairs[x][y].unwrap()).abs() <= 1e-12);
            }
        }
        let entries: Vec<f64> = a.pairs.iter().flatten().flatten().copied().collect();
        prop_assert_eq!(entries.len(), m * (m - 1) / 2);
        prop_assert!((a.oadg - entries.iter().sum::<f64>() / entries.len() as f64).abs() <= 1e-12);
        prop_assert_eq!(&a, &oadg(&preds, &part(&identity), mode).unwrap());
    }

    #[test]
    fn parity_gaps_are_bounded_and_vanish_on_mirrored_groups(
        pairs in prop::collection::vec((0usize..3, 0usize..3), 2..40),
        other in prop::collection::vec((0usize..3, 0usize..3), 1..40),
    ) {
        // Group 1 repeats group 0's (prediction, truth) pairs.
        let k = pairs.len();
        let mut pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        pred.extend(pairs.iter().map(|p| p.0));
        truth.extend(pairs.iter().map(|p| p.1));
        let mirrored = PredictionSet::new((0..2 * k).collect(), pred.clone(), truth.clone()).unwrap();
        let g0: Vec<usize> = (0..k).collect();
        let g1: Vec<usize> = (k..2 * k).collect();
        prop_assert_eq!(delta_dsp(&mirrored, &g0, &g1, 3).unwrap(), 0.0);
        if let Ok(deo) = delta_deo(&mirrored, &g0, &g1, 3) {
            prop_assert_eq!(deo, 0.0);
        }
        let partition = GroupPartition {
            basis: PartitionBasis::DegreeExtreme20,
            assignment: (0..2 * k).map(|v| Some(usize::from(v >= k))).collect(),
            boundaries: vec![0.0, 1.0, 2.0],
            warnings: Vec::new(),
        };
        prop_assert!(oadg(&mirrored, &partition, AdgMode::Exact).unwrap().oadg.abs() <= 1e-12);
        prop_assert!(oadg(&mirrored, &partition, AdgMode::Kde).unwrap().oadg.abs() <= 1e-12);

        pred.truncate(k);
        truth.truncate(k);
        pred.extend(other.iter().map(|p| p.0));
        truth.extend(other.iter().map(|p| p.1));
        let n = pred.len();
        let mixed = PredictionSet::new((0..n).collect(), pred, truth).unwrap();
        let g1: Vec<usize> = (k..n).collect();
        let dsp = delta_dsp(&mixed, &g0, &g1, 3).unwrap();
        prop_assert!((0.0..=1.0).contains(&dsp));
        if let Ok(deo) = delta_deo(&mixed, &g0, &g1, 3) {
            prop_assert!((0.0..=1.0).contains(&deo));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn generated_classes_each_hold_five_percent(n in 500usize..1500, gamma in 2.1f64..3.0, bias in 0.0f64..1.0, seed in any::<u64>()) {
        let g = generate_biased_graph(&GeneratorConfig::new(n, gamma, bias, seed)).unwrap();
        let mut counts = vec![0usize; g.num_classes()];
        g.labels().iter().flatten().for_each(|&c| counts[c] += 1);
        for c in counts {
            prop_assert!(c as f64 >= 0.05 * n as f64, "class share {} of {}", c, n);
        }
    }
}
