use rand::seq::SliceRandom;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Disjoint train/validation/test node sets covering every labeled node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMask {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random 6:2:2 split of the labeled nodes. Validation and test each get
/// `floor(0.2 N)` nodes; training absorbs the remainder. Each list is
/// returned sorted.
pub fn split_nodes(g: &Graph, seed: u64) -> Result<SplitMask> {
    let mut nodes = g.labeled_nodes();
    let n = nodes.len();
    let n_val = n / 5;
    let n_test = n / 5;
    if n_val == 0 {
        return Err(Error::Data(format!(
            "{n} labeled nodes cannot fill a 6:2:2 split"
        )));
    }
    nodes.shuffle(&mut substream(seed, Stream::Split));
    let n_train = n - n_val - n_test;
    let mut train = nodes[..n_train].to_vec();
    let mut val = nodes[n_train..n_train + n_val].to_vec();
    let mut test = nodes[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitMask { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn labeled(n: usize) -> Graph {
        Graph::new(
            [],
            Tensor::zeros(n, 1),
            (0..n).map(|v| Some(v % 2)).collect(),
            None,
        )
        .unwrap()
        .0
    }

    #[test]
    fn ten_nodes_split_six_two_two() {
        let s = split_nodes(&labeled(10), 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
    }

    #[test]
    fn eleven_nodes_train_absorbs_remainder() {
        let s = split_nodes(&labeled(11), 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 2, 2));
    }

    #[test]
    fn deterministic_disjoint_and_covering() {
        let g = labeled(57);
        let a = split_nodes(&g, 9).unwrap();
        assert_eq!(a, split_nodes(&g, 9).unwrap());
        let mut all: Vec<usize> = a
            .train
            .iter()
            .chain(&a.val)
            .chain(&a.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn unlabeled_nodes_are_left_out() {
        let (g, _) = Graph::new(
            [],
            Tensor::zeros(12, 1),
            (0..12).map(|v| (v != 3).then_some(0)).collect(),
            None,
        )
        .unwrap();
        let s = split_nodes(&g, 1).unwrap();
        assert!(!s.train.contains(&3) && !s.val.contains(&3) && !s.test.contains(&3));
    }

    #[test]
    fn too_few_nodes() {
        assert!(split_nodes(&labeled(4), 0).is_err());
    }
}
