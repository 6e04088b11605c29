use std::sync::Arc;

use super::Graph;
use crate::tensor::CsrMatrix;

/// Symmetrically normalized adjacency `D^{-1/2} A D^{-1/2}`, optionally on
/// `A + I`.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    pub matrix: Arc<CsrMatrix>,
    pub self_loops: bool,
}

/// Entry `(i, j)` is `1/sqrt(d_i d_j)` for every retained edge, with degrees
/// counted after the optional self-loop. Isolated nodes without a self-loop
/// get an empty row.
pub fn normalized_adjacency(g: &Graph, add_self_loops: bool) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let extra = usize::from(add_self_loops);
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| {
            let d = g.degree(v) + extra;
            if d == 0 {
                0.0
            } else {
                1.0 / (d as f64).sqrt()
            }
        })
        .collect();

    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(2 * g.num_edges() + extra * n);
    let mut values = Vec::with_capacity(indices.capacity());
    indptr.push(0);
    for i in 0..n {
        let mut self_done = !add_self_loops;
        for &j in g.neighbors(i) {
            if !self_done && j > i {
                indices.push(i);
                values.push(inv_sqrt[i] * inv_sqrt[i]);
                self_done = true;
            }
            indices.push(j);
            values.push(inv_sqrt[i] * inv_sqrt[j]);
        }
        if !self_done {
            indices.push(i);
            values.push(inv_sqrt[i] * inv_sqrt[i]);
        }
        indptr.push(indices.len());
    }
    let matrix = CsrMatrix::new(n, n, indptr, indices, values)
        .expect("normalized adjacency arrays are consistent by construction");
    NormalizedAdjacency {
        matrix: Arc::new(matrix),
        self_loops: add_self_loops,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(
            edges.iter().copied(),
            Tensor::filled(n, 1, 1.0),
            vec![None; n],
            None,
        )
        .unwrap()
        .0
    }

    #[test]
    fn path_without_self_loops() {
        let a = normalized_adjacency(&graph(2, &[(0, 1)]), false)
            .matrix
            .to_dense();
        assert_eq!(a.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn path_with_self_loops() {
        let a = normalized_adjacency(&graph(2, &[(0, 1)]), true)
            .matrix
            .to_dense();
        for &x in a.data() {
            assert!((x - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_node_gives_zero_row() {
        let a = normalized_adjacency(&graph(3, &[(0, 1)]), false)
            .matrix
            .to_dense();
        assert_eq!(a.row(2), &[0.0, 0.0, 0.0]);
        assert!(a.all_finite());
    }

    #[test]
    fn columns_are_sorted_with_self_loop_in_place() {
        let adj = normalized_adjacency(&graph(4, &[(1, 0), (1, 3), (1, 2)]), true);
        let cols: Vec<usize> = adj.matrix.row(1).map(|(j, _)| j).collect();
        assert_eq!(cols, vec![0, 1, 2, 3]);
    }
}
