//! Eigenvector centrality by damped power iteration on the raw adjacency.

use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Centrality {
    /// Unit L2 norm, entrywise nonnegative.
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

/// Iterates `x <- normalize(0.5 x + 0.5 Ax/|Ax|)` from the all-ones vector
/// until successive iterates differ by less than `tol` in max-norm. The
/// half-step damping keeps bipartite graphs from oscillating. On
/// exhaustion the last iterate is returned with `converged = false`.
pub fn eigenvector_centrality(g: &Graph, tol: f64, max_iter: usize) -> Result<Centrality> {
    if g.num_edges() == 0 {
        return Err(Error::Data(
            "eigenvector centrality needs at least one edge".into(),
        ));
    }
    let n = g.num_nodes();
    let mut x = vec![1.0; n];
    normalize(&mut x);
    let mut ax = vec![0.0; n];

    for it in 1..=max_iter {
        for (v, out) in ax.iter_mut().enumerate() {
            *out = g.neighbors(v).iter().map(|&u| x[u]).sum();
        }
        normalize(&mut ax);
        let mut next: Vec<f64> = x.iter().zip(&ax).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        normalize(&mut next);
        let diff = next
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = next;
        if diff < tol {
            return Ok(Centrality {
                scores: x,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(Centrality {
        scores: x,
        iterations: max_iter,
        converged: false,
    })
}
