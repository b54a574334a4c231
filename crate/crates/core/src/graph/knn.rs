use ndarray::Array2;

use super::{stats::bfs_hops, Graph};
use crate::{GateError, Result};

/// Symmetric node-to-node distances; `f64::INFINITY` marks unreachable pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    distances: Array2<f64>,
}

impl DistanceMatrix {
    pub fn new(distances: Array2<f64>) -> Result<Self> {
        let (r, c) = distances.dim();
        if r != c || r == 0 {
            return Err(GateError::structural(format!(
                "distance matrix must be square and nonempty, got {r}x{c}"
            )));
        }
        for u in 0..r {
            if distances[[u, u]] != 0.0 {
                return Err(GateError::structural(format!(
                    "nonzero diagonal at node {u}"
                )));
            }
            for v in 0..u {
                let d = distances[[u, v]];
                if d != distances[[v, u]] {
                    return Err(GateError::structural(format!(
                        "asymmetric distance at ({u}, {v})"
                    )));
                }
                if d.is_nan() || d <= 0.0 || d == f64::NEG_INFINITY {
                    return Err(GateError::structural(format!(
                        "off-diagonal distance at ({u}, {v}) must be positive or unreachable, got {d}"
                    )));
                }
            }
        }
        Ok(Self { distances })
    }

    /// Hop-count shortest paths on `g`; unreachable pairs stay infinite.
    pub fn from_hops(g: &Graph) -> Self {
        let n = g.node_count();
        let mut distances = Array2::from_elem((n, n), f64::INFINITY);
        for u in 0..n {
            for (v, hops) in bfs_hops(g, u).into_iter().enumerate() {
                if let Some(h) = hops {
                    distances[[u, v]] = h as f64;
                }
            }
        }
        Self { distances }
    }

    pub fn node_count(&self) -> usize {
        self.distances.nrows()
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.distances[[u, v]]
    }

    pub fn is_reachable(&self, u: usize, v: usize) -> bool {
        self.distances[[u, v]].is_finite()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.distances
    }
}

/// Per-node neighbour lists, nearest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodMap {
    pub k: usize,
    lists: Vec<Vec<usize>>,
}

impl NeighborhoodMap {
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.lists[u]
    }

    pub fn node_count(&self) -> usize {
        self.lists.len()
    }

    /// `V×V` support pattern: the diagonal plus every listed neighbour.
    pub fn mask(&self) -> Array2<bool> {
        let n = self.node_count();
        let mut m = Array2::from_elem((n, n), false);
        for (u, list) in self.lists.iter().enumerate() {
            m[[u, u]] = true;
            for &v in list {
                m[[u, v]] = true;
            }
        }
        m
    }
}

/// The `k` closest reachable nodes of every node, ties broken by index.
///
/// Nodes with fewer than `k` reachable nodes keep all of them.
pub fn knn_from_distance(b: &DistanceMatrix, k: usize) -> Result<NeighborhoodMap> {
    let n = b.node_count();
    if k == 0 || k >= n {
        return Err(GateError::structural(format!(
            "k must lie in 1..{n} for {n} nodes, got {k}"
        )));
    }
    let lists = (0..n)
        .map(|u| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&v| v != u && b.is_reachable(u, v))
                .map(|v| (b.get(u, v), v))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.into_iter().take(k).map(|(_, v)| v).collect()
        })
        .collect();
    Ok(NeighborhoodMap { k, lists })
}
