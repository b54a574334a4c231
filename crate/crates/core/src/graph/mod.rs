//! Weighted undirected graphs, the edge-vector layout shared by every model
//! component, distance matrices and k-nearest-neighbour maps.
//!
//! Edge vectors list the strict lower triangle column by column:
//! `(1,0), (2,0), …, (V-1,0), (2,1), …, (V-1,V-2)` with zero-based node
//! indices. [`pair_index`] and [`PairIndex`] are the only places that encode
//! this mapping.

mod knn;
mod stats;

pub use knn::{knn_from_distance, DistanceMatrix, NeighborhoodMap};
pub use stats::{
    avg_path_length, mean_eigencentrality, summaries, Measure, SummaryStats, EIGEN_MAX_ITERS,
    EIGEN_TOL,
};

use std::sync::Arc;

use ndarray::Array2;

use crate::{GateError, Result};

/// Number of unordered node pairs, `V(V-1)/2`.
pub fn edge_count(node_count: usize) -> usize {
    node_count * node_count.saturating_sub(1) / 2
}

/// Position of pair `(u, v)` (either order, `u != v`) in the edge vector.
pub fn pair_index(node_count: usize, u: usize, v: usize) -> usize {
    let (hi, lo) = if u > v { (u, v) } else { (v, u) };
    debug_assert!(hi < node_count && hi != lo);
    lo * node_count - lo * (lo + 1) / 2 + (hi - lo - 1)
}

/// Node pairs `(u, v)` with `u > v`, in edge-vector order.
pub fn lower_pairs(node_count: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..node_count).flat_map(move |v| (v + 1..node_count).map(move |u| (u, v)))
}

/// Cached row/column indices of every pair, used for gathers in the decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairIndex {
    pub node_count: usize,
    pub rows: Arc<Vec<usize>>,
    pub cols: Arc<Vec<usize>>,
}

impl PairIndex {
    pub fn new(node_count: usize) -> Self {
        let (rows, cols): (Vec<_>, Vec<_>) = lower_pairs(node_count).unzip();
        Self {
            node_count,
            rows: Arc::new(rows),
            cols: Arc::new(cols),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Symmetric, zero-diagonal matrix of nonnegative integer edge weights.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    weights: Array2<u64>,
}

impl Graph {
    pub fn new(weights: Array2<u64>) -> Result<Self> {
        let (r, c) = weights.dim();
        if r != c || r == 0 {
            return Err(GateError::structural(format!(
                "adjacency must be square and nonempty, got {r}x{c}"
            )));
        }
        for u in 0..r {
            if weights[[u, u]] != 0 {
                return Err(GateError::structural(format!("self-loop at node {u}")));
            }
            for v in 0..u {
                if weights[[u, v]] != weights[[v, u]] {
                    return Err(GateError::structural(format!(
                        "asymmetric weight at ({u}, {v})"
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn empty(node_count: usize) -> Self {
        Self {
            weights: Array2::zeros((node_count, node_count)),
        }
    }

    /// Builds a graph from `(u, v, weight)` triples; repeated pairs overwrite.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize, u64)]) -> Result<Self> {
        let mut g = Self::empty(node_count);
        for &(u, v, w) in edges {
            if u >= node_count || v >= node_count || u == v {
                return Err(GateError::structural(format!(
                    "invalid edge ({u}, {v}) for {node_count} nodes"
                )));
            }
            g.set(u, v, w);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, u: usize, v: usize) -> u64 {
        self.weights[[u, v]]
    }

    /// Sets both `(u, v)` and `(v, u)`.
    pub(crate) fn set(&mut self, u: usize, v: usize, w: u64) {
        self.weights[[u, v]] = w;
        self.weights[[v, u]] = w;
    }

    pub fn weights(&self) -> &Array2<u64> {
        &self.weights
    }

    /// Number of pairs with nonzero weight.
    pub fn edge_total(&self) -> usize {
        lower_pairs(self.node_count())
            .filter(|&(u, v)| self.weights[[u, v]] > 0)
            .count()
    }

    /// Nodes joined to `u` by a nonzero weight, ascending.
    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&v| self.weights[[u, v]] > 0)
            .collect()
    }
}

/// Strict-lower-triangle values of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVector<T = u64> {
    node_count: usize,
    values: Vec<T>,
}

impl<T: Copy> EdgeVector<T> {
    pub fn new(node_count: usize, values: Vec<T>) -> Result<Self> {
        let expected = edge_count(node_count);
        if values.len() != expected {
            return Err(GateError::structural(format!(
                "edge vector for V={node_count} needs {expected} entries, got {}",
                values.len()
            )));
        }
        Ok(Self { node_count, values })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> EdgeVector<U> {
        EdgeVector {
            node_count: self.node_count,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

pub fn vectorize(g: &Graph) -> EdgeVector<u64> {
    let values = lower_pairs(g.node_count())
        .map(|(u, v)| g.weight(u, v))
        .collect();
    EdgeVector {
        node_count: g.node_count(),
        values,
    }
}

pub fn devectorize(v: &EdgeVector<u64>) -> Result<Graph> {
    let n = v.node_count();
    if v.len() != edge_count(n) {
        return Err(GateError::structural(format!(
            "edge vector length {} does not match V={n}",
            v.len()
        )));
    }
    let mut g = Graph::empty(n);
    for ((u, w), &val) in lower_pairs(n).zip(v.values()) {
        g.set(u, w, val);
    }
    Ok(g)
}

/// 0/1 graph with an edge wherever the weight exceeds `threshold`.
pub fn dichotomize(g: &Graph, threshold: f64) -> Graph {
    Graph {
        weights: g.weights.mapv(|w| u64::from(w as f64 > threshold)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn three_node() -> Graph {
        // 1-based weights[2][1]=5, [3][1]=7, [3][2]=9
        Graph::from_edges(3, &[(1, 0, 5), (2, 0, 7), (2, 1, 9)]).unwrap()
    }

    #[test]
    fn vectorize_uses_column_major_lower_triangle() {
        assert_eq!(vectorize(&three_node()).values(), &[5, 7, 9]);
        assert_eq!(vectorize(&Graph::empty(2)).values(), &[0]);
        let ones = Graph::new(Array2::from_shape_fn((4, 4), |(i, j)| u64::from(i != j))).unwrap();
        assert_eq!(vectorize(&ones).values(), &[1; 6]);
    }

    #[test]
    fn pair_index_matches_iteration_order() {
        for n in 2..9 {
            for (l, (u, v)) in lower_pairs(n).enumerate() {
                assert_eq!(pair_index(n, u, v), l);
                assert_eq!(pair_index(n, v, u), l);
            }
        }
        // V=4: (1,0) (2,0) (3,0) (2,1) (3,1) (3,2)
        assert_eq!(pair_index(4, 2, 1), 3);
    }

    #[test]
    fn devectorize_inverts_and_validates() {
        let v = EdgeVector::new(3, vec![5, 7, 9]).unwrap();
        assert_eq!(devectorize(&v).unwrap(), three_node());
        let z = EdgeVector::new(4, vec![0; 6]).unwrap();
        assert_eq!(devectorize(&z).unwrap(), Graph::empty(4));
        assert!(EdgeVector::new(3, vec![1u64; 5]).is_err());
    }

    #[test]
    fn graph_invariants_enforced() {
        assert!(Graph::new(array![[0, 1], [2, 0]]).is_err());
        assert!(Graph::new(array![[1, 0], [0, 0]]).is_err());
        assert!(Graph::new(Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn dichotomize_examples() {
        let g = Graph::from_edges(3, &[(1, 0, 0), (2, 0, 1), (2, 1, 5)]).unwrap();
        assert_eq!(vectorize(&dichotomize(&g, 0.0)).values(), &[0, 1, 1]);
        assert_eq!(dichotomize(&g, 5.0), Graph::empty(3));
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..12).prop_flat_map(|n| {
            proptest::collection::vec(0u64..20, edge_count(n))
                .prop_map(move |vals| devectorize(&EdgeVector::new(n, vals).unwrap()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn roundtrip_is_exact(g in arb_graph()) {
            prop_assert_eq!(devectorize(&vectorize(&g)).unwrap(), g);
        }

        #[test]
        fn dichotomize_idempotent_at_zero(g in arb_graph()) {
            let once = dichotomize(&g, 0.0);
            prop_assert_eq!(dichotomize(&once, 0.0), once);
        }
    }
}
