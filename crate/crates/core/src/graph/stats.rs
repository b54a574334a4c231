use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{edge_count, lower_pairs, Graph};

pub const EIGEN_MAX_ITERS: usize = 1000;
pub const EIGEN_TOL: f64 = 1e-10;

/// The four network summaries compared between observed and generated graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub density: f64,
    pub mean_eigencentrality: Option<f64>,
    pub avg_path_length: Option<f64>,
    pub avg_degree: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Density,
    MeanEigencentrality,
    AvgPathLength,
    AvgDegree,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::Density,
        Measure::MeanEigencentrality,
        Measure::AvgPathLength,
        Measure::AvgDegree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Density => "density",
            Measure::MeanEigencentrality => "mean_eigencentrality",
            Measure::AvgPathLength => "avg_path_length",
            Measure::AvgDegree => "avg_degree",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl SummaryStats {
    pub fn get(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::Density => Some(self.density),
            Measure::MeanEigencentrality => self.mean_eigencentrality,
            Measure::AvgPathLength => self.avg_path_length,
            Measure::AvgDegree => Some(self.avg_degree),
        }
    }
}

pub fn summaries(g: &Graph) -> SummaryStats {
    let n = g.node_count();
    let present = g.edge_total();
    let pairs = edge_count(n);
    SummaryStats {
        density: if pairs == 0 {
            0.0
        } else {
            present as f64 / pairs as f64
        },
        mean_eigencentrality: mean_eigencentrality(g),
        avg_path_length: avg_path_length(g),
        avg_degree: 2.0 * present as f64 / n as f64,
    }
}

/// Hop distances from `source` on the support of `g`; `None` if unreachable.
pub(crate) fn bfs_hops(g: &Graph, source: usize) -> Vec<Option<usize>> {
    let n = g.node_count();
    let w = g.weights();
    let mut dist = vec![None; n];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap_or(0);
        for v in 0..n {
            if w[[u, v]] > 0 && dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Mean hop count over reachable unordered pairs of the binarized graph.
pub fn avg_path_length(g: &Graph) -> Option<f64> {
    let n = g.node_count();
    let (mut total, mut count) = (0usize, 0usize);
    for u in 0..n {
        for d in bfs_hops(g, u).into_iter().skip(u + 1).flatten() {
            total += d;
            count += 1;
        }
    }
    (count > 0).then(|| total as f64 / count as f64)
}

/// Mean absolute entry of the unit-norm principal eigenvector of the
/// weighted adjacency, by power iteration on `A + I`.
///
/// The shift leaves eigenvectors unchanged and keeps bipartite graphs from
/// oscillating. `None` for graphs without edges.
pub fn mean_eigencentrality(g: &Graph) -> Option<f64> {
    let n = g.node_count();
    if lower_pairs(n).all(|(u, v)| g.weight(u, v) == 0) {
        return None;
    }
    let a = g.weights().mapv(|w| w as f64);
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..EIGEN_MAX_ITERS {
        let mut next: Vec<f64> = (0..n)
            .map(|u| x[u] + (0..n).map(|v| a[[u, v]] * x[v]).sum::<f64>())
            .collect();
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        next.iter_mut().for_each(|v| *v /= norm);
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        x = next;
        if change < EIGEN_TOL {
            break;
        }
    }
    Some(x.iter().map(|v| v.abs()).sum::<f64>() / n as f64)
}
