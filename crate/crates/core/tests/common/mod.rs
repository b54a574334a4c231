#![allow(dead_code)]

use gate_core::graph::{DistanceMatrix, Graph};
use gate_core::model::{GateConfig, KnnSpec};
use gate_core::synth::{generate_graph, template_distance, FamilySpec};

pub fn small_config() -> GateConfig {
    GateConfig {
        latent_dim: 3,
        embed_dim: 2,
        k_nn: KnnSpec::Shared(3),
        hidden: 8,
        batch_size: 4,
        epochs: 5,
        ..GateConfig::default()
    }
}

pub fn small_corpus(n: u64, v: usize) -> (Vec<Graph>, DistanceMatrix) {
    let graphs: Vec<Graph> = (0..n)
        .map(|s| {
            let spec = if s % 2 == 0 {
                FamilySpec::Sparse { p: 0.3 }
            } else {
                FamilySpec::ScaleFree { m_attach: 2 }
            };
            generate_graph(&spec, v, s).unwrap()
        })
        .collect();
    let b = template_distance(&graphs, 0.2).unwrap();
    (graphs, b)
}

/// Traits that depend on the edge total, standardized by hand.
pub fn traits_for(graphs: &[Graph]) -> Vec<f64> {
    let raw: Vec<f64> = graphs.iter().map(|g| g.edge_total() as f64).collect();
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let sd = (raw.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    raw.iter().map(|y| (y - mean) / sd).collect()
}
