use serde::{Deserialize, Serialize};

use crate::{GateError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Softplus,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Activation::Sigmoid,
            Activation::Relu,
            Activation::Softplus,
            Activation::Linear,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| GateError::Format(format!("unknown activation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderVariant {
    /// Node embeddings from a k-NN-masked GCN, rates from weighted inner products.
    LatentSpace,
    /// Unstructured two-layer map from `z` to log-rates.
    Dense,
}

impl DecoderVariant {
    pub fn name(self) -> &'static str {
        match self {
            DecoderVariant::LatentSpace => "latent_space",
            DecoderVariant::Dense => "dense",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "latent_space" => Ok(DecoderVariant::LatentSpace),
            "dense" => Ok(DecoderVariant::Dense),
            _ => Err(GateError::Format(format!("unknown decoder variant `{s}`"))),
        }
    }
}

/// Neighbour count for the GCN masks: one value for every embedding
/// dimension or one per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnnSpec {
    Shared(usize),
    PerDimension(Vec<usize>),
}

impl KnnSpec {
    pub fn for_dimension(&self, r: usize) -> usize {
        match self {
            KnnSpec::Shared(k) => *k,
            KnnSpec::PerDimension(ks) => ks[r],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    /// Latent dimension `K`.
    pub latent_dim: usize,
    /// Node-embedding dimension `R`.
    pub embed_dim: usize,
    /// GCN depth `M`.
    pub depth: usize,
    pub k_nn: KnnSpec,
    /// Encoder width; also the hidden width of the dense decoder.
    pub hidden: usize,
    /// Monte-Carlo draws `L` per example.
    pub mc_samples: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub decoder_variant: DecoderVariant,
    /// One activation per GCN layer.
    pub activations: Vec<Activation>,
    /// Softplus-constrained positive GCN weights on the mask support.
    pub positive_weights: bool,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            latent_dim: 45,
            embed_dim: 5,
            depth: 2,
            k_nn: KnnSpec::Shared(16),
            hidden: 400,
            mc_samples: 1,
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 200,
            seed: 0,
            decoder_variant: DecoderVariant::LatentSpace,
            activations: vec![Activation::Sigmoid; 2],
            positive_weights: false,
        }
    }
}

impl GateConfig {
    pub fn validate(&self, node_count: usize) -> Result<()> {
        let bad = |msg: String| Err(GateError::Structural(msg));
        if self.latent_dim == 0 || self.embed_dim == 0 || self.depth == 0 {
            return bad("latent_dim, embed_dim and depth must be at least 1".into());
        }
        if self.hidden == 0 || self.mc_samples == 0 || self.batch_size == 0 {
            return bad("hidden, mc_samples and batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if node_count < 2 {
            return bad(format!("graphs need at least 2 nodes, got {node_count}"));
        }
        if self.decoder_variant == DecoderVariant::LatentSpace {
            if self.activations.len() != self.depth {
                return bad(format!(
                    "{} activations given for depth {}",
                    self.activations.len(),
                    self.depth
                ));
            }
            if let KnnSpec::PerDimension(ks) = &self.k_nn {
                if ks.len() != self.embed_dim {
                    return bad(format!(
                        "{} k_nn values given for embed_dim {}",
                        ks.len(),
                        self.embed_dim
                    ));
                }
            }
            if self.depth > 1 {
                for r in 0..self.embed_dim {
                    let k = self.k_nn.for_dimension(r);
                    if k == 0 || k >= node_count {
                        return bad(format!("k_nn must lie in 1..{node_count}, got {k}"));
                    }
                }
            }
        }
        Ok(())
    }
}
