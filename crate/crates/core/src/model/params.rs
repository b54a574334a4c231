use std::sync::Arc;

use gate_diffkit::{Mat, Tape, Var};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{Activation, DecoderVariant, GateConfig};
use crate::graph::{edge_count, knn_from_distance, DistanceMatrix, PairIndex};
use crate::{GateError, Result};

/// One branch of the encoder: `D → hidden (ReLU) → K (linear)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBranch {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub mu: EncoderBranch,
    pub logvar: EncoderBranch,
}

/// Masked GCN layer `m ≥ 2`: one `V×V` matrix per embedding dimension and a
/// shared bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub weights: Vec<Mat>,
    pub bias: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSpaceDecoder {
    pub gamma: Mat,
    /// `α_r = exp(alpha_raw_r)`, `R×1`.
    pub alpha_raw: Mat,
    /// `W^(r,1)`, each `V×K`.
    pub first_layer: Vec<Mat>,
    pub first_bias: Mat,
    pub deep_layers: Vec<GcnLayer>,
    /// Diagonal plus k-NN support, one pattern per embedding dimension.
    pub masks: Vec<Arc<Array2<bool>>>,
    pub activations: Vec<Activation>,
    pub positive_weights: bool,
    pub(crate) pairs: PairIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseDecoder {
    pub gamma: Mat,
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecoderParams {
    LatentSpace(LatentSpaceDecoder),
    Dense(DenseDecoder),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub node_count: usize,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Mat {
    let s = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-s..s))
}

fn softplus_inverse(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

impl EncoderBranch {
    fn init(rng: &mut ChaCha8Rng, input: usize, hidden: usize, latent: usize) -> Self {
        Self {
            w1: uniform(rng, hidden, input, input),
            b1: uniform(rng, hidden, 1, input),
            w2: uniform(rng, latent, hidden, hidden),
            b2: uniform(rng, latent, 1, hidden),
        }
    }

    fn tensors(&self) -> [&Mat; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn tensors_mut(&mut self) -> [&mut Mat; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

impl EncoderParams {
    pub fn input_dim(&self) -> usize {
        self.mu.w1.ncols()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.w2.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.mu.w1.nrows()
    }

    pub fn tensors(&self) -> Vec<&Mat> {
        self.mu
            .tensors()
            .into_iter()
            .chain(self.logvar.tensors())
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let EncoderParams { mu, logvar } = self;
        mu.tensors_mut()
            .into_iter()
            .chain(logvar.tensors_mut())
            .collect()
    }
}

impl LatentSpaceDecoder {
    pub fn node_count(&self) -> usize {
        self.first_bias.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.first_layer.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.first_layer[0].ncols()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.alpha_raw.iter().map(|a| a.exp()).collect()
    }

    /// Effective `W^(r,m)` for `m ≥ 2` (index `layer` counts from zero).
    pub fn effective_weight(&self, layer: usize, r: usize) -> Mat {
        let raw = &self.deep_layers[layer].weights[r];
        let mask = &self.masks[r];
        Array2::from_shape_fn(raw.dim(), |(i, j)| {
            if !mask[[i, j]] {
                0.0
            } else if self.positive_weights {
                let x: f64 = raw[[i, j]];
                x.max(0.0) + (-x.abs()).exp().ln_1p()
            } else {
                raw[[i, j]]
            }
        })
    }
}

impl DecoderParams {
    pub fn variant(&self) -> DecoderVariant {
        match self {
            DecoderParams::LatentSpace(_) => DecoderVariant::LatentSpace,
            DecoderParams::Dense(_) => DecoderVariant::Dense,
        }
    }

    pub fn gamma(&self) -> &Mat {
        match self {
            DecoderParams::LatentSpace(d) => &d.gamma,
            DecoderParams::Dense(d) => &d.gamma,
        }
    }

    pub fn gamma_mut(&mut self) -> &mut Mat {
        match self {
            DecoderParams::LatentSpace(d) => &mut d.gamma,
            DecoderParams::Dense(d) => &mut d.gamma,
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            DecoderParams::LatentSpace(d) => d.latent_dim(),
            DecoderParams::Dense(d) => d.w1.ncols(),
        }
    }

    pub fn edge_dim(&self) -> usize {
        self.gamma().nrows()
    }

    pub fn node_count(&self) -> usize {
        super::sample::node_count_for(self.edge_dim())
    }

    /// Every trainable tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&Mat> {
        match self {
            DecoderParams::LatentSpace(d) => {
                let mut out = vec![&d.gamma, &d.alpha_raw];
                out.extend(d.first_layer.iter());
                out.push(&d.first_bias);
                for layer in &d.deep_layers {
                    out.extend(layer.weights.iter());
                    out.push(&layer.bias);
                }
                out
            }
            DecoderParams::Dense(d) => vec![&d.gamma, &d.w1, &d.b1, &d.w2],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        match self {
            DecoderParams::LatentSpace(d) => {
                let mut out = vec![&mut d.gamma, &mut d.alpha_raw];
                out.extend(d.first_layer.iter_mut());
                out.push(&mut d.first_bias);
                for layer in &mut d.deep_layers {
                    out.extend(layer.weights.iter_mut());
                    out.push(&mut layer.bias);
                }
                out
            }
            DecoderParams::Dense(d) => vec![&mut d.gamma, &mut d.w1, &mut d.b1, &mut d.w2],
        }
    }

    /// Tape handles for [`tensors`](Self::tensors), in the same order.
    pub fn bind(&self, vars: &[Var]) -> Result<DecoderVars> {
        let expected = self.tensors().len();
        if vars.len() != expected {
            return Err(GateError::structural(format!(
                "decoder expects {expected} tensors, got {}",
                vars.len()
            )));
        }
        Ok(match self {
            DecoderParams::LatentSpace(d) => {
                let r = d.embed_dim();
                let mut it = vars.iter().copied();
                let mut next = || it.next().expect("length checked");
                let gamma = next();
                let alpha_raw = next();
                let first: Vec<Var> = (0..r).map(|_| next()).collect();
                let first_bias = next();
                let deep = d
                    .deep_layers
                    .iter()
                    .map(|_| {
                        let w: Vec<Var> = (0..r).map(|_| next()).collect();
                        (w, next())
                    })
                    .collect();
                DecoderVars::LatentSpace {
                    gamma,
                    alpha_raw,
                    first,
                    first_bias,
                    deep,
                }
            }
            DecoderParams::Dense(_) => DecoderVars::Dense {
                gamma: vars[0],
                w1: vars[1],
                b1: vars[2],
                w2: vars[3],
            },
        })
    }

    pub fn leaves(&self, tape: &mut Tape, track: bool) -> Vec<Var> {
        leaves(tape, self.tensors(), track)
    }
}

/// Tape handles of the decoder tensors.
#[derive(Debug, Clone)]
pub enum DecoderVars {
    LatentSpace {
        gamma: Var,
        alpha_raw: Var,
        first: Vec<Var>,
        first_bias: Var,
        deep: Vec<(Vec<Var>, Var)>,
    },
    Dense {
        gamma: Var,
        w1: Var,
        b1: Var,
        w2: Var,
    },
}

/// Tape handles of the encoder tensors: `[w1, b1, w2, b2]` per branch.
#[derive(Debug, Clone, Copy)]
pub struct EncoderVars {
    pub mu: [Var; 4],
    pub logvar: [Var; 4],
}

impl EncoderVars {
    pub fn bind(vars: &[Var]) -> Result<Self> {
        if vars.len() != 8 {
            return Err(GateError::structural(format!(
                "encoder expects 8 tensors, got {}",
                vars.len()
            )));
        }
        Ok(Self {
            mu: [vars[0], vars[1], vars[2], vars[3]],
            logvar: [vars[4], vars[5], vars[6], vars[7]],
        })
    }
}

pub(crate) fn leaves(tape: &mut Tape, tensors: Vec<&Mat>, track: bool) -> Vec<Var> {
    tensors
        .into_iter()
        .map(|m| {
            if track {
                tape.param(m)
            } else {
                tape.constant(m.clone())
            }
        })
        .collect()
}

impl GateParams {
    /// Fresh parameters with `γ = 0`; see [`GateParams::calibrate_baseline`].
    pub fn init(
        config: &GateConfig,
        node_count: usize,
        distances: Option<&DistanceMatrix>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let masks = match config.decoder_variant {
            DecoderVariant::LatentSpace if config.depth > 1 => {
                let b = distances.ok_or_else(|| {
                    GateError::structural("a distance matrix is required when depth > 1")
                })?;
                if b.node_count() != node_count {
                    return Err(GateError::structural(format!(
                        "distance matrix has {} nodes, graphs have {node_count}",
                        b.node_count()
                    )));
                }
                (0..config.embed_dim)
                    .map(|i| {
                        Ok(Arc::new(
                            knn_from_distance(b, config.k_nn.for_dimension(i))?.mask(),
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            _ => Vec::new(),
        };
        Self::init_with_masks(config, node_count, masks, rng)
    }

    /// Random initialization with given deep-layer masks, one per embedding
    /// dimension (none when `depth == 1` or for the dense decoder).
    pub fn init_with_masks(
        config: &GateConfig,
        node_count: usize,
        masks: Vec<Arc<Array2<bool>>>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        config.validate(node_count)?;
        let d = edge_count(node_count);
        let (k, r, h) = (config.latent_dim, config.embed_dim, config.hidden);
        let needs_masks = config.decoder_variant == DecoderVariant::LatentSpace && config.depth > 1;
        let expected = if needs_masks { r } else { 0 };
        if masks.len() != expected || masks.iter().any(|m| m.dim() != (node_count, node_count)) {
            return Err(GateError::structural(format!(
                "expected {expected} masks of {node_count}×{node_count}"
            )));
        }
        let encoder = EncoderParams {
            mu: EncoderBranch::init(rng, d, h, k),
            logvar: EncoderBranch::init(rng, d, h, k),
        };
        let decoder = match config.decoder_variant {
            DecoderVariant::Dense => DecoderParams::Dense(DenseDecoder {
                gamma: Mat::zeros((d, 1)),
                w1: uniform(rng, h, k, k),
                b1: uniform(rng, h, 1, k),
                w2: uniform(rng, d, h, h),
            }),
            DecoderVariant::LatentSpace => {
                let first_layer = (0..r).map(|_| uniform(rng, node_count, k, k)).collect();
                let first_bias = uniform(rng, node_count, 1, k);
                let deep_layers = (1..config.depth)
                    .map(|_| {
                        let weights = masks
                            .iter()
                            .map(|mask| {
                                let fan_in = mask.iter().filter(|&&b| b).count() / node_count;
                                let s = 1.0 / (fan_in.max(1) as f64).sqrt();
                                Array2::from_shape_fn((node_count, node_count), |(i, j)| {
                                    if !mask[[i, j]] {
                                        0.0
                                    } else if config.positive_weights {
                                        softplus_inverse(rng.gen_range(0.05 * s..s))
                                    } else {
                                        rng.gen_range(-s..s)
                                    }
                                })
                            })
                            .collect();
                        let fan_in = config.k_nn.for_dimension(0) + 1;
                        GcnLayer {
                            weights,
                            bias: uniform(rng, node_count, 1, fan_in),
                        }
                    })
                    .collect();
                DecoderParams::LatentSpace(LatentSpaceDecoder {
                    gamma: Mat::zeros((d, 1)),
                    alpha_raw: Mat::zeros((r, 1)),
                    first_layer,
                    first_bias,
                    deep_layers,
                    masks,
                    activations: config.activations.clone(),
                    positive_weights: config.positive_weights,
                    pairs: PairIndex::new(node_count),
                })
            }
        };
        Ok(Self {
            node_count,
            encoder,
            decoder,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.latent_dim()
    }

    pub fn edge_dim(&self) -> usize {
        self.decoder.edge_dim()
    }

    /// Encoder tensors followed by decoder tensors.
    pub fn tensors(&self) -> Vec<&Mat> {
        let mut out = self.encoder.tensors();
        out.extend(self.decoder.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let GateParams {
            encoder, decoder, ..
        } = self;
        let mut out = encoder.tensors_mut();
        out.extend(decoder.tensors_mut());
        out
    }

    pub fn leaves(&self, tape: &mut Tape, track: bool) -> Vec<Var> {
        leaves(tape, self.tensors(), track)
    }

    pub fn bind(&self, vars: &[Var]) -> Result<(EncoderVars, DecoderVars)> {
        if vars.len() < 8 {
            return Err(GateError::structural("too few tensors for the encoder"));
        }
        Ok((
            EncoderVars::bind(&vars[..8])?,
            self.decoder.bind(&vars[8..])?,
        ))
    }
}
