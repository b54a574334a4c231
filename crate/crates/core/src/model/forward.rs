use std::sync::Arc;

use gate_diffkit::{Mat, Tape, Var};
use ndarray::{Array2, Axis};
use statrs::function::gamma::ln_gamma;

use super::config::Activation;
use super::params::{DecoderParams, DecoderVars, EncoderVars, GateParams};
use crate::graph::{vectorize, EdgeVector, Graph};
use crate::regate::HeadVars;
use crate::{GateError, Result};

pub const LOGVAR_MIN: f64 = -20.0;
pub const LOGVAR_MAX: f64 = 20.0;
pub const LOG_RATE_MAX: f64 = 30.0;

/// Diagonal Gaussian `q(z | A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub mean: Vec<f64>,
    pub logvar: Vec<f64>,
}

/// Column-stacked examples ready for a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `D×m` edge counts.
    pub counts: Mat,
    /// `D×m` encoder input, `log1p(counts)`.
    pub input: Mat,
    /// `Σ log(a!)` over every cell of the batch.
    pub log_factorial: f64,
}

impl Batch {
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a Graph>) -> Result<Self> {
        let vecs: Vec<EdgeVector> = graphs.into_iter().map(vectorize).collect();
        Self::from_edge_vectors(&vecs)
    }

    pub fn from_edge_vectors(vecs: &[EdgeVector]) -> Result<Self> {
        let d = vecs
            .first()
            .ok_or_else(|| GateError::structural("empty batch"))?
            .len();
        if vecs.iter().any(|v| v.len() != d) {
            return Err(GateError::structural("batch graphs differ in size"));
        }
        let counts = Array2::from_shape_fn((d, vecs.len()), |(l, i)| vecs[i].values()[l] as f64);
        Ok(Self::from_counts(counts))
    }

    pub fn from_counts(counts: Mat) -> Self {
        let input = counts.mapv(f64::ln_1p);
        let log_factorial = counts.iter().map(|&a| log_factorial(a)).sum();
        Self {
            counts,
            input,
            log_factorial,
        }
    }

    pub fn select(&self, columns: &[usize]) -> Self {
        let counts = self.counts.select(Axis(1), columns);
        let input = self.input.select(Axis(1), columns);
        let log_factorial = counts.iter().map(|&a| log_factorial(a)).sum();
        Self {
            counts,
            input,
            log_factorial,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn log_factorial(a: f64) -> f64 {
    if a < 2.0 {
        0.0
    } else {
        ln_gamma(a + 1.0)
    }
}

pub(crate) fn activate(t: &mut Tape, act: Activation, x: Var) -> Result<Var> {
    Ok(match act {
        Activation::Sigmoid => t.sigmoid(x)?,
        Activation::Relu => t.relu(x)?,
        Activation::Softplus => t.softplus(x)?,
        Activation::Linear => x,
    })
}

fn dense_layer(t: &mut Tape, w: Var, b: Var, x: Var) -> Result<Var> {
    let h = t.matmul(w, x)?;
    Ok(t.add_col_bias(h, b)?)
}

/// Posterior mean and clamped log-variance, each `K×m`.
pub fn encode_vars(t: &mut Tape, enc: &EncoderVars, input: Var) -> Result<(Var, Var)> {
    let branch = |t: &mut Tape, [w1, b1, w2, b2]: [Var; 4]| -> Result<Var> {
        let h = dense_layer(t, w1, b1, input)?;
        let h = t.relu(h)?;
        dense_layer(t, w2, b2, h)
    };
    let mu = branch(t, enc.mu)?;
    let lv = branch(t, enc.logvar)?;
    let lv = t.clamp(lv, LOGVAR_MIN, LOGVAR_MAX)?;
    Ok((mu, lv))
}

/// `z = μ + ε ⊙ exp(logvar / 2)`.
pub fn reparameterize_vars(t: &mut Tape, mu: Var, logvar: Var, noise: Var) -> Result<Var> {
    let half = t.mul_const(logvar, 0.5)?;
    let sd = t.exp(half)?;
    let spread = t.hadamard(noise, sd)?;
    Ok(t.add(mu, spread)?)
}

/// Node embeddings `X_r`, each `V×m`, of the latent-space decoder.
pub fn embeddings_vars(
    t: &mut Tape,
    dec: &DecoderParams,
    vars: &DecoderVars,
    z: Var,
) -> Result<Vec<Var>> {
    let (
        DecoderParams::LatentSpace(d),
        DecoderVars::LatentSpace {
            first,
            first_bias,
            deep,
            ..
        },
    ) = (dec, vars)
    else {
        return Err(GateError::structural(
            "node embeddings need the latent-space decoder",
        ));
    };
    let mut out = Vec::with_capacity(first.len());
    for (r, &w1) in first.iter().enumerate() {
        let mut h = dense_layer(t, w1, *first_bias, z)?;
        h = activate(t, d.activations[0], h)?;
        for (m, (ws, bias)) in deep.iter().enumerate() {
            let mut w = ws[r];
            if d.positive_weights {
                w = t.softplus(w)?;
            }
            let w = t.mask(w, Arc::clone(&d.masks[r]))?;
            h = dense_layer(t, w, *bias, h)?;
            h = activate(t, d.activations[m + 1], h)?;
        }
        out.push(h);
    }
    Ok(out)
}

/// Clamped log-rates `log λ`, `D×m`.
pub fn decode_vars(t: &mut Tape, dec: &DecoderParams, vars: &DecoderVars, z: Var) -> Result<Var> {
    let logits = match (dec, vars) {
        (
            DecoderParams::LatentSpace(d),
            DecoderVars::LatentSpace {
                gamma, alpha_raw, ..
            },
        ) => {
            let alpha = t.exp(*alpha_raw)?;
            let mut psi: Option<Var> = None;
            for (r, x) in embeddings_vars(t, dec, vars, z)?.into_iter().enumerate() {
                let xu = t.gather_rows(x, Arc::clone(&d.pairs.rows))?;
                let xv = t.gather_rows(x, Arc::clone(&d.pairs.cols))?;
                let prod = t.hadamard(xu, xv)?;
                let a_r = t.gather_rows(alpha, Arc::new(vec![r]))?;
                let term = t.scale(a_r, prod)?;
                psi = Some(match psi {
                    Some(acc) => t.add(acc, term)?,
                    None => term,
                });
            }
            let psi = psi.ok_or_else(|| GateError::structural("embed_dim must be at least 1"))?;
            t.add_col_bias(psi, *gamma)?
        }
        (DecoderParams::Dense(_), DecoderVars::Dense { gamma, w1, b1, w2 }) => {
            let h = dense_layer(t, *w1, *b1, z)?;
            let h = t.relu(h)?;
            dense_layer(t, *w2, *gamma, h)?
        }
        _ => {
            return Err(GateError::structural(
                "decoder parameters and handles disagree",
            ))
        }
    };
    Ok(t.clamp(logits, f64::NEG_INFINITY, LOG_RATE_MAX)?)
}

/// `Σ [a log λ − λ − log a!]` over every cell of the batch.
pub fn poisson_loglik_vars(
    t: &mut Tape,
    counts: Var,
    log_rate: Var,
    log_factorial: f64,
) -> Result<Var> {
    let fit = t.hadamard(counts, log_rate)?;
    let fit = t.sum(fit)?;
    let rate = t.exp(log_rate)?;
    let mass = t.sum(rate)?;
    let ll = t.sub(fit, mass)?;
    Ok(t.add_const(ll, -log_factorial)?)
}

/// `½ Σ (μ² + σ² − 1 − log σ²)` over every entry.
pub fn kl_vars(t: &mut Tape, mu: Var, logvar: Var) -> Result<Var> {
    let entries = t.value(mu).len() as f64;
    let sq = t.hadamard(mu, mu)?;
    let var = t.exp(logvar)?;
    let s = t.add(sq, var)?;
    let s = t.sub(s, logvar)?;
    let s = t.sum(s)?;
    let s = t.add_const(s, -entries)?;
    Ok(t.mul_const(s, 0.5)?)
}

/// Pieces of a batch objective; `total` is `Σ_i L̃_i` on the tape.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    pub total: Var,
    /// MC average of the summed Poisson log-likelihood.
    pub loglik: f64,
    pub kl: f64,
    /// MC average of the summed Gaussian trait log-likelihood, zero without a head.
    pub trait_loglik: f64,
}

/// Head terms of the supervised objective: handles plus the `1×m` traits.
#[derive(Debug, Clone, Copy)]
pub struct HeadInput {
    pub vars: HeadVars,
    pub traits: Var,
}

/// Negative Monte-Carlo ELBO summed over the batch, with frozen `noise`
/// (`L` matrices of shape `K×m`).
pub fn objective_vars(
    t: &mut Tape,
    dec: &DecoderParams,
    enc: &EncoderVars,
    dec_vars: &DecoderVars,
    batch: &Batch,
    noise: &[Mat],
    head: Option<HeadInput>,
) -> Result<Objective> {
    if noise.is_empty() {
        return Err(GateError::structural("at least one noise draw is required"));
    }
    let input = t.constant(batch.input.clone());
    let counts = t.constant(batch.counts.clone());
    let (mu, logvar) = encode_vars(t, enc, input)?;
    if noise.iter().any(|e| e.dim() != t.value(mu).dim()) {
        return Err(GateError::structural(format!(
            "noise draws must be {:?}",
            t.value(mu).dim()
        )));
    }
    let mut acc: Option<Var> = None;
    let (mut loglik, mut trait_ll) = (0.0, 0.0);
    for e in noise {
        let e = t.constant(e.clone());
        let z = reparameterize_vars(t, mu, logvar, e)?;
        let log_rate = decode_vars(t, dec, dec_vars, z)?;
        let mut term = poisson_loglik_vars(t, counts, log_rate, batch.log_factorial)?;
        loglik += t.scalar(term)?;
        if let Some(h) = head {
            let g = crate::regate::gaussian_loglik_vars(t, &h.vars, z, h.traits)?;
            trait_ll += t.scalar(g)?;
            term = t.add(term, g)?;
        }
        acc = Some(match acc {
            Some(a) => t.add(a, term)?,
            None => term,
        });
    }
    let l = noise.len() as f64;
    let mc = t.mul_const(acc.expect("noise nonempty"), -1.0 / l)?;
    let kl = kl_vars(t, mu, logvar)?;
    let kl_value = t.scalar(kl)?;
    let total = t.add(mc, kl)?;
    Ok(Objective {
        total,
        loglik: loglik / l,
        kl: kl_value,
        trait_loglik: trait_ll / l,
    })
}

fn column(m: &Mat, j: usize) -> Vec<f64> {
    m.column(j).to_vec()
}

fn as_column(v: &[f64]) -> Mat {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column shape")
}

const ENCODE_CHUNK: usize = 256;

/// Posterior codes of every graph, encoded in column chunks.
pub fn encode_all(graphs: &[Graph], params: &GateParams) -> Result<Vec<LatentCode>> {
    let mut out = Vec::with_capacity(graphs.len());
    for chunk in graphs.chunks(ENCODE_CHUNK) {
        let batch = Batch::from_graphs(chunk)?;
        out.extend(encode_batch(&batch, params)?);
    }
    Ok(out)
}

pub fn encode_batch(batch: &Batch, params: &GateParams) -> Result<Vec<LatentCode>> {
    if batch.input.nrows() != params.encoder.input_dim() {
        return Err(GateError::structural(format!(
            "encoder expects {} edges, got {}",
            params.encoder.input_dim(),
            batch.input.nrows()
        )));
    }
    let mut t = Tape::new();
    let leaves = super::params::leaves(&mut t, params.encoder.tensors(), false);
    let enc = EncoderVars::bind(&leaves)?;
    let input = t.constant(batch.input.clone());
    let (mu, lv) = encode_vars(&mut t, &enc, input)?;
    let (mu, lv) = (t.value(mu), t.value(lv));
    Ok((0..batch.len())
        .map(|j| LatentCode {
            mean: column(mu, j),
            logvar: column(lv, j),
        })
        .collect())
}

pub fn encode(g: &Graph, params: &GateParams) -> Result<LatentCode> {
    Ok(encode_batch(&Batch::from_graphs([g])?, params)?.remove(0))
}

pub fn reparameterize(code: &LatentCode, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != code.mean.len() || code.logvar.len() != code.mean.len() {
        return Err(GateError::structural("noise and code lengths differ"));
    }
    Ok(code
        .mean
        .iter()
        .zip(&code.logvar)
        .zip(noise)
        .map(|((m, lv), e)| m + e * (0.5 * lv).exp())
        .collect())
}

/// Clamped log-rates for the codes in the columns of `z` (`K×m`).
pub fn decode_log_rates(dec: &DecoderParams, z: &Mat) -> Result<Mat> {
    if z.nrows() != dec.latent_dim() {
        return Err(GateError::structural(format!(
            "decoder expects codes of length {}, got {}",
            dec.latent_dim(),
            z.nrows()
        )));
    }
    let mut t = Tape::new();
    let leaves = dec.leaves(&mut t, false);
    let vars = dec.bind(&leaves)?;
    let zv = t.constant(z.clone());
    let lr = decode_vars(&mut t, dec, &vars, zv)?;
    Ok(t.value(lr).clone())
}

pub fn decode_rates(z: &[f64], dec: &DecoderParams) -> Result<Vec<f64>> {
    Ok(decode_log_rates(dec, &as_column(z))?
        .iter()
        .map(|l| l.exp())
        .collect())
}

/// Node embeddings `X_r(z)` (`V` values per embedding dimension).
pub fn node_embeddings(z: &[f64], dec: &DecoderParams) -> Result<Vec<Vec<f64>>> {
    let mut t = Tape::new();
    let leaves = dec.leaves(&mut t, false);
    let vars = dec.bind(&leaves)?;
    let zv = t.constant(as_column(z));
    let xs = embeddings_vars(&mut t, dec, &vars, zv)?;
    Ok(xs.into_iter().map(|x| column(t.value(x), 0)).collect())
}

pub fn poisson_loglik(counts: &EdgeVector, rates: &[f64]) -> Result<f64> {
    if counts.len() != rates.len() {
        return Err(GateError::structural("counts and rates differ in length"));
    }
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(GateError::structural(format!(
            "rates must be positive and finite, got {r}"
        )));
    }
    Ok(counts
        .values()
        .iter()
        .zip(rates)
        .map(|(&a, &l)| {
            let a = a as f64;
            a * l.ln() - l - log_factorial(a)
        })
        .sum())
}

pub fn kl_std_normal(code: &LatentCode) -> f64 {
    0.5 * code
        .mean
        .iter()
        .zip(&code.logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// `L̃` for one graph with frozen draws (`noise[l]` has length `K`).
pub fn elbo_loss(g: &Graph, params: &GateParams, noise: &[Vec<f64>]) -> Result<f64> {
    let batch = Batch::from_graphs([g])?;
    let noise: Vec<Mat> = noise.iter().map(|e| as_column(e)).collect();
    let mut t = Tape::new();
    let leaves = params.leaves(&mut t, false);
    let (enc, dec) = params.bind(&leaves)?;
    let obj = objective_vars(&mut t, &params.decoder, &enc, &dec, &batch, &noise, None)?;
    t.scalar(obj.total).map_err(Into::into)
}
