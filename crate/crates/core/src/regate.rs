//! Supervised extension: a Gaussian regression of a scalar trait on the
//! latent code, trained jointly with the auto-encoder, plus the closed-form
//! law of `z` given the trait used for conditional generation.

use gate_diffkit::{Mat, Tape, Var};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{DistanceMatrix, Graph};
use crate::model::{
    encode_all, objective_vars, sample_from_codes, standard_codes, Batch, DecoderParams,
    GateConfig, GateParams, HeadInput,
};
use crate::{GateError, Result};

/// `y ~ N(βᵀz + b, σ²)` with `σ² = exp(log_noise_var)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionHead {
    /// `1×K`.
    pub beta: Mat,
    pub intercept: Mat,
    pub log_noise_var: Mat,
}

impl RegressionHead {
    pub fn init(latent_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let s = 1.0 / (latent_dim as f64).sqrt();
        Self {
            beta: Array2::from_shape_fn((1, latent_dim), |_| rng.gen_range(-s..s)),
            intercept: Mat::zeros((1, 1)),
            log_noise_var: Mat::zeros((1, 1)),
        }
    }

    pub fn from_values(beta: &[f64], intercept: f64, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(GateError::structural(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(Self {
            beta: Array2::from_shape_vec((1, beta.len()), beta.to_vec()).expect("row shape"),
            intercept: Array2::from_elem((1, 1), intercept),
            log_noise_var: Array2::from_elem((1, 1), noise_var.ln()),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.beta.ncols()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.beta.iter().copied().collect()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept[[0, 0]]
    }

    pub fn noise_var(&self) -> f64 {
        self.log_noise_var[[0, 0]].exp()
    }

    pub fn predict(&self, z: &[f64]) -> f64 {
        self.beta.iter().zip(z).map(|(b, z)| b * z).sum::<f64>() + self.intercept()
    }

    pub fn tensors(&self) -> Vec<&Mat> {
        vec![&self.beta, &self.intercept, &self.log_noise_var]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        vec![&mut self.beta, &mut self.intercept, &mut self.log_noise_var]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub beta: Var,
    pub intercept: Var,
    pub log_noise_var: Var,
}

impl HeadVars {
    pub fn bind(vars: &[Var]) -> Result<Self> {
        match vars {
            &[beta, intercept, log_noise_var] => Ok(Self {
                beta,
                intercept,
                log_noise_var,
            }),
            _ => Err(GateError::structural(format!(
                "regression head expects 3 tensors, got {}",
                vars.len()
            ))),
        }
    }

    pub fn all(&self) -> [Var; 3] {
        [self.beta, self.intercept, self.log_noise_var]
    }
}

/// `Σ_i [−½ log(2πσ²) − (y_i − βᵀz_i − b)² / (2σ²)]` for `z` (`K×m`) and `y` (`1×m`).
pub fn gaussian_loglik_vars(t: &mut Tape, head: &HeadVars, z: Var, y: Var) -> Result<Var> {
    let m = t.value(z).ncols() as f64;
    let pred = t.matmul(head.beta, z)?;
    let pred = t.add_col_bias(pred, head.intercept)?;
    let resid = t.sub(y, pred)?;
    let sq = t.hadamard(resid, resid)?;
    let sq = t.sum(sq)?;
    let neg = t.mul_const(head.log_noise_var, -1.0)?;
    let precision = t.exp(neg)?;
    let quad = t.scale(precision, sq)?;
    let quad = t.mul_const(quad, -0.5)?;
    let norm = t.mul_const(head.log_noise_var, -0.5 * m)?;
    let ll = t.add(quad, norm)?;
    Ok(t.add_const(ll, -0.5 * m * (2.0 * std::f64::consts::PI).ln())?)
}

/// Supervised `L̃` for one graph and trait with frozen draws.
pub fn supervised_elbo_loss(
    g: &Graph,
    y: f64,
    params: &GateParams,
    head: &RegressionHead,
    noise: &[Vec<f64>],
) -> Result<f64> {
    let batch = Batch::from_graphs([g])?;
    let noise: Vec<Mat> = noise
        .iter()
        .map(|e| Array2::from_shape_vec((e.len(), 1), e.clone()).expect("column shape"))
        .collect();
    let mut t = Tape::new();
    let leaves = params.leaves(&mut t, false);
    let (enc, dec) = params.bind(&leaves)?;
    let hv: Vec<Var> = head
        .tensors()
        .into_iter()
        .map(|m| t.constant(m.clone()))
        .collect();
    let traits = t.constant_scalar(y);
    let input = HeadInput {
        vars: HeadVars::bind(&hv)?,
        traits,
    };
    let obj = objective_vars(
        &mut t,
        &params.decoder,
        &enc,
        &dec,
        &batch,
        &noise,
        Some(input),
    )?;
    t.scalar(obj.total).map_err(Into::into)
}

pub fn train_regate(
    dataset: &[Graph],
    traits: &[f64],
    distances: &DistanceMatrix,
    config: &GateConfig,
) -> Result<(GateParams, RegressionHead, Vec<f64>)> {
    let out = crate::model::train(dataset, Some(traits), Some(distances), config)?;
    let head = out.head.expect("supervised training returns a head");
    Ok((out.params, head, out.trace))
}

/// `μ_φ(A)ᵀβ + b` from the posterior mean code.
pub fn predict_trait(g: &Graph, params: &GateParams, head: &RegressionHead) -> Result<f64> {
    Ok(predict_traits(std::slice::from_ref(g), params, head)?[0])
}

pub fn predict_traits(
    graphs: &[Graph],
    params: &GateParams,
    head: &RegressionHead,
) -> Result<Vec<f64>> {
    Ok(encode_all(graphs, params)?
        .iter()
        .map(|c| head.predict(&c.mean))
        .collect())
}

/// Gaussian law of `z` given a trait value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCodeLaw {
    pub mean: Vec<f64>,
    pub covariance: Array2<f64>,
    sqrt: Array2<f64>,
}

impl ConditionalCodeLaw {
    /// Symmetric square root of the covariance.
    pub fn sqrt_covariance(&self) -> &Array2<f64> {
        &self.sqrt
    }
}

/// `Σ = I − ββᵀ/(σ² + βᵀβ)`, `μ = Σβ(y − b)/σ²`.
pub fn conditional_code_posterior(y: f64, head: &RegressionHead) -> ConditionalCodeLaw {
    let beta = head.beta();
    let k = beta.len();
    let s2 = head.noise_var();
    let bb: f64 = beta.iter().map(|b| b * b).sum();
    let covariance = Array2::from_shape_fn((k, k), |(i, j)| {
        f64::from(u8::from(i == j)) - beta[i] * beta[j] / (s2 + bb)
    });
    // Σβ = β σ²/(σ² + βᵀβ)
    let mean = beta
        .iter()
        .map(|b| b * (y - head.intercept()) / (s2 + bb))
        .collect();
    let shrink = (s2 / (s2 + bb)).sqrt();
    let sqrt = Array2::from_shape_fn((k, k), |(i, j)| {
        let eye = f64::from(u8::from(i == j));
        if bb > 0.0 {
            eye + (shrink - 1.0) * beta[i] * beta[j] / bb
        } else {
            eye
        }
    });
    ConditionalCodeLaw {
        mean,
        covariance,
        sqrt,
    }
}

/// `count` codes from the conditional law; the standard-normal stream is
/// shared with prior sampling, so different `y` reuse the same draws.
pub fn conditional_codes(
    law: &ConditionalCodeLaw,
    count: usize,
    seed: u64,
    index_offset: u64,
) -> Mat {
    let k = law.mean.len();
    let eps = standard_codes(k, count, seed, index_offset);
    let mut z = law.sqrt.dot(&eps);
    for mut col in z.columns_mut() {
        col.iter_mut().zip(&law.mean).for_each(|(v, m)| *v += m);
    }
    z
}

const SAMPLE_CHUNK: usize = 250;

pub fn conditional_generate(
    y: f64,
    count: usize,
    decoder: &DecoderParams,
    head: &RegressionHead,
    seed: u64,
) -> Result<Vec<Graph>> {
    if head.latent_dim() != decoder.latent_dim() {
        return Err(GateError::structural(
            "head and decoder latent sizes differ",
        ));
    }
    let law = conditional_code_posterior(y, head);
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let len = SAMPLE_CHUNK.min(count - start);
        let z = conditional_codes(&law, len, seed, start as u64);
        out.extend(sample_from_codes(decoder, &z, seed, start as u64)?);
        start += len;
    }
    Ok(out)
}
