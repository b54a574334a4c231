use gate_diffkit::{AdamConfig, AdamState, Mat, Tape};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::config::GateConfig;
use super::forward::{decode_log_rates, objective_vars, Batch, HeadInput};
use super::params::{leaves, GateParams};
use crate::graph::{vectorize, DistanceMatrix, EdgeVector, Graph};
use crate::regate::{HeadVars, RegressionHead};
use crate::rng::{derive_seed, rng_from};
use crate::{GateError, Result};

const INIT_STREAM: u64 = 11;
const SHUFFLE_STREAM: u64 = 12;
const NOISE_STREAM: u64 = 13;

/// Trained parameters and the mean per-example loss of every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: GateParams,
    pub head: Option<RegressionHead>,
    pub trace: Vec<f64>,
}

pub fn train_gate(
    dataset: &[Graph],
    distances: &DistanceMatrix,
    config: &GateConfig,
) -> Result<(GateParams, Vec<f64>)> {
    let out = train(dataset, None, Some(distances), config)?;
    Ok((out.params, out.trace))
}

fn check_dataset(dataset: &[Graph], config: &GateConfig) -> Result<usize> {
    let first = dataset
        .first()
        .ok_or_else(|| GateError::structural("training needs at least one graph"))?;
    let v = first.node_count();
    if dataset.iter().any(|g| g.node_count() != v) {
        return Err(GateError::structural(
            "training graphs differ in node count",
        ));
    }
    if config.batch_size > dataset.len() {
        return Err(GateError::structural(format!(
            "batch size {} exceeds the {} training graphs",
            config.batch_size,
            dataset.len()
        )));
    }
    config.validate(v)?;
    Ok(v)
}

/// Initial parameters for `dataset`: random weights with `γ` set so that the
/// starting rates at `z = 0` equal the empirical mean count of every edge.
pub fn initial_params(
    dataset: &[Graph],
    distances: Option<&DistanceMatrix>,
    config: &GateConfig,
) -> Result<GateParams> {
    let v = check_dataset(dataset, config)?;
    let mut rng = rng_from(derive_seed(config.seed, INIT_STREAM, 0));
    let mut params = GateParams::init(config, v, distances, &mut rng)?;
    let vecs: Vec<EdgeVector> = dataset.iter().map(vectorize).collect();
    calibrate_baseline(&mut params, &vecs)?;
    Ok(params)
}

/// Sets `γ_ℓ = log(mean count_ℓ + 1e-8) − ψ_ℓ(0)`.
pub fn calibrate_baseline(params: &mut GateParams, data: &[EdgeVector]) -> Result<()> {
    let d = params.edge_dim();
    let n = data.len() as f64;
    params.decoder.gamma_mut().fill(0.0);
    let psi0 = decode_log_rates(&params.decoder, &Mat::zeros((params.latent_dim(), 1)))?;
    let gamma = params.decoder.gamma_mut();
    for l in 0..d {
        let mean = data.iter().map(|v| v.values()[l] as f64).sum::<f64>() / n;
        gamma[[l, 0]] = (mean + 1e-8).ln() - psi0[[l, 0]];
    }
    Ok(())
}

pub(crate) fn train(
    dataset: &[Graph],
    traits: Option<&[f64]>,
    distances: Option<&DistanceMatrix>,
    config: &GateConfig,
) -> Result<TrainOutcome> {
    let params = initial_params(dataset, distances, config)?;
    let head = match traits {
        Some(ys) => {
            if ys.len() != dataset.len() {
                return Err(GateError::structural(format!(
                    "{} traits for {} graphs",
                    ys.len(),
                    dataset.len()
                )));
            }
            let mut rng = rng_from(derive_seed(config.seed, INIT_STREAM, 1));
            Some(RegressionHead::init(config.latent_dim, &mut rng))
        }
        None => None,
    };
    train_from(dataset, traits, params, head, config)
}

/// Runs the minibatch loop from the given starting point.
pub fn train_from(
    dataset: &[Graph],
    traits: Option<&[f64]>,
    mut params: GateParams,
    mut head: Option<RegressionHead>,
    config: &GateConfig,
) -> Result<TrainOutcome> {
    check_dataset(dataset, config)?;
    let n = dataset.len();
    let all = Batch::from_graphs(dataset)?;
    let y_all = traits.map(|ys| Array2::from_shape_vec((1, n), ys.to_vec()).expect("row shape"));

    let mut tensors: Vec<&Mat> = params.tensors();
    if let Some(h) = &head {
        tensors.extend(h.tensors());
    }
    let adam_cfg = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, tensors);
    let mut shuffle_rng = rng_from(derive_seed(config.seed, SHUFFLE_STREAM, 0));
    let mut noise_rng = rng_from(derive_seed(config.seed, NOISE_STREAM, 0));
    let k = params.latent_dim();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch = all.select(idx);
            let m = idx.len();
            let noise: Vec<Mat> = (0..config.mc_samples)
                .map(|_| Array2::from_shape_fn((k, m), |_| StandardNormal.sample(&mut noise_rng)))
                .collect();
            let diverged = |e: gate_diffkit::DiffError| GateError::training(epoch, e);

            let mut t = Tape::new();
            let vars = params.leaves(&mut t, true);
            let (enc, dec) = params.bind(&vars)?;
            let head_vars = head
                .as_ref()
                .map(|h| HeadVars::bind(&leaves(&mut t, h.tensors(), true)))
                .transpose()?;
            let head_input = match (head_vars, &y_all) {
                (Some(hv), Some(y)) => Some(HeadInput {
                    vars: hv,
                    traits: t.constant(y.select(ndarray::Axis(1), idx)),
                }),
                _ => None,
            };
            let obj = objective_vars(
                &mut t,
                &params.decoder,
                &enc,
                &dec,
                &batch,
                &noise,
                head_input,
            )
            .map_err(|e| match e {
                GateError::Numerical(_) => GateError::training(epoch, e),
                other => other,
            })?;
            epoch_total += t.scalar(obj.total).map_err(diverged)?;
            let scaled = t
                .mul_const(obj.total, n as f64 / m as f64)
                .map_err(diverged)?;
            let mut grads = t.backward(scaled).map_err(diverged)?;
            let mut all_vars = vars;
            if let Some(hv) = head_vars {
                all_vars.extend(hv.all());
            }
            let grads: Vec<Mat> = all_vars.iter().map(|&v| grads.take(v)).collect();
            let mut targets = params.tensors_mut();
            if let Some(h) = head.as_mut() {
                targets.extend(h.tensors_mut());
            }
            adam.step(&mut targets, &grads).map_err(diverged)?;
        }
        let mean = epoch_total / n as f64;
        if !mean.is_finite() {
            return Err(GateError::training(
                epoch,
                GateError::Numerical("non-finite epoch loss".into()),
            ));
        }
        log::debug!("epoch {epoch}: mean loss {mean:.4}");
        trace.push(mean);
    }
    Ok(TrainOutcome {
        params,
        head,
        trace,
    })
}
