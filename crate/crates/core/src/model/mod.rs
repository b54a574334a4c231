//! The unsupervised model: encoder `q(z | A)`, k-NN-masked GCN decoder
//! `p(A | z)` with Poisson edge counts, the Monte-Carlo ELBO and the Adam
//! training loop.

mod config;
mod forward;
mod params;
mod sample;
mod train;

pub use config::{Activation, DecoderVariant, GateConfig, KnnSpec};
pub use forward::{
    decode_log_rates, decode_rates, decode_vars, elbo_loss, embeddings_vars, encode, encode_all,
    encode_batch, encode_vars, kl_std_normal, kl_vars, node_embeddings, objective_vars,
    poisson_loglik, poisson_loglik_vars, reparameterize, reparameterize_vars, Batch, HeadInput,
    LatentCode, Objective, LOGVAR_MAX, LOGVAR_MIN, LOG_RATE_MAX,
};
pub use params::{
    DecoderParams, DecoderVars, DenseDecoder, EncoderBranch, EncoderParams, EncoderVars,
    GateParams, GcnLayer, LatentSpaceDecoder,
};
pub(crate) use sample::standard_codes;
pub use sample::{
    poisson_inverse, sample_from_codes, sample_prior_graph, sample_prior_graphs,
    POISSON_NORMAL_CUTOFF,
};
pub(crate) use train::train;
pub use train::{calibrate_baseline, initial_params, train_from, train_gate, TrainOutcome};
