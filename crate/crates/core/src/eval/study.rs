use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cv::{kfold_split, FoldAssignment};
use super::metrics::{mse, pearson};
use super::pca::pca_linear_baseline;
use crate::graph::{vectorize, DistanceMatrix, Graph};
use crate::model::{DecoderVariant, GateConfig};
use crate::regate::{predict_traits, train_regate};
use crate::synth::{simulate_corpus, template_distance, CorpusSpec, TraitCase};
use crate::{GateError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "reGATE")]
    Regate,
    #[serde(rename = "S-reGATE")]
    DenseRegate,
    #[serde(rename = "LR-PCA")]
    LrPca,
    #[serde(rename = "mean")]
    Mean,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Regate,
        Method::DenseRegate,
        Method::LrPca,
        Method::Mean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Regate => "reGATE",
            Method::DenseRegate => "S-reGATE",
            Method::LrPca => "LR-PCA",
            Method::Mean => "mean",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub node_count: usize,
    pub per_family: usize,
    pub trait_case: u8,
    pub corpus_seed: u64,
    pub template_threshold: f64,
    pub folds: usize,
    pub cv_seed: u64,
    pub pca_components: usize,
    pub methods: Vec<Method>,
    pub model: GateConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            node_count: 68,
            per_family: 100,
            trait_case: 1,
            corpus_seed: 0,
            template_threshold: 0.5,
            folds: 5,
            cv_seed: 0,
            pca_components: 50,
            methods: Method::ALL.to_vec(),
            model: GateConfig::default(),
        }
    }
}

/// One row of the report; `fold == None` marks the pooled row of a method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub method: Method,
    pub trait_case: u8,
    pub fold: Option<usize>,
    pub mse: f64,
    pub pearson: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<FoldResult>,
    /// Out-of-fold prediction for every sample, per method.
    pub predictions: BTreeMap<Method, Vec<f64>>,
    pub actual: Vec<f64>,
}

impl EvalReport {
    pub fn pooled(&self, method: Method) -> Option<&FoldResult> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.fold.is_none())
    }
}

/// Held-out data shared by every method of one study.
pub struct CvData<'a> {
    pub graphs: &'a [Graph],
    pub traits: &'a [f64],
    pub distances: &'a DistanceMatrix,
    pub folds: &'a FoldAssignment,
    pub trait_case: u8,
}

fn pick<T: Clone>(xs: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| xs[i].clone()).collect()
}

fn fold_predictions(
    data: &CvData<'_>,
    method: Method,
    model: &GateConfig,
    pca_components: usize,
    fold: usize,
) -> Result<Vec<f64>> {
    let train = data.folds.train_indices(fold);
    let test = data.folds.test_indices(fold);
    let train_y = pick(data.traits, &train);
    match method {
        Method::Mean => {
            let m = train_y.iter().sum::<f64>() / train_y.len() as f64;
            Ok(vec![m; test.len()])
        }
        Method::LrPca => {
            let row = |i: usize| -> Vec<f64> {
                vectorize(&data.graphs[i])
                    .values()
                    .iter()
                    .map(|&a| a as f64)
                    .collect()
            };
            let train_rows: Vec<(Vec<f64>, f64)> =
                train.iter().map(|&i| (row(i), data.traits[i])).collect();
            let test_rows: Vec<Vec<f64>> = test.iter().map(|&i| row(i)).collect();
            pca_linear_baseline(&train_rows, &test_rows, pca_components)
        }
        Method::Regate | Method::DenseRegate => {
            let cfg = GateConfig {
                decoder_variant: if method == Method::Regate {
                    DecoderVariant::LatentSpace
                } else {
                    DecoderVariant::Dense
                },
                ..model.clone()
            };
            let train_g = pick(data.graphs, &train);
            let (params, head, trace) = train_regate(&train_g, &train_y, data.distances, &cfg)?;
            log::info!(
                "{method} fold {fold}: final training loss {:.3}",
                trace.last().copied().unwrap_or(f64::NAN)
            );
            predict_traits(&pick(data.graphs, &test), &params, &head)
        }
    }
}

/// Out-of-fold predictions and per-fold plus pooled rows for one method.
pub fn cross_validate(
    data: &CvData<'_>,
    method: Method,
    model: &GateConfig,
    pca_components: usize,
) -> Result<(Vec<FoldResult>, Vec<f64>)> {
    let n = data.graphs.len();
    if data.traits.len() != n || data.folds.n() != n {
        return Err(GateError::structural(
            "graphs, traits and folds differ in length",
        ));
    }
    let mut predictions = vec![f64::NAN; n];
    let mut rows = Vec::with_capacity(data.folds.k + 1);
    let mut total_seconds = 0.0;
    for fold in 0..data.folds.k {
        let start = Instant::now();
        let pred = fold_predictions(data, method, model, pca_components, fold).map_err(|e| {
            GateError::Fold {
                context: format!("{method} fold {fold}"),
                source: Box::new(e),
            }
        })?;
        let seconds = start.elapsed().as_secs_f64();
        total_seconds += seconds;
        let test = data.folds.test_indices(fold);
        let actual = pick(data.traits, &test);
        for (&i, &p) in test.iter().zip(&pred) {
            predictions[i] = p;
        }
        rows.push(FoldResult {
            method,
            trait_case: data.trait_case,
            fold: Some(fold),
            mse: mse(&pred, &actual)?,
            pearson: pearson(&pred, &actual).ok(),
            seconds,
        });
    }
    rows.push(FoldResult {
        method,
        trait_case: data.trait_case,
        fold: None,
        mse: mse(&predictions, data.traits)?,
        pearson: pearson(&predictions, data.traits).ok(),
        seconds: total_seconds,
    });
    Ok((rows, predictions))
}

/// Simulated corpus, template distances, then cross-validation of every
/// configured method.
pub fn run_simulation_study(config: &StudyConfig) -> Result<EvalReport> {
    let case = TraitCase::from_number(config.trait_case)?;
    let spec = CorpusSpec::standard(
        config.node_count,
        config.per_family,
        case,
        config.corpus_seed,
    );
    let corpus = simulate_corpus(&spec)?;
    let graphs = corpus.graphs();
    let traits = corpus.traits();
    let distances = template_distance(&graphs, config.template_threshold)?;
    let folds = kfold_split(graphs.len(), config.folds, config.cv_seed)?;
    let data = CvData {
        graphs: &graphs,
        traits: &traits,
        distances: &distances,
        folds: &folds,
        trait_case: config.trait_case,
    };
    let mut rows = Vec::new();
    let mut predictions = BTreeMap::new();
    for &method in &config.methods {
        let (r, p) = cross_validate(&data, method, &config.model, config.pca_components)?;
        rows.extend(r);
        predictions.insert(method, p);
    }
    Ok(EvalReport {
        rows,
        predictions,
        actual: traits,
    })
}
