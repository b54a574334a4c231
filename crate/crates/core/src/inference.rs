//! Posterior predictive checks and conditional-generation summaries of a
//! trained model.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::graph::{dichotomize, edge_count, lower_pairs, summaries, Graph, Measure};
use crate::model::{sample_prior_graphs, DecoderParams};
use crate::regate::{conditional_generate, RegressionHead};
use crate::rng::derive_seed;
use crate::{GateError, Result};

const BAND_STREAM: u64 = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Observed,
    Generated,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Observed => "observed",
            Source::Generated => "generated",
        })
    }
}

/// Values of one measure over a set of graphs. Graphs where the measure is
/// undefined are counted in `dropped`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDistribution {
    pub measure: Measure,
    pub source: Source,
    pub samples: Vec<f64>,
    pub dropped: usize,
}

impl SummaryDistribution {
    pub fn from_graphs(graphs: &[Graph], measure: Measure, source: Source) -> Self {
        let values: Vec<Option<f64>> = graphs.iter().map(|g| summaries(g).get(measure)).collect();
        Self::collect(measure, source, values)
    }

    fn collect(measure: Measure, source: Source, values: Vec<Option<f64>>) -> Self {
        let total = values.len();
        let samples: Vec<f64> = values.into_iter().flatten().collect();
        Self {
            measure,
            source,
            dropped: total - samples.len(),
            samples,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.samples.iter().sum::<f64>() / self.samples.len() as f64)
    }

    pub fn quantile(&self, p: f64) -> Option<f64> {
        quantile(&self.samples, p)
    }

    pub fn median(&self) -> Option<f64> {
        self.quantile(0.5)
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Observed and generated distributions of one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveCheck {
    pub observed: SummaryDistribution,
    pub generated: SummaryDistribution,
}

impl PredictiveCheck {
    /// Whether the observed median lies in the generated `[lo, hi]` quantile
    /// interval. `None` when either side has no defined values.
    pub fn covers_observed_median(&self, lo: f64, hi: f64) -> Option<bool> {
        let m = self.observed.median()?;
        Some(self.generated.quantile(lo)? <= m && m <= self.generated.quantile(hi)?)
    }
}

/// Summaries of `n_draws` prior-predictive graphs against the observed set,
/// one entry per measure in [`Measure::ALL`] order.
pub fn posterior_predictive_check(
    decoder: &DecoderParams,
    n_draws: usize,
    observed: &[Graph],
    seed: u64,
) -> Result<Vec<PredictiveCheck>> {
    if n_draws == 0 {
        return Err(GateError::structural(
            "posterior predictive check needs at least one draw",
        ));
    }
    let generated = sample_prior_graphs(decoder, n_draws, seed)?;
    Ok(compare_summaries(observed, &generated))
}

/// Per-measure distributions of two graph sets.
pub fn compare_summaries(observed: &[Graph], generated: &[Graph]) -> Vec<PredictiveCheck> {
    let obs: Vec<_> = observed.iter().map(summaries).collect();
    let gen: Vec<_> = generated.iter().map(summaries).collect();
    Measure::ALL
        .iter()
        .map(|&m| PredictiveCheck {
            observed: SummaryDistribution::collect(
                m,
                Source::Observed,
                obs.iter().map(|s| s.get(m)).collect(),
            ),
            generated: SummaryDistribution::collect(
                m,
                Source::Generated,
                gen.iter().map(|s| s.get(m)).collect(),
            ),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub n_per_y: usize,
    pub quantiles: (f64, f64),
    pub measures: Vec<Measure>,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self {
            n_per_y: 500,
            quantiles: (0.025, 0.975),
            measures: vec![Measure::Density, Measure::AvgPathLength],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `stats` is `None` when the measure was undefined for every draw at `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub y: f64,
    pub n_effective: usize,
    pub stats: Option<BandStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalBand {
    pub measure: Measure,
    pub draws_per_y: usize,
    pub points: Vec<BandPoint>,
}

impl ConditionalBand {
    pub fn flagged(&self) -> impl Iterator<Item = f64> + '_ {
        self.points
            .iter()
            .filter(|p| p.stats.is_none())
            .map(|p| p.y)
    }
}

/// Mean and quantile band of each measure over conditional draws at every
/// grid value. Grid points use independent seed streams.
pub fn conditional_band(
    decoder: &DecoderParams,
    head: &RegressionHead,
    y_grid: &[f64],
    spec: &BandSpec,
    seed: u64,
) -> Result<Vec<ConditionalBand>> {
    let (lo, hi) = spec.quantiles;
    if spec.n_per_y == 0 || !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(GateError::structural(format!(
            "band needs n_per_y ≥ 1 and ordered quantile levels in [0, 1], got {} and ({lo}, {hi})",
            spec.n_per_y
        )));
    }
    let mut bands: Vec<ConditionalBand> = spec
        .measures
        .iter()
        .map(|&measure| ConditionalBand {
            measure,
            draws_per_y: spec.n_per_y,
            points: Vec::with_capacity(y_grid.len()),
        })
        .collect();
    for (i, &y) in y_grid.iter().enumerate() {
        let s = derive_seed(seed, BAND_STREAM, i as u64);
        let graphs = conditional_generate(y, spec.n_per_y, decoder, head, s)?;
        let stats: Vec<_> = graphs.iter().map(summaries).collect();
        for band in &mut bands {
            let d = SummaryDistribution::collect(
                band.measure,
                Source::Generated,
                stats.iter().map(|s| s.get(band.measure)).collect(),
            );
            let point_stats = match (d.mean(), d.quantile(lo), d.quantile(hi)) {
                (Some(mean), Some(lower), Some(upper)) => Some(BandStats {
                    // keeps lower ≤ mean ≤ upper when the mean sits outside a narrow band
                    mean,
                    lower: lower.min(mean),
                    upper: upper.max(mean),
                }),
                _ => None,
            };
            band.points.push(BandPoint {
                y,
                n_effective: d.samples.len(),
                stats: point_stats,
            });
        }
    }
    Ok(bands)
}

/// Entrywise mean of `n` conditional draws at `y`, optionally after
/// dichotomizing each draw at zero.
pub fn conditional_mean_network(
    decoder: &DecoderParams,
    head: &RegressionHead,
    y: f64,
    n: usize,
    seed: u64,
    binarize: bool,
) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(GateError::structural(
            "mean network needs at least one draw",
        ));
    }
    let graphs = conditional_generate(y, n, decoder, head, seed)?;
    Ok(mean_network(&graphs, binarize))
}

fn mean_network(graphs: &[Graph], binarize: bool) -> Array2<f64> {
    let v = graphs[0].node_count();
    let mut acc = Array2::<f64>::zeros((v, v));
    for g in graphs {
        let g = if binarize {
            dichotomize(g, 0.0)
        } else {
            g.clone()
        };
        acc += &g.weights().mapv(|w| w as f64);
    }
    acc / graphs.len() as f64
}

/// One cell of a mean-difference network, with `u > v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDelta {
    pub u: usize,
    pub v: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeanDifference {
    pub positive: Vec<EdgeDelta>,
    pub negative: Vec<EdgeDelta>,
}

/// The `k` largest entries of `mean(y_high) − mean(y_low)` by absolute value,
/// from binarized draws that share their random streams between the two
/// trait values. Exact zeros are left out.
pub fn mean_difference_topk(
    decoder: &DecoderParams,
    head: &RegressionHead,
    y_low: f64,
    y_high: f64,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<MeanDifference> {
    let v = decoder.node_count();
    let cells = edge_count(v);
    if k > cells {
        return Err(GateError::structural(format!(
            "top-{k} requested from {cells} node pairs"
        )));
    }
    let low = conditional_mean_network(decoder, head, y_low, n, seed, true)?;
    let high = conditional_mean_network(decoder, head, y_high, n, seed, true)?;
    Ok(top_deltas(&(high - low), k))
}

fn top_deltas(diff: &Array2<f64>, k: usize) -> MeanDifference {
    let mut cells: Vec<EdgeDelta> = lower_pairs(diff.nrows())
        .map(|(u, v)| EdgeDelta {
            u,
            v,
            delta: diff[[u, v]],
        })
        .collect();
    cells.sort_by(|a, b| {
        b.delta
            .abs()
            .total_cmp(&a.delta.abs())
            .then((a.u, a.v).cmp(&(b.u, b.v)))
    });
    let mut out = MeanDifference::default();
    for d in cells.into_iter().take(k).filter(|d| d.delta != 0.0) {
        if d.delta > 0.0 {
            out.positive.push(d);
        } else {
            out.negative.push(d);
        }
    }
    out
}
