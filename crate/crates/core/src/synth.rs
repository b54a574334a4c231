//! Simulated corpora: four random-graph families, quadratic-form traits and a
//! template distance matrix built from edge frequencies.
//!
//! The generators reproduce the sampling loops of the usual Python reference
//! implementations (G(n,p), block model, Watts–Strogatz, Barabási–Albert)
//! driven by a seeded ChaCha stream.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{lower_pairs, DistanceMatrix, Graph};
use crate::rng::{derive_seed, rng_from};
use crate::{GateError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sparse,
    Community,
    SmallWorld,
    ScaleFree,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Sparse,
        Family::Community,
        Family::SmallWorld,
        Family::ScaleFree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sparse => "sparse",
            Family::Community => "community",
            Family::SmallWorld => "small_world",
            Family::ScaleFree => "scale_free",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| GateError::Format(format!("unknown graph family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Sparse {
        p: f64,
    },
    Community {
        block_sizes: Vec<usize>,
        p_within: f64,
        p_between: f64,
    },
    SmallWorld {
        k_ring: usize,
        rewire: f64,
    },
    ScaleFree {
        m_attach: usize,
    },
}

impl FamilySpec {
    /// Default parameters for `family` on `node_count` nodes.
    pub fn default_for(family: Family, node_count: usize) -> Self {
        match family {
            Family::Sparse => FamilySpec::Sparse { p: 0.05 },
            Family::Community => FamilySpec::Community {
                block_sizes: equal_blocks(node_count, 4),
                p_within: 0.30,
                p_between: 0.03,
            },
            Family::SmallWorld => FamilySpec::SmallWorld {
                k_ring: 10,
                rewire: 0.1,
            },
            Family::ScaleFree => FamilySpec::ScaleFree { m_attach: 3 },
        }
    }

    pub fn family(&self) -> Family {
        match self {
            FamilySpec::Sparse { .. } => Family::Sparse,
            FamilySpec::Community { .. } => Family::Community,
            FamilySpec::SmallWorld { .. } => Family::SmallWorld,
            FamilySpec::ScaleFree { .. } => Family::ScaleFree,
        }
    }

    pub fn validate(&self, node_count: usize) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(GateError::structural(format!(
                    "{name} must lie in [0, 1], got {p}"
                )))
            }
        };
        if node_count == 0 {
            return Err(GateError::structural("node count must be positive"));
        }
        match self {
            FamilySpec::Sparse { p } => prob("p", *p),
            FamilySpec::Community {
                block_sizes,
                p_within,
                p_between,
            } => {
                prob("p_within", *p_within)?;
                prob("p_between", *p_between)?;
                let total: usize = block_sizes.iter().sum();
                if total != node_count || block_sizes.contains(&0) {
                    return Err(GateError::structural(format!(
                        "block sizes {block_sizes:?} must be positive and sum to {node_count}"
                    )));
                }
                Ok(())
            }
            FamilySpec::SmallWorld { k_ring, rewire } => {
                prob("rewire", *rewire)?;
                if k_ring % 2 != 0 || *k_ring >= node_count {
                    return Err(GateError::structural(format!(
                        "k_ring must be even and below {node_count}, got {k_ring}"
                    )));
                }
                Ok(())
            }
            FamilySpec::ScaleFree { m_attach } => {
                if *m_attach == 0 || *m_attach >= node_count {
                    return Err(GateError::structural(format!(
                        "m_attach must lie in 1..{node_count}, got {m_attach}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Edges of every scale-free draw: `m_attach · (V − m_attach)`.
    pub fn scale_free_edge_count(m_attach: usize, node_count: usize) -> usize {
        m_attach * (node_count - m_attach)
    }
}

/// Sizes of `blocks` contiguous blocks differing by at most one.
pub fn equal_blocks(node_count: usize, blocks: usize) -> Vec<usize> {
    (0..blocks)
        .map(|b| node_count / blocks + usize::from(b < node_count % blocks))
        .collect()
}

pub fn generate_graph(spec: &FamilySpec, node_count: usize, seed: u64) -> Result<Graph> {
    spec.validate(node_count)?;
    let mut rng = rng_from(seed);
    let n = node_count;
    let mut g = Graph::empty(n);
    match spec {
        FamilySpec::Sparse { p } => {
            for (u, v) in lower_pairs(n) {
                if rng.gen::<f64>() < *p {
                    g.set(u, v, 1);
                }
            }
        }
        FamilySpec::Community {
            block_sizes,
            p_within,
            p_between,
        } => {
            let block: Vec<usize> = block_sizes
                .iter()
                .enumerate()
                .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
                .collect();
            for (u, v) in lower_pairs(n) {
                let p = if block[u] == block[v] {
                    p_within
                } else {
                    p_between
                };
                if rng.gen::<f64>() < *p {
                    g.set(u, v, 1);
                }
            }
        }
        FamilySpec::SmallWorld { k_ring, rewire } => {
            let half = k_ring / 2;
            for j in 1..=half {
                for u in 0..n {
                    g.set(u, (u + j) % n, 1);
                }
            }
            let mut degree: Vec<usize> = (0..n).map(|u| g.neighbors(u).len()).collect();
            for j in 1..=half {
                for u in 0..n {
                    let v = (u + j) % n;
                    if rng.gen::<f64>() >= *rewire {
                        continue;
                    }
                    let mut w = rng.gen_range(0..n);
                    let mut gave_up = false;
                    while w == u || g.weight(u, w) > 0 {
                        w = rng.gen_range(0..n);
                        if degree[u] >= n - 1 {
                            gave_up = true;
                            break;
                        }
                    }
                    if !gave_up && g.weight(u, v) > 0 {
                        g.set(u, v, 0);
                        g.set(u, w, 1);
                        degree[v] -= 1;
                        degree[w] += 1;
                    }
                }
            }
        }
        FamilySpec::ScaleFree { m_attach } => {
            let m = *m_attach;
            // star on nodes 0..=m centred at 0
            let mut repeated: Vec<usize> = Vec::with_capacity(2 * m * n);
            for leaf in 1..=m {
                g.set(0, leaf, 1);
            }
            repeated.extend(std::iter::repeat_n(0, m));
            repeated.extend(1..=m);
            for source in m + 1..n {
                let mut targets: Vec<usize> = Vec::with_capacity(m);
                while targets.len() < m {
                    let x = *repeated.choose(&mut rng).expect("nonempty pool");
                    if !targets.contains(&x) {
                        targets.push(x);
                    }
                }
                targets.sort_unstable();
                for &t in &targets {
                    g.set(source, t, 1);
                }
                repeated.extend_from_slice(&targets);
                repeated.extend(std::iter::repeat_n(source, m));
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraitCase {
    /// `αᵀAα + ε`
    Linear,
    /// `(αᵀAα)² + (αᵀAα)³ + ε`
    Cubic,
}

impl TraitCase {
    pub fn number(self) -> u8 {
        match self {
            TraitCase::Linear => 1,
            TraitCase::Cubic => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(TraitCase::Linear),
            2 => Ok(TraitCase::Cubic),
            _ => Err(GateError::structural(format!(
                "trait case must be 1 or 2, got {n}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitSpec {
    pub alpha: Vec<f64>,
    pub noise_sd: f64,
    pub case: TraitCase,
}

impl TraitSpec {
    /// `α` with `ones` leading ones, unit noise.
    pub fn leading_ones(node_count: usize, ones: usize, case: TraitCase) -> Self {
        Self {
            alpha: (0..node_count)
                .map(|u| f64::from(u8::from(u < ones)))
                .collect(),
            noise_sd: 1.0,
            case,
        }
    }
}

pub fn quadratic_form(g: &Graph, alpha: &[f64]) -> Result<f64> {
    if alpha.len() != g.node_count() {
        return Err(GateError::structural(format!(
            "alpha has length {} but the graph has {} nodes",
            alpha.len(),
            g.node_count()
        )));
    }
    Ok(lower_pairs(g.node_count())
        .map(|(u, v)| 2.0 * alpha[u] * alpha[v] * g.weight(u, v) as f64)
        .sum())
}

pub fn simulate_trait(g: &Graph, spec: &TraitSpec, seed: u64) -> Result<f64> {
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(GateError::structural(format!(
            "noise_sd must be finite and nonnegative, got {}",
            spec.noise_sd
        )));
    }
    let q = quadratic_form(g, &spec.alpha)?;
    let eps: f64 = StandardNormal.sample(&mut rng_from(seed));
    let signal = match spec.case {
        TraitCase::Linear => q,
        TraitCase::Cubic => q.powi(2) + q.powi(3),
    };
    Ok(signal + spec.noise_sd * eps)
}

/// Z-score parameters; `sd` is the `n − 1` sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.sd
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }
}

pub fn standardize_traits(ys: &[f64]) -> Result<(Vec<f64>, Standardization)> {
    if ys.len() < 2 {
        return Err(GateError::structural(
            "standardization needs at least two traits",
        ));
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(GateError::structural("traits have zero variance"));
    }
    let t = Standardization { mean, sd };
    Ok((ys.iter().map(|&y| t.apply(y)).collect(), t))
}

/// Hop distances on the graph of edges present in at least `threshold` of
/// the inputs.
pub fn template_distance(graphs: &[Graph], threshold: f64) -> Result<DistanceMatrix> {
    let first = graphs
        .first()
        .ok_or_else(|| GateError::structural("template needs at least one graph"))?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(GateError::structural(format!(
            "edge frequency threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let n = first.node_count();
    if graphs.iter().any(|g| g.node_count() != n) {
        return Err(GateError::structural(
            "template graphs differ in node count",
        ));
    }
    let mut freq = Array2::<usize>::zeros((n, n));
    for g in graphs {
        for (u, v) in lower_pairs(n) {
            if g.weight(u, v) > 0 {
                freq[[u, v]] += 1;
            }
        }
    }
    let mut template = Graph::empty(n);
    for (u, v) in lower_pairs(n) {
        if freq[[u, v]] as f64 >= threshold * graphs.len() as f64 {
            template.set(u, v, 1);
        }
    }
    Ok(DistanceMatrix::from_hops(&template))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub node_count: usize,
    pub per_family: usize,
    pub families: Vec<FamilySpec>,
    pub trait_spec: TraitSpec,
    pub seed: u64,
}

impl CorpusSpec {
    /// All four families at their defaults, `α` with `V/4` leading ones.
    pub fn standard(node_count: usize, per_family: usize, case: TraitCase, seed: u64) -> Self {
        Self {
            node_count,
            per_family,
            families: Family::ALL
                .iter()
                .map(|&f| FamilySpec::default_for(f, node_count))
                .collect(),
            trait_spec: TraitSpec::leading_ones(node_count, node_count / 4, case),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub family: Family,
    pub seed: u64,
    pub graph: Graph,
    pub trait_raw: f64,
    pub trait_standardized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub node_count: usize,
    pub samples: Vec<Sample>,
    pub standardization: Standardization,
}

impl Corpus {
    pub fn graphs(&self) -> Vec<Graph> {
        self.samples.iter().map(|s| s.graph.clone()).collect()
    }

    pub fn traits(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.trait_standardized).collect()
    }

    pub fn families(&self) -> Vec<Family> {
        self.samples.iter().map(|s| s.family).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

const GRAPH_STREAM: u64 = 1;
const TRAIT_STREAM: u64 = 2;

pub fn simulate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    let mut raw = Vec::with_capacity(spec.families.len() * spec.per_family);
    for fam in &spec.families {
        for _ in 0..spec.per_family {
            let id = raw.len();
            let seed = derive_seed(spec.seed, GRAPH_STREAM, id as u64);
            let graph = generate_graph(fam, spec.node_count, seed)?;
            let y = simulate_trait(
                &graph,
                &spec.trait_spec,
                derive_seed(spec.seed, TRAIT_STREAM, id as u64),
            )?;
            raw.push((fam.family(), seed, graph, y));
        }
    }
    let ys: Vec<f64> = raw.iter().map(|r| r.3).collect();
    let (zs, standardization) = standardize_traits(&ys)?;
    let samples = raw
        .into_iter()
        .zip(zs)
        .enumerate()
        .map(|(id, ((family, seed, graph, trait_raw), z))| Sample {
            id,
            family,
            seed,
            graph,
            trait_raw,
            trait_standardized: z,
        })
        .collect();
    Ok(Corpus {
        node_count: spec.node_count,
        samples,
        standardization,
    })
}
