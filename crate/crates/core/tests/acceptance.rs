//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! `GATE_ACCEPTANCE=1,2,12` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::Instant;

use gate_core::eval::{cross_validate, kfold_split, nearest_centroid_accuracy, CvData, Method};
use gate_core::graph::{summaries, vectorize, DistanceMatrix, Graph, Measure};
use gate_core::inference::posterior_predictive_check;
use gate_core::io::{self, encode_model};
use gate_core::model::{
    decode_rates, elbo_loss, encode_all, initial_params, kl_std_normal, objective_vars,
    poisson_loglik, train_gate, Activation, Batch, DecoderParams, GateConfig, GateParams,
    HeadInput, KnnSpec, LatentCode,
};
use gate_core::regate::{conditional_generate, train_regate, HeadVars, RegressionHead};
use gate_core::rng::rng_from;
use gate_core::synth::{
    generate_graph, quadratic_form, simulate_corpus, template_distance, Corpus, CorpusSpec,
    FamilySpec, TraitCase,
};
use gate_diffkit::{finite_diff_check, DiffError, Mat, Tape, Var};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const V: usize = 68;
const PER_FAMILY: usize = 100;
const LEADING_ONES: usize = 17;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn(&mut Shared) -> Result<Outcome, String>;

/// Corpora and trained models reused across criteria.
#[derive(Default)]
struct Shared {
    corpus: Option<Corpus>,
    distances: Option<DistanceMatrix>,
    regate: Vec<(GateParams, RegressionHead, Vec<f64>)>,
    gate: Option<GateParams>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn study_config() -> GateConfig {
    GateConfig::default()
}

impl Shared {
    fn corpus(&mut self) -> Result<&Corpus, String> {
        if self.corpus.is_none() {
            let spec = CorpusSpec::standard(V, PER_FAMILY, TraitCase::Linear, 0);
            self.corpus = Some(simulate_corpus(&spec).map_err(err)?);
        }
        Ok(self.corpus.as_ref().expect("set above"))
    }

    fn distances(&mut self) -> Result<DistanceMatrix, String> {
        if self.distances.is_none() {
            let graphs = self.corpus()?.graphs();
            self.distances = Some(template_distance(&graphs, 0.5).map_err(err)?);
        }
        Ok(self.distances.clone().expect("set above"))
    }

    /// reGATE trained on the full linear-trait corpus with seeds `0..=i`.
    fn regate(&mut self, i: usize) -> Result<&(GateParams, RegressionHead, Vec<f64>), String> {
        while self.regate.len() <= i {
            let seed = self.regate.len() as u64;
            let b = self.distances()?;
            let corpus = self.corpus()?;
            let cfg = GateConfig {
                seed,
                ..study_config()
            };
            let trained =
                train_regate(&corpus.graphs(), &corpus.traits(), &b, &cfg).map_err(err)?;
            self.regate.push(trained);
        }
        Ok(&self.regate[i])
    }

    fn gate(&mut self) -> Result<&GateParams, String> {
        if self.gate.is_none() {
            let b = self.distances()?;
            let graphs = self.corpus()?.graphs();
            self.gate = Some(train_gate(&graphs, &b, &study_config()).map_err(err)?.0);
        }
        Ok(self.gate.as_ref().expect("set above"))
    }
}

fn small_config(k_nn: usize) -> GateConfig {
    GateConfig {
        latent_dim: 4,
        embed_dim: 2,
        depth: 2,
        k_nn: KnnSpec::Shared(k_nn),
        hidden: 6,
        batch_size: 1,
        activations: vec![Activation::Sigmoid; 2],
        ..GateConfig::default()
    }
}

fn std_normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn c1_gradients(_: &mut Shared) -> Result<Outcome, String> {
    let start = Instant::now();
    let graphs: Vec<Graph> = (0..4)
        .map(|s| generate_graph(&FamilySpec::Sparse { p: 0.4 }, 10, s))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let b = template_distance(&graphs, 0.25).map_err(err)?;
    let cfg = small_config(3);
    let mut params = initial_params(&graphs, Some(&b), &cfg).map_err(err)?;
    // random baseline: the data-calibrated one leaves near-zero gradients
    // that sit at the roundoff floor of central differences
    let mut rng = rng_from(77);
    params
        .decoder
        .gamma_mut()
        .mapv_inplace(|_| rng.gen_range(-1.0..1.0));
    let head = RegressionHead::init(cfg.latent_dim, &mut rng_from(5));
    let batch = Batch::from_graphs(&graphs).map_err(err)?;
    let mut rng = rng_from(9);
    let noise = vec![
        std_normal_matrix(&mut rng, cfg.latent_dim, graphs.len()),
        std_normal_matrix(&mut rng, cfg.latent_dim, graphs.len()),
    ];
    let traits = Array2::from_shape_vec((1, 4), vec![0.3, -1.1, 0.8, 0.0]).expect("row");
    let n_params = params.tensors().len();

    let loss = |supervised: bool| {
        let params = &params;
        let batch = &batch;
        let noise = &noise;
        let traits = &traits;
        move |t: &mut Tape, vars: &[Var]| -> Result<Var, DiffError> {
            let to_diff = |e: gate_core::GateError| DiffError::Structural(e.to_string());
            let (enc, dec) = params.bind(&vars[..n_params]).map_err(to_diff)?;
            let head = if supervised {
                Some(HeadInput {
                    vars: HeadVars::bind(&vars[n_params..]).map_err(to_diff)?,
                    traits: t.constant(traits.clone()),
                })
            } else {
                None
            };
            let obj = objective_vars(t, &params.decoder, &enc, &dec, batch, noise, head)
                .map_err(to_diff)?;
            Ok(obj.total)
        }
    };
    let mut tensors: Vec<Mat> = params.tensors().into_iter().cloned().collect();
    let unsupervised = finite_diff_check(loss(false), &tensors, 1e-5).map_err(err)?;
    tensors.extend(head.tensors().into_iter().cloned());
    let supervised = finite_diff_check(loss(true), &tensors, 1e-5).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        unsupervised < 1e-5 && supervised < 1e-5 && secs < 60.0,
        format!("max rel err GATE {unsupervised:.2e}, reGATE {supervised:.2e}; {secs:.1}s"),
    ))
}

fn c2_kl(_: &mut Shared) -> Result<Outcome, String> {
    let mut rng = rng_from(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = 4;
        let code = LatentCode {
            mean: (0..k).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            logvar: (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        // E_q[log q(z) − log p(z)] with antithetic pairs
        let log_ratio = |eps: &[f64]| -> f64 {
            code.mean
                .iter()
                .zip(&code.logvar)
                .zip(eps)
                .map(|((m, lv), e)| {
                    let z = m + (0.5 * lv).exp() * e;
                    -0.5 * lv - 0.5 * e * e + 0.5 * z * z
                })
                .sum()
        };
        let mut total = 0.0;
        let pairs = 50_000;
        for _ in 0..pairs {
            let eps: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let neg: Vec<f64> = eps.iter().map(|e| -e).collect();
            total += log_ratio(&eps) + log_ratio(&neg);
        }
        let mc = total / (2 * pairs) as f64;
        let exact = kl_std_normal(&code);
        worst = worst.max((mc - exact).abs() / exact);
    }
    Ok(outcome(
        worst < 0.01,
        format!("max relative error {worst:.2e} over 20 codes"),
    ))
}

/// Haar-random orthogonal matrix from the QR factors of a Gaussian matrix.
fn random_orthogonal(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let signs = DMatrix::from_diagonal(&r.diagonal().map(|d: f64| d.signum()));
    q * signs
}

fn c3_rotation(_: &mut Shared) -> Result<Outcome, String> {
    let graphs: Vec<Graph> = (0..6)
        .map(|s| generate_graph(&FamilySpec::Sparse { p: 0.3 }, 12, s))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let b = template_distance(&graphs, 0.2).map_err(err)?;
    let cfg = GateConfig {
        latent_dim: 5,
        embed_dim: 3,
        k_nn: KnnSpec::Shared(4),
        hidden: 8,
        batch_size: 1,
        ..GateConfig::default()
    };
    let params = initial_params(&graphs, Some(&b), &cfg).map_err(err)?;
    let mut rng = rng_from(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u = random_orthogonal(&mut rng, cfg.latent_dim);
        let z: Vec<f64> = (0..cfg.latent_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let uz: Vec<f64> = (&u * DMatrix::from_column_slice(cfg.latent_dim, 1, &z))
            .iter()
            .copied()
            .collect();
        let mut rotated = params.decoder.clone();
        if let DecoderParams::LatentSpace(d) = &mut rotated {
            for w in &mut d.first_layer {
                let wm = DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[[i, j]]);
                let wu = wm * u.transpose();
                *w = Array2::from_shape_fn(w.dim(), |(i, j)| wu[(i, j)]);
            }
        }
        let a = decode_rates(&z, &params.decoder).map_err(err)?;
        let b = decode_rates(&uz, &rotated).map_err(err)?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(outcome(
        worst <= 1e-10,
        format!("max |Δλ| {worst:.2e} over 20 rotations"),
    ))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn c4_elbo_bound(_: &mut Shared) -> Result<Outcome, String> {
    let g = Graph::from_edges(3, &[(1, 0, 2), (2, 0, 1)]).map_err(err)?;
    let b = DistanceMatrix::from_hops(&Graph::from_edges(3, &[(1, 0, 1), (2, 1, 1)]).map_err(err)?);
    let cfg = GateConfig {
        latent_dim: 1,
        embed_dim: 2,
        k_nn: KnnSpec::Shared(1),
        hidden: 4,
        batch_size: 1,
        ..GateConfig::default()
    };
    let mut params = initial_params(std::slice::from_ref(&g), Some(&b), &cfg).map_err(err)?;
    // steeper layers and larger α so the likelihood varies visibly with z
    if let DecoderParams::LatentSpace(d) = &mut params.decoder {
        d.first_layer
            .iter_mut()
            .for_each(|w| w.mapv_inplace(|x| 4.0 * x));
        d.alpha_raw.fill(1.0);
        for layer in &mut d.deep_layers {
            layer
                .weights
                .iter_mut()
                .for_each(|w| w.mapv_inplace(|x| 3.0 * x));
        }
    }
    let counts = vectorize(&g);

    // log p(A) = log ∫ N(z; 0, 1) p(A | z) dz on a fine grid
    let (lo, hi, n) = (-12.0, 12.0, 48_001);
    let h = (hi - lo) / (n - 1) as f64;
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let z = lo + h * i as f64;
        let rates = decode_rates(&[z], &params.decoder).map_err(err)?;
        let ll = poisson_loglik(&counts, &rates).map_err(err)?;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        terms.push(ll - 0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() + (w * h).ln());
    }
    let log_evidence = log_sum_exp(&terms);

    let mut rng = rng_from(4);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            elbo_loss(&g, &params, &[vec![e]]).map(|l| -l)
        })
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    Ok(outcome(
        mean <= log_evidence + 2.0 * se,
        format!("ELBO {mean:.4} (SE {se:.2e}, draw SD {sd:.3}) vs log p(A) {log_evidence:.4}"),
    ))
}

fn ordering_case(
    shared: &mut Shared,
    case: TraitCase,
    ratio: Option<f64>,
) -> Result<Outcome, String> {
    let start = Instant::now();
    let b = shared.distances()?;
    let spec = CorpusSpec::standard(V, PER_FAMILY, case, 0);
    let corpus = simulate_corpus(&spec).map_err(err)?;
    let graphs = corpus.graphs();
    let traits = corpus.traits();
    let folds = kfold_split(graphs.len(), 5, 0).map_err(err)?;
    let data = CvData {
        graphs: &graphs,
        traits: &traits,
        distances: &b,
        folds: &folds,
        trait_case: case.number(),
    };
    let pooled = |m: Method| -> Result<f64, String> {
        let (rows, _) = cross_validate(&data, m, &study_config(), 50).map_err(err)?;
        Ok(rows.last().expect("pooled row").mse)
    };
    let pca = pooled(Method::LrPca)?;
    let regate = pooled(Method::Regate)?;
    let mins = start.elapsed().as_secs_f64() / 60.0;
    let pass = regate < pca && ratio.is_none_or(|r| regate <= r * pca);
    let mut detail = format!("reGATE MSE {regate:.4}, LR-PCA MSE {pca:.4}");
    if ratio.is_some() {
        detail.push_str(&format!(", ratio {:.3}; {mins:.1} min", regate / pca));
        return Ok(outcome(pass && mins <= 45.0, detail));
    }
    detail.push_str(&format!("; {mins:.1} min"));
    Ok(outcome(pass, detail))
}

fn c5_ordering_linear(shared: &mut Shared) -> Result<Outcome, String> {
    ordering_case(shared, TraitCase::Linear, Some(0.9))
}

fn c6_ordering_cubic(shared: &mut Shared) -> Result<Outcome, String> {
    ordering_case(shared, TraitCase::Cubic, None)
}

fn c7_separation(shared: &mut Shared) -> Result<Outcome, String> {
    let corpus = shared.corpus()?.clone();
    let (params, _, _) = shared.regate(0)?;
    let codes: Vec<Vec<f64>> = encode_all(&corpus.graphs(), params)
        .map_err(err)?
        .into_iter()
        .map(|c| c.mean)
        .collect();
    let labels: Vec<usize> = corpus.families().iter().map(|f| f.index()).collect();
    let folds = kfold_split(codes.len(), 5, 0).map_err(err)?;
    let acc = nearest_centroid_accuracy(&codes, &labels, &folds).map_err(err)?;
    Ok(outcome(
        acc >= 0.85,
        format!("nearest-centroid accuracy {acc:.4}"),
    ))
}

fn c8_conditional_trend(shared: &mut Shared) -> Result<Outcome, String> {
    let alpha: Vec<f64> = (0..V)
        .map(|u| f64::from(u8::from(u < LEADING_ONES)))
        .collect();
    let (params, head, _) = shared.regate(0)?;
    let mut means = Vec::new();
    for y in [-1.5, -0.1, 2.0] {
        let graphs = conditional_generate(y, 500, &params.decoder, head, 8).map_err(err)?;
        let total = graphs
            .iter()
            .map(|g| quadratic_form(g, &alpha))
            .sum::<Result<f64, _>>()
            .map_err(err)?;
        means.push(total / graphs.len() as f64);
    }
    Ok(outcome(
        means[0] < means[1] && means[1] < means[2],
        format!(
            "mean αᵀAα at y = -1.5, -0.1, 2.0: {:.2}, {:.2}, {:.2}",
            means[0], means[1], means[2]
        ),
    ))
}

fn c9_predictive_coverage(shared: &mut Shared) -> Result<Outcome, String> {
    let graphs = shared.corpus()?.graphs();
    let params = shared.gate()?;
    let checks = posterior_predictive_check(&params.decoder, 1000, &graphs, 9).map_err(err)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &checks {
        let covered = c.covers_observed_median(0.025, 0.975).unwrap_or(false);
        pass &= covered;
        parts.push(format!(
            "{} median {:.4} in [{:.4}, {:.4}]: {}",
            c.observed.measure,
            c.observed.median().unwrap_or(f64::NAN),
            c.generated.quantile(0.025).unwrap_or(f64::NAN),
            c.generated.quantile(0.975).unwrap_or(f64::NAN),
            if covered { "yes" } else { "no" }
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn c10_determinism(_: &mut Shared) -> Result<Outcome, String> {
    let graphs: Vec<Graph> = (0..24)
        .map(|s| generate_graph(&FamilySpec::Sparse { p: 0.3 }, 14, s))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let traits: Vec<f64> = graphs
        .iter()
        .map(|g| g.edge_total() as f64 / 10.0 - 1.0)
        .collect();
    let b = template_distance(&graphs, 0.2).map_err(err)?;
    let cfg = GateConfig {
        latent_dim: 3,
        embed_dim: 2,
        k_nn: KnnSpec::Shared(4),
        hidden: 10,
        batch_size: 8,
        epochs: 6,
        seed: 10,
        ..GateConfig::default()
    };
    let dir = tempfile::tempdir().map_err(err)?;
    let run = |tag: &str| -> Result<(Vec<u64>, Vec<u8>, Vec<u8>), String> {
        let (params, head, trace) = train_regate(&graphs, &traits, &b, &cfg).map_err(err)?;
        let model = encode_model(&params, Some(&head), &cfg).map_err(err)?;
        let sample = conditional_generate(0.5, 3, &params.decoder, &head, 1).map_err(err)?;
        let path = dir.path().join(format!("{tag}.csv"));
        io::csv::write_graph(&path, &sample[2]).map_err(err)?;
        let csv = std::fs::read(&path).map_err(err)?;
        Ok((trace.iter().map(|x| x.to_bits()).collect(), model, csv))
    };
    let first = run("a")?;
    let second = run("b")?;
    Ok(outcome(
        first == second,
        format!(
            "traces {}, model files {}, CSV {}",
            if first.0 == second.0 {
                "identical"
            } else {
                "differ"
            },
            if first.1 == second.1 {
                "identical"
            } else {
                "differ"
            },
            if first.2 == second.2 {
                "identical"
            } else {
                "differ"
            },
        ),
    ))
}

fn c11_loss_behaviour(shared: &mut Shared) -> Result<Outcome, String> {
    let mut finals = Vec::new();
    let mut monotone = true;
    let mut worst_rise = 0.0f64;
    for i in 0..3 {
        let trace = &shared.regate(i)?.2;
        let ma: Vec<f64> = trace
            .windows(10)
            .map(|w| w.iter().sum::<f64>() / 10.0)
            .collect();
        // moving averages whose window ends in the final 80% of epochs
        let first_end = trace.len() / 5;
        for w in ma[first_end.saturating_sub(9)..].windows(2) {
            if w[1] > w[0] {
                monotone = false;
                worst_rise = worst_rise.max(w[1] - w[0]);
            }
        }
        finals.push(*trace.last().expect("nonempty trace"));
    }
    let lo = finals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    Ok(outcome(
        monotone && spread <= 0.05,
        format!(
            "moving average non-increasing: {monotone} (largest rise {worst_rise:.4}); final losses {:.3}, {:.3}, {:.3}, spread {:.2}%",
            finals[0],
            finals[1],
            finals[2],
            100.0 * spread
        ),
    ))
}

/// Connected weighted graph on `2..=8` nodes.
fn random_connected(rng: &mut ChaCha8Rng) -> Graph {
    loop {
        let n = rng.gen_range(2..=8);
        let p = [0.25, 0.5, 1.0][rng.gen_range(0..3)];
        let mut edges = Vec::new();
        for u in 1..n {
            for v in 0..u {
                if rng.gen_bool(p) {
                    edges.push((u, v, rng.gen_range(1..=3u64)));
                }
            }
        }
        let g = Graph::from_edges(n, &edges).expect("valid edges");
        if floyd_warshall(&g).iter().flatten().all(Option::is_some) {
            return g;
        }
    }
}

fn floyd_warshall(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.node_count();
    let mut d: Vec<Vec<Option<usize>>> = (0..n)
        .map(|u| {
            (0..n)
                .map(|v| match (u == v, g.weight(u, v) > 0) {
                    (true, _) => Some(0),
                    (false, true) => Some(1),
                    _ => None,
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

fn c12_metrics_oracle(_: &mut Shared) -> Result<Outcome, String> {
    let mut exact = true;
    let mut eig_err = 0.0f64;
    for seed in 0..200 {
        let g = random_connected(&mut rng_from(seed));
        let n = g.node_count();
        let s = summaries(&g);
        let edges = (0..n)
            .map(|u| (0..u).filter(|&v| g.weight(u, v) > 0).count())
            .sum::<usize>();
        let degree_sum: usize = (0..n)
            .map(|u| (0..n).filter(|&v| g.weight(u, v) > 0).count())
            .sum();
        let d = floyd_warshall(&g);
        let (mut hops, mut pairs) = (0usize, 0usize);
        for u in 0..n {
            for v in 0..u {
                hops += d[u][v].expect("connected");
                pairs += 1;
            }
        }
        exact &= s.density == edges as f64 / pairs as f64;
        exact &= s.avg_degree == degree_sum as f64 / n as f64;
        exact &= s.avg_path_length == Some(hops as f64 / pairs as f64);

        let a = DMatrix::from_fn(n, n, |i, j| g.weight(i, j) as f64);
        let eig = SymmetricEigen::new(a);
        let top = eig.eigenvalues.imax();
        let vec = eig.eigenvectors.column(top);
        let oracle = vec.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        let got = s
            .get(Measure::MeanEigencentrality)
            .ok_or("eigencentrality undefined")?;
        eig_err = eig_err.max((got - oracle).abs());
    }
    Ok(outcome(
        exact && eig_err <= 1e-8,
        format!("density/degree/path exact: {exact}; max eigencentrality error {eig_err:.2e}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, Check); 12] = [
        (1, "gradient correctness", c1_gradients),
        (2, "KL closed form", c2_kl),
        (3, "rotation invariance", c3_rotation),
        (4, "small-model ELBO bound", c4_elbo_bound),
        (5, "prediction ordering, linear trait", c5_ordering_linear),
        (6, "prediction ordering, cubic trait", c6_ordering_cubic),
        (7, "latent separation", c7_separation),
        (8, "conditional generation trend", c8_conditional_trend),
        (9, "posterior predictive coverage", c9_predictive_coverage),
        (10, "determinism", c10_determinism),
        (11, "training-loss behaviour", c11_loss_behaviour),
        (12, "metrics oracle", c12_metrics_oracle),
    ];
    let only: Option<Vec<u8>> = std::env::var("GATE_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut shared = Shared::default();
    let mut failures = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|ids| !ids.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = check(&mut shared).unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        if !result.pass {
            failures += 1;
        }
        println!(
            "{} criterion {id:>2} ({name}): {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
