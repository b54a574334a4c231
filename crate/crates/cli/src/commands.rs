use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gate_core::eval::{run_simulation_study, Method, Pca, StudyConfig};
use gate_core::graph::{summaries, DistanceMatrix, Graph, Measure};
use gate_core::inference::{
    conditional_band, conditional_mean_network, mean_difference_topk, posterior_predictive_check,
    quantile, BandSpec, ConditionalBand,
};
use gate_core::io::csv::{
    graph_file_name, read_corpus, read_distances, write_bands, write_corpus, write_distances,
    write_edge_deltas, write_eval_report, write_graph, write_matrix, write_predictions,
    write_predictive_check, write_vectors, LoadedCorpus,
};
use gate_core::io::plot::{export_plot, Plot, PlotData};
use gate_core::io::{load_model, save_model, SavedModel};
use gate_core::model::{encode_all, sample_prior_graphs, train_gate};
use gate_core::regate::{conditional_generate, predict_traits, train_regate, RegressionHead};
use gate_core::synth::{simulate_corpus, template_distance, CorpusSpec, TraitCase};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{create_dir, write_file, Manifest};
use crate::{Command, CorpusFlags, Mode, ModelFlags};

pub const MODEL_FILE: &str = "model.gate";
pub const DISTANCES_FILE: &str = "distances.csv";

type Outcome = Result<(), CliError>;

pub fn dispatch(command: Command, mut config: RunConfig, source: Option<PathBuf>) -> Outcome {
    match command {
        Command::Simulate { out, seed, corpus } => {
            if let Some(s) = seed {
                config.corpus.seed = s;
            }
            apply_corpus(&mut config, &corpus);
            simulate(&out, &config, source)
        }
        Command::Train {
            mode,
            data,
            distances,
            out,
            model,
            template_threshold,
        } => {
            apply_model(&mut config, &model);
            if let Some(t) = template_threshold {
                config.corpus.template_threshold = t;
            }
            train(mode, &data, distances.as_deref(), &out, &config, source)
        }
        Command::Embed { model, data, out } => embed(&model, &data, &out, &config, source),
        Command::Predict { model, data, out } => predict(&model, &data, &out, &config, source),
        Command::Generate {
            model,
            out,
            count,
            y,
            mean_network,
            seed,
        } => {
            if let Some(c) = count {
                config.inference.generate_count = c;
            }
            if let Some(s) = seed {
                config.inference.seed = s;
            }
            generate(&model, &out, y, mean_network, &config, source)
        }
        Command::Ppc {
            model,
            data,
            out,
            draws,
            seed,
        } => {
            if let Some(d) = draws {
                config.inference.ppc_draws = d;
            }
            if let Some(s) = seed {
                config.inference.seed = s;
            }
            ppc(&model, &data, &out, &config, source)
        }
        Command::Band {
            model,
            out,
            y_grid,
            draws,
            seed,
        } => {
            if let Some(g) = y_grid {
                config.inference.y_grid = g;
            }
            if let Some(d) = draws {
                config.inference.band_draws = d;
            }
            if let Some(s) = seed {
                config.inference.seed = s;
            }
            band(&model, &out, &config, source)
        }
        Command::Diff {
            model,
            out,
            y_low,
            y_high,
            data,
            draws,
            top_k,
            seed,
        } => {
            if let Some(d) = draws {
                config.inference.mean_draws = d;
            }
            if let Some(k) = top_k {
                config.inference.top_k = k;
            }
            if let Some(s) = seed {
                config.inference.seed = s;
            }
            diff(
                &model,
                &out,
                (y_low, y_high),
                data.as_deref(),
                &config,
                source,
            )
        }
        Command::Eval {
            out,
            corpus,
            model,
            folds,
        } => {
            apply_corpus(&mut config, &corpus);
            apply_model(&mut config, &model);
            if let Some(f) = folds {
                config.eval.folds = f;
            }
            eval(&out, &config, source)
        }
    }
}

fn apply_corpus(config: &mut RunConfig, flags: &CorpusFlags) {
    let c = &mut config.corpus;
    if let Some(v) = flags.node_count {
        c.node_count = v;
    }
    if let Some(v) = flags.per_family {
        c.per_family = v;
    }
    if let Some(v) = flags.trait_case {
        c.trait_case = v;
    }
    if let Some(v) = flags.corpus_seed {
        c.seed = v;
    }
    if let Some(v) = flags.template_threshold {
        c.template_threshold = v;
    }
}

fn apply_model(config: &mut RunConfig, flags: &ModelFlags) {
    let m = &mut config.model;
    if let Some(v) = flags.epochs {
        m.epochs = v;
    }
    if let Some(v) = flags.seed {
        m.seed = v;
    }
    if let Some(v) = flags.learning_rate {
        m.learning_rate = v;
    }
    if let Some(v) = flags.batch_size {
        m.batch_size = v;
    }
    if let Some(v) = flags.latent_dim {
        m.latent_dim = v;
    }
    if let Some(v) = flags.hidden {
        m.hidden = v;
    }
    if let Some(v) = flags.k_nn {
        m.k_nn = gate_core::model::KnnSpec::Shared(v);
    }
}

fn load_corpus(dir: &Path, manifest: &mut Manifest) -> Result<LoadedCorpus, CliError> {
    manifest.input(dir);
    let corpus = read_corpus(dir)?;
    if corpus.graphs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: corpus has no graphs",
            dir.display()
        )));
    }
    Ok(corpus)
}

fn load(path: &Path, manifest: &mut Manifest) -> Result<SavedModel, CliError> {
    manifest.input(path);
    Ok(load_model(path)?)
}

fn require_head<'a>(model: &'a SavedModel, path: &Path) -> Result<&'a RegressionHead, CliError> {
    model.head.as_ref().ok_or_else(|| {
        CliError::Data(format!(
            "{}: model was trained without traits; use --mode regate",
            path.display()
        ))
    })
}

fn check_nodes(model: &SavedModel, graphs: &[Graph]) -> Outcome {
    let v = model.header.node_count;
    match graphs.iter().find(|g| g.node_count() != v) {
        Some(g) => Err(CliError::Data(format!(
            "model expects {v} nodes, corpus graph has {}",
            g.node_count()
        ))),
        None => Ok(()),
    }
}

fn simulate(out: &Path, config: &RunConfig, source: Option<PathBuf>) -> Outcome {
    let mut manifest = Manifest::start("simulate", source);
    let c = &config.corpus;
    let case = TraitCase::from_number(c.trait_case)?;
    let spec = CorpusSpec::standard(c.node_count, c.per_family, case, c.seed);
    let corpus = simulate_corpus(&spec)?;
    create_dir(out)?;
    write_corpus(out, &corpus)?;
    manifest.output(out);
    let distances = template_distance(&corpus.graphs(), c.template_threshold)?;
    let path = out.join(DISTANCES_FILE);
    write_distances(&path, &distances)?;
    manifest.output(&path);
    manifest.finish(out, config)
}

fn distances_for(
    graphs: &[Graph],
    given: Option<&Path>,
    config: &RunConfig,
    manifest: &mut Manifest,
) -> Result<DistanceMatrix, CliError> {
    match given {
        Some(p) => {
            manifest.input(p);
            Ok(read_distances(p)?)
        }
        None => Ok(template_distance(graphs, config.corpus.template_threshold)?),
    }
}

fn train(
    mode: Mode,
    data: &Path,
    distances: Option<&Path>,
    out: &Path,
    config: &RunConfig,
    source: Option<PathBuf>,
) -> Outcome {
    let mut manifest = Manifest::start("train", source);
    let corpus = load_corpus(data, &mut manifest)?;
    let b = distances_for(&corpus.graphs, distances, config, &mut manifest)?;
    let (params, head, trace) = match mode {
        Mode::Gate => {
            let (p, t) = train_gate(&corpus.graphs, &b, &config.model)?;
            (p, None, t)
        }
        Mode::Regate => {
            let (p, h, t) = train_regate(&corpus.graphs, &corpus.traits, &b, &config.model)?;
            (p, Some(h), t)
        }
    };
    create_dir(out)?;
    let model_path = out.join(MODEL_FILE);
    save_model(&model_path, &params, head.as_ref(), &config.model)?;
    manifest.output(&model_path);
    let dist_path = out.join(DISTANCES_FILE);
    write_distances(&dist_path, &b)?;
    manifest.output(&dist_path);
    let mut text = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        let _ = writeln!(text, "{i},{l}");
    }
    let trace_path = out.join("trace.csv");
    write_file(&trace_path, text.as_bytes())?;
    manifest.output(&trace_path);
    manifest.finish(out, config)
}

fn embed(
    model: &Path,
    data: &Path,
    out: &Path,
    config: &RunConfig,
    source: Option<PathBuf>,
) -> Outcome {
    let mut manifest = Manifest::start("embed", source);
    let saved = load(model, &mut manifest)?;
    let corpus = load_corpus(data, &mut manifest)?;
    check_nodes(&saved, &corpus.graphs)?;
    let codes = encode_all(&corpus.graphs, &saved.params)?;
    create_dir(out)?;
    let path = out.join("codes.csv");
    let means: Vec<Vec<f64>> = codes.into_iter().map(|c| c.mean).collect();
    write_vectors(&path, "z", &means)?;
    manifest.output(&path);
    // two leading principal components of the codes for a latent scatter
    let pca = (means.len() > 2 && means[0].len() > 1)
        .then(|| Pca::fit(&means, 2))
        .transpose()?;
    if let Some(pca) = pca.filter(|p| p.n_components() == 2) {
        let xy: Vec<Vec<f64>> = means.iter().map(|m| pca.project(m)).collect();
        let plot = Plot {
            title: "posterior mean codes".into(),
            x_label: "PC1".into(),
            y_label: "PC2".into(),
            data: PlotData::Scatter {
                x: xy.iter().map(|p| p[0]).collect(),
                y: xy.iter().map(|p| p[1]).collect(),
            },
        };
        let svg = out.join("codes_pca.svg");
        export_plot(&plot, &svg)?;
        manifest.output(&svg);
    }
    manifest.finish(out, config)
}

fn predict(
    model: &Path,
    data: &Path,
    out: &Path,
    config: &RunConfig,
    source: Option<PathBuf>,
) -> Outcome {
    let mut manifest = Manifest::start("predict", source);
    let saved = load(model, &mut manifest)?;
    let head = require_head(&saved, model)?;
    let corpus = load_corpus(data, &mut manifest)?;
    check_nodes(&saved, &corpus.graphs)?;
    let pred = predict_traits(&corpus.graphs, &saved.params, head)?;
    let mut text = String::from("index,predicted,actual\n");
    for (i, (p, y)) in pred.iter().zip(&corpus.traits).enumerate() {
        let _ = writeln!(text, "{i},{p},{y}");
    }
    create_dir(out)?;
    let path = out.join("predictions.csv");
    write_file(&path, text.as_bytes())?;
    manifest.output(&path);
    manifest.finish(out, config)
}

fn write_graph_set(out: &Path, graphs: &[Graph], manifest: &mut Manifest) -> Outcome {
    let mut text = String::from("file,density,mean_eigencentrality,avg_path_length,avg_degree\n");
    for (i, g) in graphs.iter().enumerate() {
        let name = graph_file_name(i);
        write_graph(&out.join(&name), g)?;
        let s = summaries(g);
        let cell = |m: Measure| s.get(m).map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            text,
            "{name},{},{},{},{}",
            cell(Measure::Density),
            cell(Measure::MeanEigencentrality),
            cell(Measure::AvgPathLength),
            cell(Measure::AvgDegree)
        );
    }
    let path = out.join("summaries.csv");
    write_file(&path, text.as_bytes())?;
    manifest.output(&path);
    Ok(())
}

fn generate(
    model: &Path,
    out: &Path,
    y: Option<f64>,
    mean_network: bool,
    config: &RunConfig,
    source: Option<PathBuf>,
) -> Outcome {
    let mut manifest = Manifest::start("generate", source);
    let saved = load(model, &mut manifest)?;
    let inf = &config.inference;
    if mean_network && y.is_none() {
        return Err(CliError::Usage(
            "--mean-network needs a trait value from --y".into(),
        ));
    }
    let graphs = match y {
        None => sample_prior_graphs(&saved.params.decoder, inf.generate_count, inf.seed)?,
        Some(y) => {
            let head = require_head(&saved, model)?;
            conditional_generate(y, inf.generate_count, &saved.params.decoder, head, inf.seed)?
        }
    };
    create_dir(out)?;
    write_graph_set(out, &graphs, &mut manifest)?;
    if let (true, Some(y)) = (mean_network, y) {
        let head = require_head(&saved, model)?;
        let m = conditional_mean_network(
            &saved.params.decoder,
            head,
            y,
            inf.mean_draws,
            inf.seed,
            true,
        )?;
        let path = out.join("mean_network.csv");
        write_matrix(&path, &m)?;
        manifest.output(&path);
    }
    manifest.finish(out, config)
}

fn ppc(
    model: &Path,
    data: &Path,
    out: &Path,
    config: &RunConfig,
    source: Option<PathBuf>,
) -> Outcome {
    let mut manifest = Manifest::start("ppc", source);
    let saved = load(model, &mut manifest)?;
    let corpus = load_corpus(data, &mut manifest)?;
    check_nodes(&saved, &corpus.graphs)?;
    let inf = &config.inference;
    let checks = posterior_predictive_check(
        &saved.params.decoder,
        inf.ppc_draws,
        &corpus.graphs,
        inf.seed,
    )?;
    create_dir(out)?;
    let path = out.join("ppc.csv");
    write_predictive_check(&path, &checks)?;
    manifest.output(&path);
    for check in &checks {
        if check.observed.is_empty() || check.generated.is_empty() {
            log::warn!(
                "{}: no defined values, plot skipped",
                check.observed.measure
            );
            continue;
        }
        let measure = check.observed.measure;
        let plot = Plot {
            title: format!("{measure}: observed and generated"),
            x_label: String::new(),
            y_label: measure.to_string(),
            data: PlotData::ViolinPair {
                left: ("observed".into(), check.observed.samples.clone()),
                right: ("generated".into(), check.generated.samples.clone()),
            },
        };
        let svg = out.join(format!("ppc_{measure}.svg"));
        export_plot(&plot, &svg)?;
        manifest.output(&svg);
    }
    manifest.finish(out, config)
}

fn band_plot(band: &ConditionalBand) -> Option<Plot> {
    let points: Vec<_> = band
        .points
        .iter()
        .filter_map(|p| p.stats.map(|s| (p.y, s)))
        .collect();
    if points.is_empty() {
        return None;
    }
    Some(Plot {
        title: format!("{} given the trait", band.measure),
        x_label: "trait".into(),
        y_label: band.measure.to_string(),
        data: PlotData::LineWithBand {
            x: points.iter().map(|p| p.0).collect(),
            mean: points.iter().map(|p| p.1.mean).collect(),
            lower: points.iter().map(|p| p.1.lower).collect(),
            upper: points.iter().map(|p| p.1.upper).collect(),
        },
    })
}

fn band(model: &Path, out: &Path, config: &RunConfig, source: Option<PathBuf>) -> Outcome {
    let mut manifest = Manifest::start("band", source);
    let saved = load(model, &mut manifest)?;
    let head = require_head(&saved, model)?;
    let inf = &config.inference;
    let spec = BandSpec {
        n_per_y: inf.band_draws,
        quantiles: inf.quantiles,
        ..BandSpec::default()
    };
    let bands = conditional_band(&saved.params.decoder, head, &inf.y_grid, &spec, inf.seed)?;
    create_dir(out)?;
    let path = out.join("bands.csv");
    write_bands(&path, &bands)?;
    manifest.output(&path);
    for b in &bands {
        let flagged: Vec<f64> = b.flagged().collect();
        if !flagged.is_empty() {
            log::warn!("{}: undefined at y = {flagged:?}", b.measure);
        }
        if let Some(plot) = band_plot(b) {
            let svg = out.join(format!("band_{}.svg", b.measure));
            export_plot(&plot, &svg)?;
            manifest.output(&svg);
        }
    }
    manifest.finish(out, config)
}

fn diff(
    model: &Path,
    out: &Path,
    given: (Option<f64>, Option<f64>),
    data: Option<&Path>,
    config: &RunConfig,
    source: Option<PathBuf>,
) -> Outcome {
    let mut manifest = Manifest::start("diff", source);
    let saved = load(model, &mut manifest)?;
    let head = require_head(&saved, model)?;
    let inf = &config.inference;
    let (y_low, y_high) = match (given, data) {
        ((Some(lo), Some(hi)), _) => (lo, hi),
        ((None, None), Some(dir)) => {
            let corpus = load_corpus(dir, &mut manifest)?;
            let (a, b) = inf.diff_levels;
            match (quantile(&corpus.traits, a), quantile(&corpus.traits, b)) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(CliError::Data("corpus traits have no quantiles".into())),
            }
        }
        _ => {
            return Err(CliError::Usage(
                "give both --y-low and --y-high, or --data to use trait quantiles".into(),
            ))
        }
    };
    log::info!("mean difference between y = {y_low} and y = {y_high}");
    let d = mean_difference_topk(
        &saved.params.decoder,
        head,
        y_low,
        y_high,
        inf.mean_draws,
        inf.top_k,
        inf.seed,
    )?;
    create_dir(out)?;
    let path = out.join("edge_deltas.csv");
    write_edge_deltas(&path, &d)?;
    manifest.output(&path);
    let levels = out.join("levels.csv");
    write_file(
        &levels,
        format!("y_low,y_high\n{y_low},{y_high}\n").as_bytes(),
    )?;
    manifest.output(&levels);
    manifest.finish(out, config)
}

fn eval(out: &Path, config: &RunConfig, source: Option<PathBuf>) -> Outcome {
    let manifest_start = Manifest::start("eval", source);
    let mut manifest = manifest_start;
    let c = &config.corpus;
    let e = &config.eval;
    let study = StudyConfig {
        node_count: c.node_count,
        per_family: c.per_family,
        trait_case: c.trait_case,
        corpus_seed: c.seed,
        template_threshold: c.template_threshold,
        folds: e.folds,
        cv_seed: e.cv_seed,
        pca_components: e.pca_components,
        methods: e.methods.clone(),
        model: config.model.clone(),
    };
    let report = run_simulation_study(&study)?;
    create_dir(out)?;
    let path = out.join("report.csv");
    write_eval_report(&path, &report)?;
    manifest.output(&path);
    let path = out.join("predictions.csv");
    write_predictions(&path, &report)?;
    manifest.output(&path);
    for (method, pred) in &report.predictions {
        let pooled = report.pooled(*method);
        log::info!(
            "{method}: pooled mse {:?}",
            pooled.map(|r| r.mse).unwrap_or(f64::NAN)
        );
        let plot = Plot {
            title: format!("{method}: predicted against actual"),
            x_label: "actual".into(),
            y_label: "predicted".into(),
            data: PlotData::Scatter {
                x: report.actual.clone(),
                y: pred.clone(),
            },
        };
        let svg = out.join(format!("scatter_{}.svg", slug(*method)));
        export_plot(&plot, &svg)?;
        manifest.output(&svg);
    }
    manifest.finish(out, config)
}

fn slug(method: Method) -> String {
    method.name().to_lowercase().replace('-', "_")
}
