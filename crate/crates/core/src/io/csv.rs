use std::fs::File;
use std::path::Path;

use ndarray::Array2;

use crate::eval::{EvalReport, FoldResult};
use crate::graph::{DistanceMatrix, Graph};
use crate::inference::{ConditionalBand, MeanDifference, PredictiveCheck};
use crate::synth::{Corpus, Family};
use crate::{GateError, Result};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> GateError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => GateError::io(path, io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        GateError::Format(format!("{}: {e}", path.display()))
    }
}

fn rows(path: &Path) -> Result<Vec<Vec<String>>> {
    reader(path)?
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_owned).collect())
                .map_err(|e| csv_error(path, e))
        })
        .collect()
}

fn write_rows<I, R>(path: &Path, header: &[&str], body: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    if !header.is_empty() {
        w.write_record(header).map_err(|e| csv_error(path, e))?;
    }
    for row in body {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| GateError::io(path, e))
}

fn square<T>(path: &Path, parse: impl Fn(&str) -> Option<T>) -> Result<Array2<T>> {
    let rows = rows(path)?;
    let n = rows.len();
    let mut values = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(GateError::Format(format!(
                "{}: row {i} has {} entries, expected {n}",
                path.display(),
                row.len()
            )));
        }
        for cell in row {
            values.push(parse(cell).ok_or_else(|| {
                GateError::Format(format!("{}: bad entry `{cell}` in row {i}", path.display()))
            })?);
        }
    }
    Ok(Array2::from_shape_vec((n, n), values).expect("square shape"))
}

/// `V` rows of `V` nonnegative integers, no header.
pub fn write_graph(path: &Path, g: &Graph) -> Result<()> {
    write_rows(
        path,
        &[],
        g.weights()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>()),
    )
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    Graph::new(square(path, |s| s.parse::<u64>().ok())?)
}

/// `V` rows of `V` distances, `inf` for unreachable pairs.
pub fn write_distances(path: &Path, b: &DistanceMatrix) -> Result<()> {
    write_rows(
        path,
        &[],
        b.as_array().rows().into_iter().map(|r| {
            r.iter()
                .map(|d| {
                    if d.is_finite() {
                        d.to_string()
                    } else {
                        "inf".into()
                    }
                })
                .collect::<Vec<_>>()
        }),
    )
}

pub fn read_distances(path: &Path) -> Result<DistanceMatrix> {
    let m = square(path, |s| match s {
        "inf" | "Inf" | "INF" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|x| x.is_finite()),
    })?;
    DistanceMatrix::new(m)
}

pub const CORPUS_INDEX: &str = "samples.csv";

pub fn graph_file_name(id: usize) -> String {
    format!("graph_{id:04}.csv")
}

/// One graph CSV per sample plus `samples.csv` with
/// `(id, family, seed, file, trait_raw, trait_standardized)`.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| GateError::io(dir, e))?;
    for s in &corpus.samples {
        write_graph(&dir.join(graph_file_name(s.id)), &s.graph)?;
    }
    write_rows(
        &dir.join(CORPUS_INDEX),
        &[
            "id",
            "family",
            "seed",
            "file",
            "trait_raw",
            "trait_standardized",
        ],
        corpus.samples.iter().map(|s| {
            vec![
                s.id.to_string(),
                s.family.to_string(),
                s.seed.to_string(),
                graph_file_name(s.id),
                s.trait_raw.to_string(),
                s.trait_standardized.to_string(),
            ]
        }),
    )
}

/// A corpus read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCorpus {
    pub graphs: Vec<Graph>,
    pub families: Vec<Family>,
    pub traits_raw: Vec<f64>,
    pub traits: Vec<f64>,
}

pub fn read_corpus(dir: &Path) -> Result<LoadedCorpus> {
    let index = dir.join(CORPUS_INDEX);
    let mut out = LoadedCorpus {
        graphs: Vec::new(),
        families: Vec::new(),
        traits_raw: Vec::new(),
        traits: Vec::new(),
    };
    let bad = |what: &str, row: usize| {
        GateError::Format(format!("{}: bad {what} in row {row}", index.display()))
    };
    for (i, row) in rows(&index)?.into_iter().enumerate().skip(1) {
        if row.len() != 6 {
            return Err(bad("column count", i));
        }
        out.families
            .push(row[1].parse().map_err(|_| bad("family", i))?);
        out.graphs.push(read_graph(&dir.join(&row[3]))?);
        out.traits_raw
            .push(row[4].parse().map_err(|_| bad("trait_raw", i))?);
        out.traits
            .push(row[5].parse().map_err(|_| bad("trait_standardized", i))?);
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn fold_row(r: &FoldResult) -> Vec<String> {
    vec![
        r.method.to_string(),
        r.trait_case.to_string(),
        r.fold
            .map(|f| f.to_string())
            .unwrap_or_else(|| "all".into()),
        r.mse.to_string(),
        opt(r.pearson),
        r.seconds.to_string(),
    ]
}

/// `(method, trait_case, fold, mse, pearson, seconds)`; `fold = all` marks
/// the pooled row of a method. Timings make this file run-dependent.
pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<()> {
    write_rows(
        path,
        &["method", "trait_case", "fold", "mse", "pearson", "seconds"],
        report.rows.iter().map(fold_row),
    )
}

/// `(index, actual, <one column per method>)` of out-of-fold predictions.
pub fn write_predictions(path: &Path, report: &EvalReport) -> Result<()> {
    let mut header = vec!["index".to_string(), "actual".to_string()];
    header.extend(report.predictions.keys().map(|m| m.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        report.actual.iter().enumerate().map(|(i, y)| {
            let mut row = vec![i.to_string(), y.to_string()];
            row.extend(report.predictions.values().map(|p| p[i].to_string()));
            row
        }),
    )
}

/// `(y, measure, mean, lower, upper, n_effective)`; empty statistics mark
/// grid points where the measure was undefined for every draw.
pub fn write_bands(path: &Path, bands: &[ConditionalBand]) -> Result<()> {
    write_rows(
        path,
        &["y", "measure", "mean", "lower", "upper", "n_effective"],
        bands.iter().flat_map(|b| {
            b.points.iter().map(move |p| {
                vec![
                    p.y.to_string(),
                    b.measure.to_string(),
                    opt(p.stats.map(|s| s.mean)),
                    opt(p.stats.map(|s| s.lower)),
                    opt(p.stats.map(|s| s.upper)),
                    p.n_effective.to_string(),
                ]
            })
        }),
    )
}

/// `(u, v, delta, rank, sign)` with ranks by `|delta|` across both signs.
pub fn write_edge_deltas(path: &Path, diff: &MeanDifference) -> Result<()> {
    let mut all: Vec<_> = diff
        .positive
        .iter()
        .map(|d| (d, "positive"))
        .chain(diff.negative.iter().map(|d| (d, "negative")))
        .collect();
    all.sort_by(|a, b| {
        b.0.delta
            .abs()
            .total_cmp(&a.0.delta.abs())
            .then((a.0.u, a.0.v).cmp(&(b.0.u, b.0.v)))
    });
    write_rows(
        path,
        &["u", "v", "delta", "rank", "sign"],
        all.iter().enumerate().map(|(rank, (d, sign))| {
            vec![
                d.u.to_string(),
                d.v.to_string(),
                d.delta.to_string(),
                (rank + 1).to_string(),
                sign.to_string(),
            ]
        }),
    )
}

/// Long format `(measure, source, value)` plus a drop count per set.
pub fn write_predictive_check(path: &Path, checks: &[PredictiveCheck]) -> Result<()> {
    write_rows(
        path,
        &["measure", "source", "value"],
        checks.iter().flat_map(|c| {
            [&c.observed, &c.generated].into_iter().flat_map(|d| {
                d.samples
                    .iter()
                    .map(move |x| vec![d.measure.to_string(), d.source.to_string(), x.to_string()])
            })
        }),
    )
}

/// Any real matrix, one row per line, no header.
pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_rows(
        path,
        &[],
        m.rows()
            .into_iter()
            .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>()),
    )
}

/// `(index, <prefix>0, <prefix>1, ...)` with one row per vector.
pub fn write_vectors(path: &Path, prefix: &str, rows_in: &[Vec<f64>]) -> Result<()> {
    let width = rows_in.first().map_or(0, Vec::len);
    let mut header = vec!["index".to_string()];
    header.extend((0..width).map(|i| format!("{prefix}{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        rows_in.iter().enumerate().map(|(i, r)| {
            let mut row = vec![i.to_string()];
            row.extend(r.iter().map(f64::to_string));
            row
        }),
    )
}
