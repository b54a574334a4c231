use crate::{GateError, Result};

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.is_empty() || pred.len() != actual.len() {
        return Err(GateError::structural(format!(
            "metric inputs need equal nonzero lengths, got {} and {}",
            pred.len(),
            actual.len()
        )));
    }
    Ok(())
}

pub fn mse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    Ok(pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Sample Pearson correlation; an error when either input is constant.
pub fn pearson(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let ma = actual.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, a) in pred.iter().zip(actual) {
        sxy += (p - mp) * (a - ma);
        sxx += (p - mp).powi(2);
        syy += (a - ma).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GateError::Numerical(
            "correlation undefined for a constant input".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Accuracy of assigning each held-out code to the nearest class centroid of
/// its training folds.
pub fn nearest_centroid_accuracy(
    codes: &[Vec<f64>],
    labels: &[usize],
    folds: &super::FoldAssignment,
) -> Result<f64> {
    if codes.len() != labels.len() || codes.len() != folds.n() || codes.is_empty() {
        return Err(GateError::structural(
            "codes, labels and folds differ in length",
        ));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let dim = codes[0].len();
    let mut correct = 0usize;
    for f in 0..folds.k {
        let mut sums = vec![vec![0.0; dim]; classes];
        let mut counts = vec![0usize; classes];
        for i in folds.train_indices(f) {
            counts[labels[i]] += 1;
            sums[labels[i]]
                .iter_mut()
                .zip(&codes[i])
                .for_each(|(s, c)| *s += c);
        }
        let centroids: Vec<Option<Vec<f64>>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
            .collect();
        for i in folds.test_indices(f) {
            let best = centroids
                .iter()
                .enumerate()
                .filter_map(|(cls, c)| {
                    c.as_ref().map(|c| {
                        let d: f64 = c.iter().zip(&codes[i]).map(|(a, b)| (a - b).powi(2)).sum();
                        (cls, d)
                    })
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(cls, _)| cls);
            if best == Some(labels[i]) {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / codes.len() as f64)
}
