use nalgebra::{DMatrix, SymmetricEigen};

use crate::{GateError, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// Principal directions of a centred sample, found through the `n×n` Gram
/// matrix so that wide inputs (`D ≫ n`) stay cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-norm directions, one row per component.
    pub components: DMatrix<f64>,
    /// Variance of the training scores along each component.
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(rows: &[Vec<f64>], n_components: usize) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if n < 2 || d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(GateError::structural(
                "PCA needs at least two rows of equal length",
            ));
        }
        if n_components > (n - 1).min(d) {
            return Err(GateError::structural(format!(
                "{n_components} components requested from {n} samples of dimension {d}"
            )));
        }
        let mean: Vec<f64> = (0..d)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let xc = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
        let gram = &xc * xc.transpose();
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);

        let mut kept = Vec::new();
        for &i in order.iter().take(n_components) {
            let lambda = eig.eigenvalues[i];
            if lambda <= RANK_TOL * top || lambda <= 0.0 {
                log::warn!(
                    "dropping {} trailing principal components of zero variance",
                    n_components - kept.len()
                );
                break;
            }
            kept.push((i, lambda));
        }
        let mut components = DMatrix::zeros(kept.len(), d);
        for (c, &(i, lambda)) in kept.iter().enumerate() {
            let dir = xc.transpose() * eig.eigenvectors.column(i) / lambda.sqrt();
            components.row_mut(c).copy_from(&dir.transpose());
        }
        let variances = kept.iter().map(|&(_, l)| l / (n - 1) as f64).collect();
        Ok(Self {
            mean,
            components,
            variances,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        (0..self.n_components())
            .map(|c| {
                row.iter()
                    .zip(&self.mean)
                    .enumerate()
                    .map(|(j, (x, m))| (x - m) * self.components[(c, j)])
                    .sum()
            })
            .collect()
    }
}

/// Least squares of `y` on principal component scores plus an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaRegression {
    pub pca: Pca,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl PcaRegression {
    pub fn fit(rows: &[Vec<f64>], y: &[f64], n_components: usize) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(GateError::structural("rows and responses differ in length"));
        }
        let pca = Pca::fit(rows, n_components)?;
        let intercept = y.iter().sum::<f64>() / y.len() as f64;
        let scores: Vec<Vec<f64>> = rows.iter().map(|r| pca.project(r)).collect();
        // scores are centred and mutually orthogonal, so OLS decouples
        let coefficients = (0..pca.n_components())
            .map(|c| {
                let sy: f64 = scores
                    .iter()
                    .zip(y)
                    .map(|(s, yi)| s[c] * (yi - intercept))
                    .sum();
                let ss: f64 = scores.iter().map(|s| s[c] * s[c]).sum();
                sy / ss
            })
            .collect();
        Ok(Self {
            pca,
            coefficients,
            intercept,
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.pca
            .project(row)
            .iter()
            .zip(&self.coefficients)
            .map(|(s, b)| s * b)
            .sum::<f64>()
            + self.intercept
    }
}

pub fn pca_linear_baseline(
    train: &[(Vec<f64>, f64)],
    test: &[Vec<f64>],
    n_components: usize,
) -> Result<Vec<f64>> {
    let (rows, y): (Vec<Vec<f64>>, Vec<f64>) = train.iter().cloned().unzip();
    let model = PcaRegression::fit(&rows, &y, n_components)?;
    Ok(test.iter().map(|r| model.predict(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_data_is_fit_exactly() {
        let train: Vec<(Vec<f64>, f64)> = (0..8)
            .map(|i| {
                let t = i as f64 - 2.5;
                (vec![1.0 + 2.0 * t, -t, 0.5 * t], 3.0 * t + 1.0)
            })
            .collect();
        let test = vec![vec![1.0 + 2.0 * 7.0, -7.0, 3.5]];
        let pred = pca_linear_baseline(&train, &test, 1).unwrap();
        assert!((pred[0] - 22.0).abs() < 1e-10);
    }

    #[test]
    fn zero_components_predict_the_mean() {
        let train = vec![
            (vec![0.0, 1.0], 1.0),
            (vec![2.0, 0.0], 3.0),
            (vec![1.0, 1.0], 8.0),
        ];
        let pred = pca_linear_baseline(&train, &[vec![9.0, 9.0]], 0).unwrap();
        assert_eq!(pred, vec![4.0]);
    }

    #[test]
    fn rank_deficiency_drops_components() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![i as f64, 2.0 * i as f64, 0.0])
            .collect();
        let pca = Pca::fit(&rows, 2).unwrap();
        assert_eq!(pca.n_components(), 1);
        assert!(Pca::fit(&rows, 6).is_err());
    }

    #[test]
    fn directions_are_orthonormal() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (2.0 * t).cos(), t * 0.1, (t * 0.7).sin() * 2.0]
            })
            .collect();
        let pca = Pca::fit(&rows, 3).unwrap();
        let g = &pca.components * pca.components.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[(i, j)] - f64::from(u8::from(i == j))).abs() < 1e-10);
            }
        }
        assert!(pca.variances.windows(2).all(|w| w[0] >= w[1]));
    }
}
