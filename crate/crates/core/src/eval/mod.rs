//! Cross-validation, error metrics, the PCA regression baseline and the
//! simulation-study driver.

mod cv;
mod metrics;
mod pca;
mod study;

pub use cv::{kfold_split, FoldAssignment};
pub use metrics::{mse, nearest_centroid_accuracy, pearson};
pub use pca::{pca_linear_baseline, Pca, PcaRegression};
pub use study::{
    cross_validate, run_simulation_study, CvData, EvalReport, FoldResult, Method, StudyConfig,
};
