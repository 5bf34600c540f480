use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

/// Per-feature z-score statistics fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
}

pub fn fit_standardizer(train: &FeatureMatrix) -> Result<Standardizer> {
    if train.n_instances() == 0 {
        return Err(Error::EmptyInput("standardizer training matrix"));
    }
    let n = train.n_instances() as f64;
    let mut means = Vec::with_capacity(train.n_features());
    let mut stds = Vec::with_capacity(train.n_features());
    for j in 0..train.n_features() {
        let col = train.column(j);
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        if !(var > 0.0) {
            return Err(Error::ZeroVariance(train.feature_names()[j].clone()));
        }
        means.push(m);
        stds.push(var.sqrt());
    }
    Ok(Standardizer {
        names: train.feature_names().to_vec(),
        means,
        stds,
    })
}

/// Applies stored statistics; columns must match the fitted feature names.
pub fn apply_standardizer(s: &Standardizer, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
    if matrix.feature_names() != s.names.as_slice() {
        return Err(Error::InvalidParameter(format!(
            "feature columns {:?} do not match standardizer {:?}",
            matrix.feature_names(),
            s.names
        )));
    }
    let f = s.names.len();
    let values = matrix
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - s.means[i % f]) / s.stds[i % f])
        .collect();
    FeatureMatrix::new(matrix.instance_ids().to_vec(), s.names.clone(), values)
}
