use serde::{Deserialize, Serialize};

use super::svd::singular_values;
use super::SpectralError;
use crate::features::{evaluate_features, DerivativeSource, Dictionary, FeatureDescriptor};
use crate::solvers::Node;

/// Singular spectrum of a pointwise feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConditioning {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `sigma_min / sigma_max`, zero for an all-zero matrix.
    pub ratio: f64,
}

impl FeatureConditioning {
    /// Singular values at or above `rel * sigma_max`.
    pub fn numerical_rank(&self, rel: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > 0.0 && s >= rel * top).count()
    }
}

/// SVD of `F[m, k] = f_k(node_m)` for a dictionary of plain derivatives.
pub fn feature_conditioning<S: DerivativeSource + ?Sized>(
    source: &S,
    dict: &Dictionary,
    sample_points: &[Node],
) -> Result<FeatureConditioning, SpectralError> {
    for e in dict.entries() {
        match e {
            FeatureDescriptor::Product(f) if f.len() == 1 => {}
            other => return Err(SpectralError::NotDerivativeOnly(other.to_string())),
        }
    }
    let f = evaluate_features(source, dict, sample_points)?;
    let singular_values = singular_values(&f);
    let ratio = match (singular_values.first(), singular_values.last()) {
        (Some(&max), Some(&min)) if max > 0.0 && f.nrows() >= f.ncols() => min / max,
        _ => 0.0,
    };
    Ok(FeatureConditioning { singular_values, ratio })
}
