use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::pursuit::Pursuit;
use super::CaslrError;
use crate::features::PatchRegressionSystem;

/// Which errors enter the penalty weight `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoRule {
    /// Mean of the errors at levels `0..K-1`, the zero model included.
    #[default]
    IncludeZero,
    /// Mean of the errors at levels `1..K-1`.
    LevelsOnly,
}

impl RhoRule {
    /// `errors[l]` is the global error at level `l`, starting from `l = 0`.
    pub fn rho(self, errors: &[f64]) -> f64 {
        let used = match self {
            RhoRule::IncludeZero => errors,
            RhoRule::LevelsOnly => &errors[1.min(errors.len())..],
        };
        if used.is_empty() {
            0.0
        } else {
            used.iter().sum::<f64>() / used.len() as f64
        }
    }
}

/// `S^l = E(l) + rho l / K`
pub fn model_score(error: f64, rho: f64, l: usize, k: usize) -> f64 {
    error + rho * l as f64 / k as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelTrace {
    pub l: usize,
    pub error: f64,
    pub score: f64,
    pub support: Vec<usize>,
}

/// The selected model with the full per-level trace.
#[derive(Debug, Clone)]
pub struct IdentificationResult {
    pub dictionary_size: usize,
    pub rho: f64,
    pub rho_rule: RhoRule,
    pub chosen_level: usize,
    pub support: Vec<usize>,
    /// Per patch, coefficients aligned with `support`.
    pub coefficients: Vec<DVector<f64>>,
    pub global_error: f64,
    /// Error of the zero model followed by one entry per level.
    pub levels: Vec<LevelTrace>,
    pub rank_deficient: bool,
}

/// Runs the pursuit for every `l = 1..K-1`, each level warm-started from
/// the previous support, and returns the level of minimal model score
/// (ties to the smaller level).
pub fn sweep_and_score(systems: &[PatchRegressionSystem], rule: RhoRule) -> Result<IdentificationResult, CaslrError> {
    let pursuit = Pursuit::new(systems)?;
    let k = pursuit.dictionary_size();
    if k < 2 {
        return Err(CaslrError::LevelOutOfRange { l: 1, k });
    }
    let mut results = Vec::with_capacity(k - 1);
    let mut prev: Vec<usize> = Vec::new();
    for l in 1..k {
        let r = pursuit.run(l, Some(&prev))?;
        prev = r.support.clone();
        results.push(r);
    }
    let mut errors = vec![pursuit.zero_error()];
    errors.extend(results.iter().map(|r| r.global_error));
    let rho = rule.rho(&errors);
    let mut levels = vec![LevelTrace { l: 0, error: errors[0], score: errors[0], support: vec![] }];
    for (i, r) in results.iter().enumerate() {
        let score = model_score(r.global_error, rho, i + 1, k);
        levels.push(LevelTrace { l: i + 1, error: r.global_error, score, support: r.support.clone() });
    }
    let mut best = 0;
    for i in 1..results.len() {
        if levels[i + 1].score < levels[best + 1].score {
            best = i;
        }
    }
    let chosen = results.swap_remove(best);
    Ok(IdentificationResult {
        dictionary_size: k,
        rho,
        rho_rule: rule,
        chosen_level: best + 1,
        support: chosen.support,
        coefficients: chosen.coefficients,
        global_error: chosen.global_error,
        levels,
        rank_deficient: chosen.rank_deficient,
    })
}
