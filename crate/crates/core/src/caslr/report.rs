use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CaslrError, IdentificationResult, LevelTrace, PatchCoefficients, RhoRule};
use crate::features::Dictionary;

/// Serializable form of one identified equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub target: String,
    pub dictionary_size: usize,
    pub support: Vec<String>,
    pub chosen_level: usize,
    pub rho: f64,
    pub rho_rule: RhoRule,
    pub global_error: f64,
    pub rank_deficient: bool,
    pub levels: Vec<LevelTrace>,
    pub coefficients: Vec<PatchCoefficients>,
}

impl IdentificationReport {
    pub fn new(target: &str, dict: &Dictionary, result: &IdentificationResult, coefficients: Vec<PatchCoefficients>) -> Self {
        IdentificationReport {
            target: target.to_string(),
            dictionary_size: result.dictionary_size,
            support: result.support.iter().map(|&k| dict.entry(k).to_string()).collect(),
            chosen_level: result.chosen_level,
            rho: result.rho,
            rho_rule: result.rho_rule,
            global_error: result.global_error,
            rank_deficient: result.rank_deficient,
            levels: result.levels.clone(),
            coefficients,
        }
    }

    /// The recovered right-hand side, e.g. `u_t = c1 u_x + c2 u*u_x`.
    pub fn equation(&self) -> String {
        format!("{}_t = {}", self.target, if self.support.is_empty() { "0".to_string() } else { self.support.join(" + ") })
    }

    pub fn write_json<W: Write>(&self, w: &mut W) -> Result<(), CaslrError> {
        serde_json::to_writer_pretty(&mut *w, self)?;
        writeln!(w)?;
        Ok(())
    }

    /// One row per patch: id, center, then one column per selected feature.
    pub fn write_coefficient_csv<W: Write>(&self, w: &mut W) -> Result<(), CaslrError> {
        write!(w, "patch_id,x,y,t")?;
        for s in &self.support {
            write!(w, ",{s}")?;
        }
        writeln!(w, ",rank_deficient")?;
        for row in &self.coefficients {
            write!(w, "{},{},{},{}", row.patch_id, row.center.0, row.center.1, row.center.2)?;
            for v in &row.values {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", row.rank_deficient)?;
        }
        Ok(())
    }
}
