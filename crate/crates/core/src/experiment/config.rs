use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::caslr::RhoRule;
use crate::expr::Expr;
use crate::features::{exact_source_supported, DictionarySpec, SPACE_ACCURACY};
use crate::patches::TimeSpacing;
use crate::solvers::{EvolutionProblem, InitialCondition};

/// Where derivative features come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Finite differences of the (possibly noisy) solved trajectory.
    #[default]
    FiniteDifference,
    /// Closed-form derivatives of the exact solution.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Noise standard deviation as a percentage of the field's standard deviation.
    #[serde(default)]
    pub percent: f64,
    #[serde(default)]
    pub seed: u64,
}

/// How sensor centers are placed in space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    #[default]
    Uniform,
    /// On a circle of this many grid points around the origin (2D).
    Circle { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub count: usize,
    /// Half-width in grid points along every space axis.
    pub radius: usize,
    pub time_radius: usize,
    /// Observation times per sensor.
    pub times: usize,
    #[serde(default)]
    pub time_spacing: TimeSpacing,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    #[serde(default)]
    pub sobolev: bool,
    #[serde(default)]
    pub variation: bool,
    /// Highest derivative order in the Sobolev semi-norm.
    #[serde(default = "two")]
    pub sobolev_order: usize,
    /// Noise-estimation boxes: count, space and time half-widths.
    #[serde(default = "noise_count")]
    pub noise_patches: usize,
    #[serde(default = "three")]
    pub noise_radius: usize,
    #[serde(default = "three")]
    pub noise_time_radius: usize,
    /// Lipschitz constant for the noise bounds; estimated when absent.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    /// Coefficient floor used by the per-patch identifiability diagnostic.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn noise_count() -> usize {
    200
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            sobolev: false,
            variation: false,
            sobolev_order: 2,
            noise_patches: 200,
            noise_radius: 3,
            noise_time_radius: 3,
            lipschitz: None,
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaslrSpec {
    #[serde(default)]
    pub rho_rule: RhoRule,
}

/// One equation of the ground truth: target field and `(coefficient, feature)` terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthEquation {
    pub target: String,
    pub terms: Vec<TruthTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthTerm {
    pub feature: String,
    pub coefficient: Expr,
}

/// A full identification study. Every stochastic stage is seeded; trial `i`
/// uses `seed + i` for sensors, noise and (when `vary_initial`) the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: EvolutionProblem,
    /// Keep every `[space, time]`-th node of the solved trajectory.
    #[serde(default)]
    pub downsample: Option<[usize; 2]>,
    #[serde(default)]
    pub features: FeatureMode,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub sensors: SensorSpec,
    pub dictionary: DictionarySpec,
    #[serde(default)]
    pub filters: FilterSpec,
    #[serde(default)]
    pub caslr: CaslrSpec,
    /// Defaults to the equation's own right-hand side.
    #[serde(default)]
    pub truth: Option<Vec<TruthEquation>>,
    #[serde(default = "one_trial")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Redraw random-Fourier initial data in every trial.
    #[serde(default)]
    pub vary_initial: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one_trial() -> usize {
    1
}

fn invalid(field: &str, msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid { field: field.to_string(), message: msg.into() }
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ExperimentError> {
        let c: ExperimentConfig = toml::from_str(src)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String, ExperimentError> {
        Ok(toml::to_string(self)?)
    }

    /// The ground truth as configured, or read off the equation.
    pub fn truth_equations(&self) -> Vec<TruthEquation> {
        self.truth.clone().unwrap_or_else(|| {
            self.problem
                .equation
                .true_terms()
                .into_iter()
                .map(|(target, terms)| TruthEquation {
                    target,
                    terms: terms.into_iter().map(|(coefficient, feature)| TruthTerm { feature, coefficient }).collect(),
                })
                .collect()
        })
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.problem.validate().map_err(|e| invalid("problem", e.to_string()))?;
        if self.trials == 0 {
            return Err(invalid("trials", "need at least one trial"));
        }
        let s = &self.sensors;
        if s.count == 0 {
            return Err(invalid("sensors.count", "need at least one sensor"));
        }
        if s.times == 0 {
            return Err(invalid("sensors.times", "need at least one observation time"));
        }
        let stride = self.downsample.unwrap_or([1, 1]);
        if stride.contains(&0) {
            return Err(invalid("downsample", "strides must be positive"));
        }
        let g = &self.problem.grid;
        for (axis, &n) in g.space_points().iter().enumerate() {
            let n = n.div_ceil(stride[0]);
            if 2 * s.radius + 1 > n {
                return Err(invalid("sensors.radius", format!("a patch of {} points does not fit {} points on axis {axis}", 2 * s.radius + 1, n)));
            }
        }
        let nt = g.time_points().div_ceil(stride[1]);
        if 2 * s.time_radius + 1 > nt {
            return Err(invalid("sensors.time_radius", format!("a patch of {} times does not fit {nt} time points", 2 * s.time_radius + 1)));
        }
        let dict = self.dictionary.build().map_err(|e| invalid("dictionary", e.to_string()))?;
        if dict.space_dim() != g.space_dim() {
            return Err(invalid("dictionary.space_dim", format!("dictionary is {}D, grid is {}D", dict.space_dim(), g.space_dim())));
        }
        let fields = self.problem.equation.field_names();
        if let Some(f) = dict.fields().iter().find(|f| !fields.contains(f)) {
            return Err(invalid("dictionary.fields", format!("unknown field `{f}`")));
        }
        let order = dict.max_order().max(if self.filters.sobolev { self.filters.sobolev_order } else { 0 });
        let needed = order + SPACE_ACCURACY;
        if g.space_points().iter().any(|&n| n.div_ceil(stride[0]) < needed) {
            return Err(invalid("problem.grid", format!("too few points for derivatives of order {order}")));
        }
        if !(self.noise.percent >= 0.0) {
            return Err(invalid("noise.percent", "must be non-negative"));
        }
        if self.features == FeatureMode::Exact {
            if !exact_source_supported(&self.problem.equation) {
                return Err(invalid("features", format!("no exact features for {}", self.problem.equation.name())));
            }
            if self.noise.percent > 0.0 {
                return Err(invalid("features", "exact features cannot carry noise"));
            }
            if self.downsample.is_some() {
                return Err(invalid("downsample", "not used with exact features"));
            }
        }
        if self.vary_initial && !matches!(self.problem.initial, InitialCondition::RandomFourier { .. }) {
            return Err(invalid("vary_initial", "only random_fourier initial data can be redrawn"));
        }
        for eq in self.truth_equations() {
            if !fields.contains(&eq.target) {
                return Err(invalid("truth", format!("unknown target `{}`", eq.target)));
            }
            for t in &eq.terms {
                dict.index_of_str(&t.feature).map_err(|_| invalid("truth", format!("`{}` is not in the dictionary", t.feature)))?;
            }
        }
        if let Placement::Circle { radius } = s.placement {
            if g.space_dim() != 2 || !(radius >= 0.0) {
                return Err(invalid("sensors.placement", "circle placement needs a 2D grid and a non-negative radius"));
            }
        }
        Ok(())
    }
}
