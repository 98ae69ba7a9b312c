use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::report::{Aggregate, ExperimentReport, TrialRecord};
use super::{fnv1a64, pool, ExperimentConfig, ExperimentError, FeatureMode, Placement};
use crate::caslr::{coefficient_error, jaccard_system, reconstruct_coefficients, sweep_and_score, IdentificationReport};
use crate::features::{assemble_patch_system, DerivativeSource, Dictionary, ExactSource, FdCache, PatchRegressionSystem};
use crate::patches::{
    condition_diagnostic, estimate_noise_variance, filter_by_sobolev, identifiable, noise_patches, observation_times,
    sample_sensors, sample_sensors_on_circle, sobolev_seminorm, variation_test, write_patch_report, Patch, PatchReportRow,
};
use crate::solvers::{add_noise, solve, EvolutionProblem, InitialCondition, TrajectoryField};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; all cores when absent.
    pub parallelism: Option<usize>,
    /// Overrides the config's output directory.
    pub output_dir: Option<PathBuf>,
    /// Overrides the config's base seed.
    pub seed: Option<u64>,
}

/// Solves a problem and optionally keeps every `[space, time]`-th node.
pub fn solve_problem(problem: &EvolutionProblem, downsample: Option<[usize; 2]>) -> Result<TrajectoryField, ExperimentError> {
    let traj = solve(problem).map_err(|e| ExperimentError::stage("solve", e))?;
    match downsample {
        Some([s, t]) if s > 1 || t > 1 => traj.downsample(s, t).map_err(|e| ExperimentError::stage("solve", e)),
        _ => Ok(traj),
    }
}

// the data one trial works from
struct Data {
    traj: Option<TrajectoryField>,
    source: Box<dyn DerivativeSource + Send>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    dict: Dictionary,
    extra_order: usize,
    // dictionary index sets of the truth, per field of the equation
    truth_support: Vec<Vec<usize>>,
}

type Staged<T> = Result<T, (&'static str, String)>;

fn at<T, E: std::fmt::Display>(stage: &'static str, r: Result<T, E>) -> Staged<T> {
    r.map_err(|e| (stage, e.to_string()))
}

impl Ctx<'_> {
    fn problem_for(&self, shift: u64) -> EvolutionProblem {
        let mut p = self.cfg.problem.clone();
        if self.cfg.vary_initial {
            if let InitialCondition::RandomFourier { seed, .. } = &mut p.initial {
                *seed = seed.wrapping_add(shift);
            }
        }
        p
    }

    fn prepare(&self, problem: &EvolutionProblem, clean: Option<&TrajectoryField>, noise_seed: u64) -> Staged<Data> {
        if self.cfg.features == FeatureMode::Exact {
            let source = at("features", ExactSource::new(problem))?;
            return Ok(Data { traj: None, source: Box::new(source) });
        }
        let solved;
        let clean = match clean {
            Some(t) => t,
            None => {
                solved = at("solve", solve_problem(problem, self.cfg.downsample))?;
                &solved
            }
        };
        let traj = if self.cfg.noise.percent > 0.0 {
            at("noise", add_noise(clean, self.cfg.noise.percent, noise_seed))?
        } else {
            clean.clone()
        };
        let source = at("features", FdCache::new(&traj, &self.dict, self.extra_order))?;
        Ok(Data { traj: Some(traj), source: Box::new(source) })
    }

    fn sensors(&self, data: &Data, seed: u64) -> Staged<Vec<Patch>> {
        let s = &self.cfg.sensors;
        let grid = data.source.grid();
        let times = at("sensors", observation_times(grid, s.times, s.time_radius, s.time_spacing))?;
        let r = [s.radius; 2];
        at(
            "sensors",
            match s.placement {
                Placement::Uniform => sample_sensors(grid, s.count, r, s.time_radius, &times, seed),
                Placement::Circle { radius } => sample_sensors_on_circle(grid, s.count, radius, r, s.time_radius, &times, seed),
            },
        )
    }
}

fn truth_support(cfg: &ExperimentConfig, dict: &Dictionary) -> Result<Vec<Vec<usize>>, ExperimentError> {
    let truth = cfg.truth_equations();
    cfg.problem
        .equation
        .field_names()
        .iter()
        .map(|f| {
            let mut s = Vec::new();
            for eq in truth.iter().filter(|e| &e.target == f) {
                for t in &eq.terms {
                    let k = dict.index_of_str(&t.feature).map_err(|e| ExperimentError::stage("evaluate", e))?;
                    if !s.contains(&k) {
                        s.push(k);
                    }
                }
            }
            s.sort_unstable();
            Ok(s)
        })
        .collect()
}

struct TrialOutput {
    record: TrialRecord,
    reports: Vec<IdentificationReport>,
    patches: Vec<PatchReportRow>,
}

fn run_trial(ctx: &Ctx, trial: usize, base_seed: u64, shared: Option<&Data>, clean: Option<&TrajectoryField>) -> Staged<TrialOutput> {
    let cfg = ctx.cfg;
    let shift = base_seed.wrapping_add(trial as u64);
    let owned;
    let data = match shared {
        Some(d) => d,
        None => {
            owned = ctx.prepare(&ctx.problem_for(shift), clean, cfg.noise.seed.wrapping_add(shift))?;
            &owned
        }
    };
    let f = &cfg.filters;
    let noise = match &data.traj {
        Some(traj) => {
            let grid = traj.grid();
            let est = noise_patches(grid, f.noise_patches, [f.noise_radius; 2], f.noise_time_radius)
                .map_err(|e| e.to_string())
                .and_then(|boxes| {
                    (0..traj.field_count())
                        .map(|i| estimate_noise_variance(traj, i, &boxes, f.lipschitz).map_err(|e| e.to_string()))
                        .collect::<Result<Vec<_>, _>>()
                });
            match est {
                Ok(v) => Some(v),
                Err(e) if f.variation => return Err(("noise_estimate", e)),
                Err(_) => None,
            }
        }
        None => None,
    };
    let sigma_hat = noise.as_ref().map(|v| v.iter().map(|e| e.sigma_hat()).fold(0.0, f64::max));
    let lipschitz = f.lipschitz.or_else(|| noise.as_ref().map(|v| v.iter().map(|e| e.lipschitz).fold(0.0, f64::max)));

    let patches = ctx.sensors(data, cfg.sensors.seed.wrapping_add(shift))?;
    let source: &dyn DerivativeSource = data.source.as_ref();
    let fields = cfg.problem.equation.field_names();
    let targets = fields.iter().map(|n| at("features", source.field_index(n))).collect::<Staged<Vec<_>>>()?;
    let systems: Vec<Vec<PatchRegressionSystem>> = targets
        .iter()
        .map(|&t| {
            patches
                .par_iter()
                .map(|p| assemble_patch_system(source, p, &ctx.dict, t, ctx.extra_order))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| ("features", e.to_string()))?;

    // the filters look at field values and derivatives, shared by all targets
    let first = &systems[0];
    let betas = at("filter", first.iter().map(|s| sobolev_seminorm(s, ctx.extra_order.max(1))).collect::<Result<Vec<_>, _>>())?;
    let by_sobolev = if f.sobolev { filter_by_sobolev(&betas) } else { vec![true; first.len()] };
    let by_variation = if f.variation {
        let s = sigma_hat.unwrap_or(0.0);
        at("filter", first.iter().map(|sys| variation_test(&sys.values, s)).collect::<Result<Vec<_>, _>>())?
    } else {
        vec![true; first.len()]
    };
    let keep: Vec<bool> = by_sobolev.iter().zip(&by_variation).map(|(a, b)| *a && *b).collect();
    let kept = keep.iter().filter(|k| **k).count();
    if kept == 0 {
        return Err(("filter", "every patch was trimmed".into()));
    }

    let grid = source.grid();
    let half_width = (0..grid.space_dim())
        .map(|a| cfg.sensors.radius as f64 * grid.dx(a))
        .fold(cfg.sensors.time_radius as f64 * grid.dt(), f64::max);
    let patch_rows: Vec<PatchReportRow> = first
        .iter()
        .enumerate()
        .map(|(i, sys)| {
            let diag = condition_diagnostic(sys);
            let (x, y, t) = sys.center_position;
            PatchReportRow {
                patch_id: sys.patch_id,
                center_x: x,
                center_y: y,
                center_t: t,
                beta: betas[i],
                kept_by_sobolev: by_sobolev[i],
                kept_by_variation: by_variation[i],
                condition_ratio: diag.ratio,
                identifiable: match (f.epsilon, lipschitz) {
                    (Some(eps), Some(l)) => Some(identifiable(&diag, l, half_width, eps)),
                    _ => None,
                },
            }
        })
        .collect();

    let mut reports = Vec::with_capacity(systems.len());
    let mut found = Vec::with_capacity(systems.len());
    let mut errors = Vec::with_capacity(systems.len());
    let truth = cfg.truth_equations();
    for (e, all) in systems.into_iter().enumerate() {
        let kept_systems: Vec<PatchRegressionSystem> = all.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| s).collect();
        let result = at("caslr", sweep_and_score(&kept_systems, cfg.caslr.rho_rule))?;
        let table = reconstruct_coefficients(&result.support, &kept_systems);
        let exact: Vec<(usize, crate::expr::Expr)> = truth
            .iter()
            .filter(|t| t.target == fields[e])
            .flat_map(|t| t.terms.iter())
            .map(|t| Ok((ctx.dict.index_of_str(&t.feature)?, t.coefficient.clone())))
            .collect::<Result<_, crate::features::FeatureError>>()
            .map_err(|e| ("evaluate", e.to_string()))?;
        errors.push(coefficient_error(&table, &result.support, &exact).value);
        found.push(result.support.clone());
        reports.push(IdentificationReport::new(&fields[e], &ctx.dict, &result, table));
    }

    let record = TrialRecord {
        trial,
        seed: shift,
        completed: true,
        failed_stage: None,
        error: None,
        jaccard: Some(jaccard_system(&ctx.truth_support, &found)),
        coefficient_error: Some(errors.iter().sum::<f64>() / errors.len() as f64),
        equations: reports.iter().map(|r| r.equation()).collect(),
        chosen_levels: reports.iter().map(|r| r.chosen_level).collect(),
        patches_total: keep.len(),
        patches_kept: kept,
        dropped_by_sobolev: by_sobolev.iter().filter(|k| !**k).count(),
        dropped_by_variation: by_variation.iter().filter(|k| !**k).count(),
        sigma_hat,
        rank_deficient: reports.iter().any(|r| r.rank_deficient),
    };
    Ok(TrialOutput { record, reports, patches: patch_rows })
}

fn write_trial(dir: &Path, out: &TrialOutput, space_dim: usize) -> Result<(), ExperimentError> {
    let dir = dir.join("trials").join(format!("trial_{:03}", out.record.trial));
    std::fs::create_dir_all(&dir)?;
    for r in &out.reports {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("identification_{}.json", r.target)))?);
        r.write_json(&mut f).map_err(|e| ExperimentError::stage("report", e))?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("coefficients_{}.csv", r.target)))?);
        r.write_coefficient_csv(&mut f).map_err(|e| ExperimentError::stage("report", e))?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("patches.csv"))?);
    write_patch_report(&mut f, &out.patches, space_dim).map_err(|e| ExperimentError::stage("report", e))?;
    Ok(())
}

/// Runs every trial of a study. A failing trial is recorded with the stage
/// that failed and does not stop the others; only config and output errors
/// are returned as `Err`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let dict = cfg.dictionary.build().map_err(|e| ExperimentError::stage("features", e))?;
    let truth_support = truth_support(cfg, &dict)?;
    let extra_order = cfg.filters.sobolev_order.max(1);
    let ctx = Ctx { cfg, dict, extra_order, truth_support };
    let base_seed = opts.seed.unwrap_or(cfg.seed);
    let out_dir = opts.output_dir.clone().or_else(|| cfg.output_dir.clone());
    let space_dim = cfg.problem.grid.space_dim();

    let pool = pool(opts.parallelism)?;
    let trials = pool.install(|| -> Result<Vec<TrialRecord>, ExperimentError> {
        // data that does not change between trials is built once
        let fixed = !cfg.vary_initial && cfg.features == FeatureMode::FiniteDifference;
        let clean = if fixed { Some(solve_problem(&cfg.problem, cfg.downsample)) } else { None };
        let shared = if !cfg.vary_initial && (cfg.features == FeatureMode::Exact || cfg.noise.percent == 0.0) {
            match &clean {
                Some(Err(_)) => None,
                Some(Ok(t)) => Some(ctx.prepare(&cfg.problem, Some(t), 0)),
                None => Some(ctx.prepare(&cfg.problem, None, 0)),
            }
        } else {
            None
        };
        // trials run concurrently and write only their own directories
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| {
                let seed = base_seed.wrapping_add(i as u64);
                let outcome = match (&clean, &shared) {
                    (Some(Err(e)), _) => Err(("solve", e.to_string())),
                    (_, Some(Err((stage, e)))) => Err((*stage, e.clone())),
                    (c, s) => run_trial(&ctx, i, base_seed, s.as_ref().and_then(|s| s.as_ref().ok()), c.as_ref().and_then(|c| c.as_ref().ok())),
                };
                match outcome {
                    Ok(out) => {
                        if let Some(dir) = &out_dir {
                            write_trial(dir, &out, space_dim)?;
                        }
                        Ok(out.record)
                    }
                    Err((stage, e)) => Ok(TrialRecord::failed(i, seed, stage, e)),
                }
            })
            .collect::<Result<Vec<_>, ExperimentError>>()
    })?;

    let report = ExperimentReport {
        name: cfg.name.clone(),
        config_hash: format!("{:016x}", fnv1a64(cfg.to_toml()?.as_bytes())),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        aggregate: Aggregate::from_trials(&trials),
        trials,
    };
    if let Some(dir) = &out_dir {
        report.write_to(dir)?;
    }
    Ok(report)
}
