//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use caslr::caslr::{lstsq, Pursuit};
use caslr::experiment::{
    run_dimension_study, run_experiment, run_noise_estimate, run_trim_comparison, DimensionStudyConfig, ExperimentConfig,
    NoiseStudyConfig, RunOptions, TrimComparisonConfig,
};
use caslr::features::{build_dictionary, FeatureDescriptor, PatchRegressionSystem};
use caslr::solvers::{solve, Equation, EvolutionProblem, InitialCondition, SpaceTimeGrid};
use caslr::spectral::{identify_constant_coeff, svd_dimension_report, SpectralOptions, ThresholdMode};
use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn dictionary_sizes() -> Outcome {
    let trig: Vec<FeatureDescriptor> = ["sin(u)", "cos(u)", "sin(u_x)", "cos(u_x)"].iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let k = [
        build_dictionary(&["u"], 1, 4, 3, &trig)?.len(),
        build_dictionary(&["u", "v"], 1, 3, 2, &[])?.len(),
        build_dictionary(&["u"], 2, 2, 2, &[])?.len(),
    ];
    Ok((k == [59, 44, 27], format!("K = {k:?}")))
}

const EXACT_BASE: &str = r#"
trials = 3
seed = 0
features = "exact"
sensors = { count = 5, radius = 3, time_radius = 5, times = 10, seed = 11 }
dictionary = { fields = ["u"], max_derivative_order = 3, max_product_terms = 2 }
"#;

fn exact_recovery() -> Outcome {
    let cases = [
        ("transport", r#"problem.initial = { kind = "random_fourier", modes = 5, seed = 3 }
problem.equation = { kind = "transport1d", speed = "2" }
problem.grid = { space_points = [200], time_points = 2000, space_extent = [[-1.0, 1.0]], time_extent = [0.0, 0.5] }"#),
        ("heat", r#"problem.initial = { kind = "sinusoid_sum", terms = [{ amplitude = 1.0, frequency = 1.0 }, { amplitude = 0.5, frequency = 2.0, cosine = true }, { amplitude = 0.3, frequency = 3.0, shift = 0.2 }] }
problem.equation = { kind = "heat1d", diffusivity = "0.5" }
problem.grid = { space_points = [200], time_points = 2000, space_extent = [[-1.0, 1.0]], time_extent = [0.0, 0.1] }"#),
        ("burgers", r#"problem.initial = { kind = "custom", expr = "0.5*sin(pi*x) + 0.2*cos(2*pi*x)" }
problem.equation = { kind = "burgers1d", advection = "1.1" }
problem.grid = { space_points = [200], time_points = 2000, space_extent = [[-1.0, 1.0]], time_extent = [0.0, 0.2] }"#),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, problem) in cases {
        let cfg = ExperimentConfig::from_toml_str(&format!("name = \"{name}\"\n{EXACT_BASE}{problem}\n"))?;
        let r = run_experiment(&cfg, &RunOptions::default())?;
        let worst_j = r.trials.iter().map(|t| t.jaccard.unwrap_or(0.0)).fold(1.0, f64::min);
        let worst_e = r.trials.iter().map(|t| t.coefficient_error.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
        ok &= r.all_completed() && worst_j == 1.0 && worst_e < 1e-6;
        detail.push(format!("{name}: min J {worst_j}, max err {worst_e:.1e}"));
    }
    Ok((ok, detail.join("; ")))
}

fn single_mode_dimension() -> Outcome {
    let grid = SpaceTimeGrid::periodic_1d(500, [-8.0, 8.0], 5000, [0.0, 5.0])?;
    let init = InitialCondition::Custom { expr: caslr::expr::Expr::parse("sin(pi*x/8)")? };
    let count = |eq: Equation| -> Result<usize, Box<dyn std::error::Error>> {
        let traj = solve(&EvolutionProblem::new(eq, init.clone(), grid.clone()))?;
        Ok(svd_dimension_report(&traj, 0, (0.0, 5.0), &[1e-3], ThresholdMode::Relative)?.count(1e-3))
    };
    let t = count(Equation::Transport1d { speed: caslr::expr::Expr::constant(2.0) })?;
    let h = count(Equation::Heat1d { diffusivity: caslr::expr::Expr::constant(2.0) })?;
    Ok((t == 2 && h == 1, format!("transport {t}, heat {h}")))
}

fn heat_transport_contrast() -> Outcome {
    let mut cfg = DimensionStudyConfig::load(&config("dimension_study.toml"))?;
    cfg.problems.retain(|p| p.label.ends_with("_bump"));
    cfg.mode_sweep = None;
    let res = run_dimension_study(&cfg, None, None)?;
    let counts = |label: &str| -> Vec<usize> {
        res.reports.iter().filter(|(l, _)| l == label).map(|(_, r)| r.count(1e-3)).collect()
    };
    let (t, h) = (counts("transport_bump"), counts("heat_bump"));
    let agree = (t[0] as f64 - t[1] as f64).abs() <= 0.1 * t[0].max(t[1]) as f64;
    Ok((h[1] < h[0] && agree, format!("at 1e-3: transport {t:?}, heat {h:?}")))
}

fn noise_estimator() -> Outcome {
    let cfg = NoiseStudyConfig::load(&config("noise_constant.toml"))?;
    let r = run_noise_estimate(&cfg, None, None)?;
    let bias = (r.mean - 0.01).abs() / 0.01;
    Ok((
        r.n == 200 && r.b == 49 && r.estimates.len() == 100 && bias < 0.05 && r.variance <= r.variance_bound,
        format!("relative bias {:.2}%, variance {:.3e} vs bound {:.3e}", 100.0 * bias, r.variance, r.variance_bound),
    ))
}

fn spectral_recovery() -> Outcome {
    let (n, len, dt) = (64, 2.0, 0.01);
    let modes: Vec<[i64; 2]> = (1..=5).map(|m| [m, 0]).collect();
    let opts = SpectralOptions { order: 2, modes: Some(modes), ..Default::default() };
    let snap = |t: f64, a: f64, c: f64| {
        ArrayD::from_shape_fn(IxDyn(&[n]), |ix| {
            let x = ix[0] as f64 * len / n as f64;
            (1..=5)
                .map(|m| {
                    let z = 2.0 * PI * m as f64 / len;
                    (-a * z * z * t).exp() * (z * (x + c * t) + 0.3 * m as f64).sin() / m as f64
                })
                .sum::<f64>()
        })
    };
    let mut worst: f64 = 0.0;
    for (a, c) in [(4.0, 0.0), (0.0, 2.0)] {
        let id = identify_constant_coeff(&snap(0.0, a, c), &snap(dt, a, c), &[len], dt, &opts)?;
        worst = worst
            .max((id.coefficient([2, 0]) - a).abs())
            .max((id.coefficient([1, 0]) - c).abs())
            .max(id.coefficient([0, 0]).abs());
    }
    Ok((worst < 1e-8, format!("max coefficient error {worst:.1e}")))
}

fn example_one() -> Outcome {
    let base = ExperimentConfig::load(&config("example1_transport.toml"))?;
    let mut grid = Vec::new();
    for sensors in [1, 3, 5] {
        for r in [2, 3, 4] {
            let mut cfg = base.clone();
            cfg.sensors.count = sensors;
            cfg.sensors.radius = r;
            let rep = run_experiment(&cfg, &RunOptions::default())?;
            grid.push((sensors, r, rep.aggregate.mean_jaccard.unwrap_or(0.0)));
        }
    }
    let main = grid.iter().find(|g| g.0 == 5 && g.1 == 3).map_or(0.0, |g| g.2);
    let single = grid.iter().filter(|g| g.0 == 1).map(|g| g.2).sum::<f64>() / 3.0;
    let cells: Vec<String> = grid.iter().map(|(s, r, j)| format!("{s}x{r}:{j:.2}")).collect();
    Ok((main >= 0.95 && single >= 0.9, format!("5 sensors r=3 {main:.3}, single sensor {single:.3} [{}]", cells.join(" "))))
}

fn random_initial() -> Outcome {
    let base = ExperimentConfig::load(&config("random_init_transport.toml"))?;
    let mut means = Vec::new();
    for m in 2..=10 {
        let mut cfg = base.clone();
        if let InitialCondition::RandomFourier { modes, .. } = &mut cfg.problem.initial {
            *modes = m;
        }
        let rep = run_experiment(&cfg, &RunOptions::default())?;
        means.push(if rep.all_completed() { rep.aggregate.mean_jaccard.unwrap_or(0.0) } else { 0.0 });
    }
    let text: Vec<String> = means.iter().map(|j| format!("{j:.2}")).collect();
    Ok((base.trials == 20 && means.iter().all(|&j| j == 1.0), format!("M = 2..10: {}", text.join(" "))))
}

fn trimming() -> Outcome {
    let cfg = TrimComparisonConfig::load(&config("trim_table.toml"))?;
    let res = run_trim_comparison(&cfg, &RunOptions::default())?;
    let mut ok = res.all_completed();
    let mut cells = Vec::new();
    for row in &res.rows {
        let w = row.with_trim.mean_jaccard.unwrap_or(0.0);
        let wo = row.without_trim.mean_jaccard.unwrap_or(0.0);
        ok &= w >= wo && (row.equation != "burgers" || w >= 0.4);
        cells.push(format!("{} {w:.2}/{wo:.2}", row.equation));
    }
    Ok((ok, format!("with/without: {}", cells.join(", "))))
}

fn subsets(k: usize, l: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << k).filter(move |m| m.count_ones() as usize == l).map(move |m| (0..k).filter(|i| m >> i & 1 == 1).collect())
}

fn pursuit_vs_exhaustive() -> Outcome {
    let (k, rows) = (8, 24);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let truth: Vec<usize> = {
            let mut s: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                s.swap(i, rng.random_range(0..=i));
            }
            s.truncate(rng.random_range(1..=4));
            s
        };
        let systems: Vec<PatchRegressionSystem> = (0..3)
            .map(|p| {
                let f = DMatrix::from_fn(rows, k, |_, _| rng.random_range(-1.0..1.0));
                let mut y = DVector::from_fn(rows, |_, _| 0.05 * rng.random_range(-1.0..1.0));
                for &j in &truth {
                    y += f.column(j) * rng.random_range(0.5..2.0);
                }
                PatchRegressionSystem::from_parts(p, f, y)
            })
            .collect();
        let pursuit = Pursuit::new(&systems)?;
        for l in 1..k {
            let found = pursuit.run(l, None)?.global_error;
            let best = subsets(k, l)
                .map(|s| systems.iter().map(|sys| lstsq(&sys.features.select_columns(&s), &sys.target).residual).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(found / best - 1.0);
        }
    }
    Ok((worst <= 0.01, format!("worst relative excess {:.2e}", worst)))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("dictionary cardinalities", dictionary_sizes),
        ("exact recovery on clean data", exact_recovery),
        ("single-mode data-space dimensions", single_mode_dimension),
        ("heat vs transport dimension contrast", heat_transport_contrast),
        ("noise estimator bias and variance", noise_estimator),
        ("spectral identification", spectral_recovery),
        ("example 1 reproduction", example_one),
        ("random initial data", random_initial),
        ("patch trimming ordering", trimming),
        ("pursuit vs exhaustive search", pursuit_vs_exhaustive),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {:2} {} {name}: {detail} ({secs:.1} s)", i + 1, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
