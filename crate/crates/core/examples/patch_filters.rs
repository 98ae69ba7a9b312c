//! Sensor placement, noise-level estimation and the two patch filters on
//! noisy heat data.

use caslr::expr::Expr;
use caslr::features::{assemble_patch_system, Dictionary, FdCache};
use caslr::patches::{
    estimate_noise_variance, filter_by_sobolev, noise_patches, observation_times, sample_sensors, sobolev_seminorm, variation_test, TimeSpacing,
};
use caslr::solvers::{add_noise, solve, Equation, EvolutionProblem, InitialCondition, SpaceTimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = SpaceTimeGrid::periodic_1d(200, [-1.0, 1.0], 1500, [0.0, 0.03])?;
    let init = InitialCondition::Bump { center: 0.0, half_width: 0.5, amplitude: 1.0 };
    let problem = EvolutionProblem::new(Equation::Heat1d { diffusivity: Expr::constant(0.5) }, init, grid.clone());
    let traj = add_noise(&solve(&problem)?, 0.5, 7)?;

    let boxes = noise_patches(&grid, 200, [3, 3], 3)?;
    let est = estimate_noise_variance(&traj, 0, &boxes, None)?;
    println!("sigma_hat = {:.3e} (bias bound {:.1e})", est.sigma_hat(), est.bias_bound);

    let dict = Dictionary::from_strings(&["u", "u_x", "u_xx"])?;
    let cache = FdCache::new(&traj, &dict, 2)?;
    let times = observation_times(&grid, 10, 5, TimeSpacing::Inclusive)?;
    let patches = sample_sensors(&grid, 10, [3, 0], 5, &times, 1)?;
    let systems = patches.iter().map(|p| assemble_patch_system(&cache, p, &dict, 0, 2)).collect::<Result<Vec<_>, _>>()?;

    let betas = systems.iter().map(|s| sobolev_seminorm(s, 2)).collect::<Result<Vec<_>, _>>()?;
    let sobolev = filter_by_sobolev(&betas);
    let mut kept = 0;
    for (s, keep) in systems.iter().zip(&sobolev) {
        if *keep && variation_test(&s.values, est.sigma_hat())? {
            kept += 1;
        }
    }
    println!("{} patches, {} kept by both filters", systems.len(), kept);
    Ok(())
}
