//! Finite-difference features against closed-form derivatives of the
//! exact solution.

use caslr::expr::Expr;
use caslr::features::{assemble_patch_system, Dictionary, ExactSource, FdCache};
use caslr::patches::Patch;
use caslr::solvers::{solve, Equation, EvolutionProblem, InitialCondition, Node, Sinusoid, SpaceTimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = SpaceTimeGrid::periodic_1d(128, [0.0, 2.0], 2000, [0.0, 0.5])?;
    let init = InitialCondition::SinusoidSum {
        terms: vec![
            Sinusoid { amplitude: 1.0, frequency: 1.0, shift: 0.0, cosine: false },
            Sinusoid { amplitude: 0.5, frequency: 3.0, shift: 0.0, cosine: true },
        ],
        offset: 0.0,
    };
    let problem = EvolutionProblem::new(Equation::Heat1d { diffusivity: Expr::constant(0.1) }, init, grid.clone());
    let dict = Dictionary::from_strings(&["u", "u_x", "u_xx", "u*u_x"])?;

    let fd = FdCache::new(&solve(&problem)?, &dict, 2)?;
    let exact = ExactSource::new(&problem)?;
    let patch = Patch::new(0, &grid, Node::new_1d(40, 1000), [3, 0], 5)?;
    let a = assemble_patch_system(&fd, &patch, &dict, 0, 2)?;
    let b = assemble_patch_system(&exact, &patch, &dict, 0, 2)?;

    for (k, name) in dict.names().iter().enumerate() {
        let err = (a.features.column(k) - b.features.column(k)).amax() / b.features.column(k).amax();
        println!("{name:8} max relative deviation {err:.2e}");
    }
    println!("u_t      max relative deviation {:.2e}", (&a.target - &b.target).amax() / b.target.amax());
    Ok(())
}
