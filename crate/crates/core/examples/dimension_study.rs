//! Data-space dimension of single transport and heat trajectories over
//! the early and late halves of the time range.

use caslr::expr::Expr;
use caslr::features::{Dictionary, ExactSource};
use caslr::solvers::{solve, Equation, EvolutionProblem, InitialCondition, Node, Sinusoid, SpaceTimeGrid};
use caslr::spectral::{feature_conditioning, svd_dimension_report, ThresholdMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = SpaceTimeGrid::periodic_1d(500, [-8.0, 8.0], 5000, [0.0, 5.0])?;
    let bump = InitialCondition::Bump { center: 0.0, half_width: 1.0, amplitude: 1.0 };
    for (name, eq) in [
        ("transport", Equation::Transport1d { speed: Expr::constant(4.0) }),
        ("heat", Equation::Heat1d { diffusivity: Expr::constant(4.0) }),
    ] {
        let traj = solve(&EvolutionProblem::new(eq, bump.clone(), grid.clone()))?;
        for window in [(0.0, 2.5), (2.5, 5.0)] {
            let r = svd_dimension_report(&traj, 0, window, &[1e-3], ThresholdMode::Relative)?;
            println!("{name:9} {window:?}: {} singular values above 1e-3 of the largest", r.count(1e-3));
        }
    }

    // a pure-derivative feature matrix loses conditioning as heat smooths the data
    let small = SpaceTimeGrid::periodic_1d(64, [0.0, 2.0], 100, [0.0, 2.0])?;
    let init = InitialCondition::SinusoidSum {
        terms: vec![
            Sinusoid { amplitude: 1.0, frequency: 1.0, shift: 0.0, cosine: false },
            Sinusoid { amplitude: 0.8, frequency: 3.0, shift: 0.0, cosine: true },
            Sinusoid { amplitude: 0.5, frequency: 5.0, shift: 0.0, cosine: false },
        ],
        offset: 0.0,
    };
    let heat = EvolutionProblem::new(Equation::Heat1d { diffusivity: Expr::constant(0.05) }, init, small);
    let dict = Dictionary::from_strings(&["u", "u_x", "u_xx", "u_xxx"])?;
    let src = ExactSource::new(&heat)?;
    for k in [0, 99] {
        let nodes: Vec<Node> = (0..64).map(|i| Node::new_1d(i, k)).collect();
        println!("feature matrix at time index {k}: sigma_min/sigma_max = {:.3e}", feature_conditioning(&src, &dict, &nodes)?.ratio);
    }
    Ok(())
}
