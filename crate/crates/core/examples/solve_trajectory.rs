//! Solve a variable-speed transport problem and save the trajectory.
//!
//! `cargo run --release --example solve_trajectory -- out_dir`

use caslr::expr::Expr;
use caslr::solvers::{solve, Equation, EvolutionProblem, InitialCondition, SpaceTimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "trajectory_out".into());
    let grid = SpaceTimeGrid::periodic_1d(100, [-1.0, 1.0], 5000, [0.0, 1.0])?;
    let speed = Expr::parse("1 + 0.5*sin(pi*x)*transition(t, -10, 0.5)")?;
    let init = InitialCondition::Custom { expr: Expr::parse("sin(4*pi*(x+0.1)) + sin(6*pi*x) + cos(2*pi*(x-0.5)) + sin(2*pi*(x+0.1))")? };
    let problem = EvolutionProblem::new(Equation::Transport1d { speed }, init, grid);

    let traj = solve(&problem)?;
    let u = traj.field(0);
    let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    println!("solved {:?}, u in [{lo:.3}, {hi:.3}]", traj.grid().shape());

    std::fs::create_dir_all(&out)?;
    let path = std::path::Path::new(&out).join("transport.bin");
    traj.write_binary(&path)?;
    let back = caslr::solvers::TrajectoryField::read_binary(&path)?;
    assert_eq!(back.field(0), traj.field(0));
    println!("wrote {}", path.display());
    Ok(())
}
