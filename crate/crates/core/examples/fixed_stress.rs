//! Fixed-stress splitting against the monolithic scheme: same answer,
//! a handful of sweeps per step.

use thermoporo::experiments::example1::Discretization;
use thermoporo::experiments::{example1_case, max_relative_h1};
use thermoporo::hf::{run_hf, HfScheme, StoppingCriterion};
use thermoporo::mesh::MeshPattern;

fn main() -> thermoporo::Result<()> {
    let case = example1_case();
    let disc = Discretization::manufactured(&case, 8, MeshPattern::Crossed, 0.005)?;
    let stop = StoppingCriterion::h1(1e-10, 20);
    let problem = disc.problem(&case, &case);
    let (mono, mrep) = run_hf(&problem, HfScheme::Monolithic, 200, &stop)?;
    let (fs, frep) = run_hf(&problem, HfScheme::FixedStress, 200, &stop)?;

    let d = max_relative_h1(&disc.ops, &fs.states, &mono.states);
    println!("max rel H1 distance FS vs M: u {:.1e} p {:.1e} theta {:.1e}", d[0], d[1], d[2]);
    println!(
        "FS sweeps per step: avg {:.2}, max {}, unconverged {}",
        frep.average_iterations(),
        frep.max_iterations(),
        frep.n_unconverged()
    );
    println!("seconds: M {:.3}  FS {:.3}", mrep.solve_seconds(), frep.solve_seconds());
    Ok(())
}
