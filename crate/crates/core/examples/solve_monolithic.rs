//! Monolithic solve of the manufactured problem and its error at the final time.
//!
//! cargo run --release --example solve_monolithic -- [n]

use thermoporo::experiments::example1::Discretization;
use thermoporo::experiments::{example1_case, state_errors, ErrorMode};
use thermoporo::hf::{run_hf, HfScheme, StoppingCriterion};
use thermoporo::mesh::MeshPattern;

fn main() -> thermoporo::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let case = example1_case();
    let dt = 0.01;
    let disc = Discretization::manufactured(&case, n, MeshPattern::Crossed, dt)?;
    let (u, p, th) = disc.spaces.free_counts();
    println!("n = {n}: {u} + {p} + {th} unknowns");

    let (traj, rep) = run_hf(&disc.problem(&case, &case), HfScheme::Monolithic, 100, &StoppingCriterion::h1(1e-10, 20))?;
    let last = traj.states.last().expect("nonempty trajectory");
    let e = state_errors(&disc.spaces, &disc.ops, last, &case, ErrorMode::Quadrature);
    println!("t = {:.2}, {:.0} us per step", last.t, 1e6 * rep.mean_step_seconds());
    for (k, f) in ["u", "p", "theta"].iter().enumerate() {
        println!("{f:>6}: L2 {:.3e}  H1 {:.3e}", e.l2[k], e.h1[k]);
    }
    Ok(())
}
