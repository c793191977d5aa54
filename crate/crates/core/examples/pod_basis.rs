//! POD of a fixed-stress trajectory: spectrum decay and the H1
//! orthonormality of the modes.

use thermoporo::experiments::example1::Discretization;
use thermoporo::experiments::example1_case;
use thermoporo::hf::{run_hf, HfScheme, StoppingCriterion};
use thermoporo::mesh::{Field, MeshPattern};
use thermoporo::pod::{PodOptions, ReducedBasis};

fn main() -> thermoporo::Result<()> {
    let case = example1_case();
    let disc = Discretization::manufactured(&case, 8, MeshPattern::Crossed, 0.01)?;
    let (traj, _) = run_hf(&disc.problem(&case, &case), HfScheme::FixedStress, 100, &StoppingCriterion::h1(1e-10, 20))?;

    let ops = &disc.ops;
    let basis = ReducedBasis::from_states(&traj.states, [&ops.gram_u, &ops.gram_p, &ops.gram_t], &PodOptions::new(12))?;
    for f in Field::ALL {
        let b = basis.field(f);
        let spec: Vec<String> = b.normalized_spectrum().iter().take(8).map(|v| format!("{v:.1e}")).collect();
        println!("{:>5}: r = {:2}, defect {:.1e}, nu_k/nu_0 = {}", f.name(), b.r(), b.orthonormality_defect(ops.gram(f)), spec.join(" "));
    }
    Ok(())
}
