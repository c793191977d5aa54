//! Offline/online split: train on FS-HF snapshots, then run both reduced
//! schemes for a range of sizes and compare with the HF trajectory.

use std::time::Instant;
use thermoporo::experiments::example1::{rom_vs_hf, Discretization, RomModel};
use thermoporo::experiments::example1_case;
use thermoporo::hf::{run_hf, HfScheme, StoppingCriterion};
use thermoporo::mesh::MeshPattern;
use thermoporo::pod::PodOptions;
use thermoporo::rom::RomScheme;

fn main() -> thermoporo::Result<()> {
    let case = example1_case();
    let dt = 0.005;
    let steps = 200;
    let disc = Discretization::manufactured(&case, 12, MeshPattern::Crossed, dt)?;
    let clock = Instant::now();
    let (hf, _) = run_hf(&disc.problem(&case, &case), HfScheme::FixedStress, steps, &StoppingCriterion::h1(1e-10, 20))?;
    println!("FS-HF: {:.2} s", clock.elapsed().as_secs_f64());

    let model = RomModel::train(&hf.states, &disc.ops, &PodOptions::new(6))?;
    let loads = model.loads(&disc.spaces, &case, dt, steps);
    println!("offline: {:.3} s, ranks {:?}", model.offline_seconds, model.basis.ranks());

    let stop = StoppingCriterion::euclidean(1e-10, 20);
    for r in 1..=6 {
        for scheme in [RomScheme::Monolithic, RomScheme::FixedStress] {
            let run = model.run(r, scheme, dt, &loads, &disc.ops, &disc.spaces, &case, &stop)?;
            let d = rom_vs_hf(&disc.ops, &run, &hf.states);
            println!(
                "{:>6} r={r}: rel H1 u {:.1e} p {:.1e} theta {:.1e}, {:.1} us/step, {:.2} it/step",
                scheme.label(),
                d[0],
                d[1],
                d[2],
                1e6 * run.report.mean_step_seconds(),
                run.report.average_iterations()
            );
        }
    }
    Ok(())
}
