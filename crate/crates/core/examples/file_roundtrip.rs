//! Trajectory, basis and reduced operator files written and read back.

use thermoporo::experiments::example1::{Discretization, RomModel};
use thermoporo::experiments::example1_case;
use thermoporo::hf::{run_hf, HfScheme, StoppingCriterion};
use thermoporo::io;
use thermoporo::mesh::MeshPattern;
use thermoporo::pod::PodOptions;
use thermoporo::rom::RomOp;

fn main() -> thermoporo::Result<()> {
    let case = example1_case();
    let disc = Discretization::manufactured(&case, 6, MeshPattern::Crossed, 0.02)?;
    let (traj, _) = run_hf(&disc.problem(&case, &case), HfScheme::FixedStress, 20, &StoppingCriterion::h1(1e-10, 20))?;
    let model = RomModel::train(&traj.states, &disc.ops, &PodOptions::new(4))?;

    let dir = std::env::temp_dir().join("thermoporo_roundtrip");
    std::fs::create_dir_all(&dir)?;
    io::write_trajectory(&dir.join("trajectory.bin"), &traj)?;
    io::write_basis(&dir.join("basis.bin"), &model.basis)?;
    io::write_rom_operators(&dir.join("rom_operators.bin"), &model.operators)?;

    let t = io::read_trajectory(&dir.join("trajectory.bin"))?;
    let b = io::read_basis(&dir.join("basis.bin"))?;
    let o = io::read_rom_operators(&dir.join("rom_operators.bin"))?;
    assert_eq!(t.states, traj.states);
    assert_eq!(b.u.modes, model.basis.u.modes);
    assert!(RomOp::ALL.iter().all(|&op| o.get(op) == model.operators.get(op)));
    println!("{} states, ranks {:?}, {} operators round-tripped in {}", t.states.len(), b.ranks(), RomOp::ALL.len(), dir.display());
    Ok(())
}
