//! Parametric ROM for the heterogeneous well-pair problem: the reduced
//! operators at any omega are a weighted sum of precomputed pieces.

use thermoporo::experiments::example2::ParametricModel;
use thermoporo::experiments::{max_relative_h1, ExperimentConfig, ExperimentId};
use thermoporo::hf::StoppingCriterion;
use thermoporo::pod::{PodOptions, ReducedBasis};
use thermoporo::rom::{instantiate_affine, lift, project_load_sequence, run_rom, RomScheme, RomState};

fn main() -> thermoporo::Result<()> {
    let cfg = ExperimentConfig::defaults(ExperimentId::Parametric);
    let model = ParametricModel::new(cfg.mesh_n, cfg.pattern, &cfg.physics, cfg.dt_train)?;
    let steps = cfg.train_steps();
    let stop = StoppingCriterion::h1(cfg.eps, cfg.max_iter);

    let mut snapshots = Vec::new();
    for w in cfg.grid.training_points() {
        snapshots.extend(model.run_hf(w, steps, &stop)?.0.states);
    }
    let ops = &model.disc.ops;
    let basis = ReducedBasis::from_states(&snapshots, [&ops.gram_u, &ops.gram_p, &ops.gram_t], &PodOptions::new(20))?;
    let family = model.family.project(&basis);
    let loads = project_load_sequence(&basis, &model.disc.spaces, &model.wells, cfg.dt_train, steps);
    println!("{} snapshots, ranks {:?}", snapshots.len(), basis.ranks());

    for w in [[-1.5, 0.0], [-2.5, 0.5], [-3.5, 1.5]] {
        let rom = instantiate_affine(&family, w);
        let (states, rep) = run_rom(&rom, &loads, RomState::zeros(basis.ranks(), 0.0), RomScheme::FixedStress, &StoppingCriterion::euclidean(cfg.eps, cfg.max_iter))?;
        let lifted: Vec<_> = states.iter().map(|s| lift(&basis, s)).collect();
        let (hf, _) = model.run_hf(w, steps, &stop)?;
        let d = max_relative_h1(ops, &lifted, &hf.states);
        println!(
            "omega = {w:?}: rel H1 u {:.1e} p {:.1e} theta {:.1e}, {:.2} it/step",
            d[0],
            d[1],
            d[2],
            rep.average_iterations()
        );
    }
    Ok(())
}
