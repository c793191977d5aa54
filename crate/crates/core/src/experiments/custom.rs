//! Single runs assembled from a config, and the experiment dispatcher.

use super::bundle::{Bundle, ErrorRow, IterationRow, TimingRow};
use super::config::{ExperimentConfig, ExperimentId, ForcingKind, InitialKind};
use super::example1::{rom_vs_hf, score_against_exact, Discretization, RefinementStudy, RomModel, TimeStudy};
use super::example2::{run_parametric, ParametricStudy};
use super::manufactured::ManufacturedCase;
use crate::assembly::CoefficientField;
use crate::error::{Error, Result};
use crate::hf::{run_hf, HfScheme, SolverReport, StoppingCriterion, Trajectory};
use crate::mesh::{BcSpec, Field};
use crate::pod::{PodOptions, ReducedBasis};
use crate::problem::{Forcing, SpaceTimeField, WellPair, Zero};
use crate::rom::{RomOperators, RomScheme};

/// A discretized problem with its data, built from a config.
pub struct Setup {
    pub disc: Discretization,
    pub forcing: Box<dyn Forcing>,
    pub initial: Box<dyn SpaceTimeField>,
    /// Present when the problem has a known exact solution.
    pub exact: Option<ManufacturedCase>,
}

impl Setup {
    /// Manufactured problem for experiments 1a-1d (on the coarsest mesh for 1a),
    /// or the problem described by `custom`. `dt` selects the time grid.
    pub fn from_config(cfg: &ExperimentConfig, dt: f64) -> Result<Setup> {
        match cfg.experiment {
            ExperimentId::Parametric => Err(Error::Config {
                path: "experiment".into(),
                reason: "the parametric experiment has no single-run setup; use `run`".into(),
            }),
            ExperimentId::Custom => {
                let c = &cfg.custom;
                let bc = if c.all_dirichlet { BcSpec::all_dirichlet() } else { BcSpec::clamped_insulated() };
                let case = ManufacturedCase::new(cfg.physics, c.permeability, c.conductivity);
                let coeffs = CoefficientField::uniform(c.permeability, c.conductivity);
                let disc = Discretization::new(cfg.mesh_n, cfg.pattern, None, bc, &cfg.physics, &coeffs, dt)?;
                let forcing: Box<dyn Forcing> = match c.forcing {
                    ForcingKind::Zero => Box::new(Zero),
                    ForcingKind::Manufactured => Box::new(case),
                    ForcingKind::Wells => Box::new(WellPair::default()),
                };
                let initial: Box<dyn SpaceTimeField> = match c.initial {
                    InitialKind::Zero => Box::new(Zero),
                    InitialKind::Manufactured => Box::new(case),
                };
                let exact = (c.forcing == ForcingKind::Manufactured
                    && c.initial == InitialKind::Manufactured
                    && c.all_dirichlet)
                    .then_some(case);
                Ok(Setup { disc, forcing, initial, exact })
            }
            _ => {
                let base = super::example1_case();
                let case = ManufacturedCase::new(cfg.physics, base.permeability, base.conductivity);
                let disc = Discretization::manufactured(&case, cfg.mesh_n, cfg.pattern, dt)?;
                Ok(Setup { disc, forcing: Box::new(case), initial: Box::new(case), exact: Some(case) })
            }
        }
    }

    pub fn run(&self, scheme: HfScheme, n_steps: usize, stop: &StoppingCriterion) -> Result<(Trajectory, SolverReport)> {
        run_hf(&self.disc.problem(self.forcing.as_ref(), self.initial.as_ref()), scheme, n_steps, stop)
    }

    /// FS-HF on the training grid, then POD.
    pub fn train(&self, cfg: &ExperimentConfig) -> Result<(Trajectory, SolverReport, RomModel)> {
        let (traj, rep) = self.run(HfScheme::FixedStress, cfg.train_steps(), &StoppingCriterion::h1(cfg.eps, cfg.max_iter))?;
        let opts = PodOptions { eig_floor: cfg.eig_floor, ..PodOptions::new(cfg.max_rank()) };
        let model = RomModel::train(&traj.states, &self.disc.ops, &opts)?;
        Ok((traj, rep, model))
    }
}

/// HF runs of both schemes plus ROMs of the configured sizes for a custom setup.
pub struct CustomRun {
    pub trajectories: Vec<(HfScheme, Trajectory, SolverReport)>,
    pub basis: Option<ReducedBasis>,
    pub operators: Option<RomOperators>,
    pub bundle: Bundle,
}

pub fn run_custom(cfg: &ExperimentConfig) -> Result<CustomRun> {
    cfg.validate()?;
    let exp = cfg.experiment.tag();
    let setup = Setup::from_config(cfg, cfg.dt_train)?;
    let stop = StoppingCriterion::h1(cfg.eps, cfg.max_iter);
    let steps = cfg.train_steps();
    let mut bundle = Bundle::default();
    let mut trajectories = Vec::new();
    for scheme in [HfScheme::Monolithic, HfScheme::FixedStress] {
        let (traj, rep) = setup.run(scheme, steps, &stop)?;
        bundle.timings.push(TimingRow {
            experiment: exp.into(),
            scheme: scheme.label().into(),
            phase: "online".into(),
            seconds: rep.solve_seconds(),
        });
        bundle.iterations.extend(rep.steps.iter().enumerate().map(|(k, s)| IterationRow {
            experiment: exp.into(),
            scheme: scheme.label().into(),
            r: 0,
            time_index: k + 1,
            iterations: s.iterations,
        }));
        trajectories.push((scheme, traj, rep));
    }
    if let Some(case) = setup.exact {
        let t = score_against_exact(&setup.disc, &case, cfg.error_mode, cfg.dt_train, steps, 2, false, |lv| {
            trajectories.iter().map(|x| x.1.states[lv].clone()).collect()
        });
        for (k, (scheme, _, _)) in trajectories.iter().enumerate() {
            for (f, field) in Field::ALL.into_iter().enumerate() {
                for (norm, v) in [("l2", t.max_abs[k].l2[f]), ("h1", t.max_abs[k].h1[f]), ("rel_h1", t.max_rel[k].h1[f])] {
                    bundle.errors.push(ErrorRow {
                        experiment: exp.into(),
                        scheme: scheme.label().into(),
                        field: field.name().into(),
                        norm: norm.into(),
                        cycle_or_r: 0,
                        value: v,
                    });
                }
            }
        }
    }
    let (mut basis, mut operators) = (None, None);
    if cfg.max_rank() > 0 {
        let fs = &trajectories[1];
        let opts = PodOptions { eig_floor: cfg.eig_floor, ..PodOptions::new(cfg.max_rank()) };
        let model = match RomModel::train(&fs.1.states, &setup.disc.ops, &opts) {
            Ok(m) => m,
            Err(Error::EmptyBasis { field }) => {
                log::warn!("no POD modes for {field}: snapshots vanish, ROM stage skipped");
                return Ok(CustomRun { trajectories, basis: None, operators: None, bundle });
            }
            Err(e) => return Err(e),
        };
        let loads = model.loads(&setup.disc.spaces, setup.forcing.as_ref(), cfg.dt_train, steps);
        let rom_stop = StoppingCriterion::euclidean(cfg.eps, cfg.max_iter);
        for &r in &cfg.ranks {
            for (scheme, hf) in [(RomScheme::Monolithic, &trajectories[0].1), (RomScheme::FixedStress, &trajectories[1].1)] {
                let run = model.run(r, scheme, cfg.dt_train, &loads, &setup.disc.ops, &setup.disc.spaces, setup.initial.as_ref(), &rom_stop)?;
                let d = rom_vs_hf(&setup.disc.ops, &run, &hf.states);
                for (f, field) in Field::ALL.into_iter().enumerate() {
                    bundle.errors.push(ErrorRow {
                        experiment: exp.into(),
                        scheme: scheme.label().into(),
                        field: field.name().into(),
                        norm: "rel_h1_vs_hf".into(),
                        cycle_or_r: r,
                        value: d[f],
                    });
                }
                if scheme == RomScheme::FixedStress {
                    bundle.iterations.extend(run.report.steps.iter().enumerate().map(|(k, s)| IterationRow {
                        experiment: exp.into(),
                        scheme: scheme.label().into(),
                        r,
                        time_index: k + 1,
                        iterations: s.iterations,
                    }));
                }
                bundle.timings.push(TimingRow {
                    experiment: exp.into(),
                    scheme: super::example1::scheme_tag(scheme.label(), r),
                    phase: "online".into(),
                    seconds: run.report.solve_seconds(),
                });
            }
        }
        operators = Some(model.operators);
        basis = Some(model.basis);
    }
    Ok(CustomRun { trajectories, basis, operators, bundle })
}

/// Result of any experiment.
pub enum Outcome {
    Refinement(RefinementStudy),
    Time(TimeStudy),
    Parametric(ParametricStudy),
    Custom(CustomRun),
}

impl Outcome {
    pub fn bundle(&self) -> Bundle {
        match self {
            Outcome::Refinement(s) => s.bundle(),
            Outcome::Time(s) => s.bundle.clone(),
            Outcome::Parametric(s) => s.bundle.clone(),
            Outcome::Custom(s) => s.bundle.clone(),
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        ExperimentId::Refinement => Outcome::Refinement(RefinementStudy::run(cfg)?),
        ExperimentId::SameInterval | ExperimentId::LongerInterval | ExperimentId::LargerStep => {
            Outcome::Time(super::example1::run_time_study(cfg)?)
        }
        ExperimentId::Parametric => Outcome::Parametric(run_parametric(cfg)?),
        ExperimentId::Custom => Outcome::Custom(run_custom(cfg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(id: ExperimentId) -> ExperimentConfig {
        ExperimentConfig { mesh_n: 4, dt_train: 0.01, t_train: 0.05, dt_online: 0.01, t_online: 0.05, ..ExperimentConfig::defaults(id) }
    }

    #[test]
    fn zero_custom_run_stays_zero() {
        let cfg = small(ExperimentId::Custom);
        let out = run_custom(&cfg).unwrap();
        for (_, traj, _) in &out.trajectories {
            assert_eq!(traj.states.len(), 6);
            assert!(traj.states.iter().all(|s| s.u.iter().chain(&s.p).chain(&s.theta).all(|&v| v == 0.0)));
        }
        // no modes can be extracted from zero snapshots
        assert!(out.basis.is_none());
    }

    #[test]
    fn singular_physics_is_a_numerical_error() {
        let mut cfg = small(ExperimentId::SameInterval);
        cfg.physics.mu = 0.0;
        let err = run_experiment(&cfg).err().expect("mu = 0 must fail");
        assert!(!err.is_usage(), "{err}");
    }

    #[test]
    fn parametric_setup_is_rejected() {
        let cfg = ExperimentConfig::defaults(ExperimentId::Parametric);
        assert!(Setup::from_config(&cfg, 0.1).err().unwrap().is_usage());
    }
}
