//! Parametric heterogeneous domain: a low-permeability band crossing a
//! matrix whose conductivities and stiffness vary with `omega`, driven by an
//! injector/producer pair.
//!
//! With `omega = (w1, w2)`: outside the band `K = 10^(w1-1)`, `D = 10^w1`;
//! everywhere `lambda = mu = 10^w2`. Every operator is affine in
//! `10^w1`, `10^w2` and `10^-w2`, so the reduced operators of any `omega`
//! are combinations of matrices projected once.

use std::time::Instant;

use rayon::prelude::*;

use super::bundle::{Bundle, ConditionRow, EigenvalueRow, ParamErrorRow, TimingRow};
use super::config::ExperimentConfig;
use super::example1::Discretization;
use super::norms::relative_h1_history;
use crate::assembly::{labeled_stiffness, CoefficientField, FormId, HfOperators, PhysicalParams};
use crate::error::Result;
use crate::hf::{run_hf, HfScheme, State, StoppingCriterion, Trajectory};
use crate::linalg::CsrMatrix;
use crate::mesh::{BandRegion, BcSpec, Field};
use crate::pod::{PodOptions, ReducedBasis};
use crate::problem::{WellPair, Zero};
use crate::rom::{
    instantiate_affine, lift, project_load_sequence, project_operators, run_rom, AffineCoef, AffineOperatorFamily,
    HfAffineFamily, RomOp, RomOperators, RomScheme, RomState,
};

/// The low-permeability band (label 1).
pub const BAND: BandRegion = BandRegion { y0: 0.35, y1: 0.65 };
pub const BAND_PERMEABILITY: f64 = 0.1;
pub const BAND_CONDUCTIVITY: f64 = 1.0;

/// Material parameters at `omega`; `base` supplies everything but `lambda`, `mu`.
pub fn example2_params(base: &PhysicalParams, omega: [f64; 2]) -> PhysicalParams {
    let s = 10f64.powf(omega[1]);
    PhysicalParams { lambda: s, mu: s, ..*base }
}

pub fn example2_coefficients(omega: [f64; 2]) -> CoefficientField {
    CoefficientField::banded(
        BAND_PERMEABILITY,
        10f64.powf(omega[0] - 1.0),
        BAND_CONDUCTIVITY,
        10f64.powf(omega[0]),
    )
}

/// Parameter-independent pieces of the parametric problem.
pub struct ParametricModel {
    pub base: PhysicalParams,
    pub disc: Discretization,
    pub family: HfAffineFamily,
    pub wells: WellPair,
}

impl ParametricModel {
    /// Assembles at `omega = 0` (`lambda = mu = 1`) and splits the flux forms by subdomain.
    pub fn new(n: usize, pattern: crate::mesh::MeshPattern, base: &PhysicalParams, dt: f64) -> Result<Self> {
        let base = example2_params(base, [0.0, 0.0]);
        let disc =
            Discretization::new(n, pattern, Some(BAND), BcSpec::clamped_insulated(), &base, &example2_coefficients([0.0; 2]), dt)?;
        let mesh = disc.spaces.mesh.as_ref();
        let split = |space| -> Result<[CsrMatrix; 2]> { Ok([labeled_stiffness(mesh, space, 1)?, labeled_stiffness(mesh, space, 2)?]) };
        let [p1, p2] = split(&disc.spaces.p)?;
        let [t1, t2] = split(&disc.spaces.theta)?;
        let stiff = AffineCoef { scale: 1.0, a1: 0.0, a2: 1.0 };
        let compliant = AffineCoef { scale: 1.0, a1: 0.0, a2: -1.0 };
        let mut terms = std::collections::BTreeMap::new();
        for op in RomOp::ALL {
            let m = disc.ops.get(op.form()).clone();
            let t = match op.form() {
                FormId::APP => vec![
                    (AffineCoef::constant(BAND_PERMEABILITY), p1.clone()),
                    (AffineCoef { scale: 0.1, a1: 1.0, a2: 0.0 }, p2.clone()),
                ],
                FormId::ATT => vec![
                    (AffineCoef::constant(BAND_CONDUCTIVITY), t1.clone()),
                    (AffineCoef { scale: 1.0, a1: 1.0, a2: 0.0 }, t2.clone()),
                ],
                // lambda, mu and K_dr all scale with 10^w2
                FormId::AUU | FormId::AUT | FormId::MTU | FormId::STT => vec![(stiff, m)],
                FormId::SPP => vec![(compliant, m)],
                _ => vec![(AffineCoef::constant(1.0), m)],
            };
            terms.insert(op, t);
        }
        Ok(ParametricModel { base, disc, family: HfAffineFamily { dt, terms }, wells: WellPair::default() })
    }

    /// Direct assembly at `omega` on the same spaces (the reference for the affine form).
    pub fn assemble(&self, omega: [f64; 2]) -> Result<HfOperators> {
        HfOperators::assemble(
            &example2_params(&self.base, omega),
            &example2_coefficients(omega),
            &self.disc.spaces,
            self.family.dt,
        )
    }

    pub fn run_hf(&self, omega: [f64; 2], n_steps: usize, stop: &StoppingCriterion) -> Result<(Trajectory, crate::hf::SolverReport)> {
        let ops = self.assemble(omega)?;
        let problem = crate::hf::HfProblem { spaces: &self.disc.spaces, ops: &ops, forcing: &self.wells, initial: &Zero };
        run_hf(&problem, HfScheme::FixedStress, n_steps, stop)
    }

    /// Largest relative Frobenius distance, over operators, between the affine
    /// instantiation and assemble-then-project at each `omega`.
    pub fn affine_consistency(&self, basis: &ReducedBasis, omegas: &[[f64; 2]]) -> Result<Vec<f64>> {
        let projected = self.family.project(basis);
        omegas
            .iter()
            .map(|&w| {
                let direct = project_operators(basis, &self.assemble(w)?)?;
                let affine = instantiate_affine(&projected, w);
                Ok(RomOp::ALL
                    .into_iter()
                    .map(|op| {
                        let (a, b) = (affine.get(op), direct.get(op));
                        let den = b.norm();
                        let d = (a - b).norm();
                        if den > 0.0 {
                            d / den
                        } else {
                            d
                        }
                    })
                    .fold(0.0, f64::max))
            })
            .collect()
    }
}

/// ROM scores at one parameter point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub case: &'static str,
    pub omega: [f64; 2],
    pub r: usize,
    pub max_rel_h1: [f64; 3],
    pub final_rel_h1: [f64; 3],
    pub avg_iterations: f64,
    pub n_unconverged: usize,
}

#[derive(Clone, Debug)]
pub struct ParametricStudy {
    pub ranks: (usize, usize, usize),
    pub points: Vec<PointResult>,
    /// Largest FS-HF iteration count over all reference runs.
    pub hf_max_iterations: usize,
    pub hf_unconverged: usize,
    pub bundle: Bundle,
}

impl ParametricStudy {
    /// Mean over the points of a case of the max-over-time relative H1 error.
    pub fn mean_error(&self, case: &str, r: usize) -> [f64; 3] {
        let sel: Vec<_> = self.points.iter().filter(|p| p.case == case && p.r == r).collect();
        let mut out = [0.0; 3];
        for p in &sel {
            for k in 0..3 {
                out[k] += p.max_rel_h1[k] / sel.len() as f64;
            }
        }
        out
    }
}

fn rom_ops_at(family: &AffineOperatorFamily, omega: [f64; 2], r: (usize, usize, usize)) -> RomOperators {
    instantiate_affine(family, omega).truncated(r.0, r.1, r.2)
}

/// Offline stage on the training grid, then FS-ROM evaluation at the
/// training, interpolation and extrapolation points against FS-HF.
pub fn run_parametric(cfg: &ExperimentConfig) -> Result<ParametricStudy> {
    cfg.validate()?;
    let exp = "2";
    let dt = cfg.dt_train;
    let steps = cfg.train_steps();
    let stop = StoppingCriterion::h1(cfg.eps, cfg.max_iter);
    let rom_stop = StoppingCriterion::euclidean(cfg.eps, cfg.max_iter);
    let model = ParametricModel::new(cfg.mesh_n, cfg.pattern, &cfg.physics, dt)?;
    let mut bundle = Bundle::default();
    let timing = |scheme: &str, phase: &str, seconds: f64| TimingRow {
        experiment: exp.into(),
        scheme: scheme.into(),
        phase: phase.into(),
        seconds,
    };

    let train = cfg.grid.training_points();
    let interp = cfg.grid.interpolation_points();
    let extrap = cfg.grid.extrapolation_points();
    let cases: Vec<(&'static str, [f64; 2])> = train
        .iter()
        .map(|&w| ("i", w))
        .chain(interp.iter().map(|&w| ("ii", w)))
        .chain(extrap.iter().map(|&w| ("iii", w)))
        .collect();

    let clock = Instant::now();
    let references: Vec<(Trajectory, crate::hf::SolverReport)> =
        cases.par_iter().map(|&(_, w)| model.run_hf(w, steps, &stop)).collect::<Result<_>>()?;
    bundle.timings.push(timing("FS-HF", "online", clock.elapsed().as_secs_f64()));
    let hf_max_iterations = references.iter().map(|r| r.1.max_iterations()).max().unwrap_or(0);
    let hf_unconverged = references.iter().map(|r| r.1.n_unconverged()).sum();

    // one snapshot set over all training parameters and times
    let clock = Instant::now();
    let snapshots: Vec<&State> = references[..train.len()].iter().flat_map(|r| r.0.states.iter()).collect();
    let ops0 = &model.disc.ops;
    let r_max = cfg.max_rank();
    let opts = PodOptions { eig_floor: cfg.eig_floor, ..PodOptions::new(r_max) };
    let basis = ReducedBasis::from_states(snapshots.iter().copied(), [&ops0.gram_u, &ops0.gram_p, &ops0.gram_t], &opts)?;
    let family = model.family.project(&basis);
    let loads = project_load_sequence(&basis, &model.disc.spaces, &model.wells, dt, steps);
    bundle.timings.push(timing("FS-ROM", "offline", clock.elapsed().as_secs_f64()));
    for f in Field::ALL {
        bundle.eigenvalues.extend(
            basis
                .field(f)
                .normalized_spectrum()
                .into_iter()
                .enumerate()
                .map(|(k, v)| EigenvalueRow { field: f.name().into(), k, nu_normalized: v }),
        );
    }

    let clock = Instant::now();
    let per_point: Vec<Vec<PointResult>> = cases
        .par_iter()
        .zip(references.par_iter())
        .map(|(&(case, w), (hf, _))| {
            cfg.ranks
                .iter()
                .map(|&r| {
                    let b = basis.truncated(r);
                    let ranks = b.ranks();
                    let rom = rom_ops_at(&family, w, ranks);
                    let l: Vec<_> = loads.iter().map(|x| x.truncated(ranks.0, ranks.1, ranks.2)).collect();
                    let x0 = RomState::zeros(ranks, 0.0);
                    let (states, rep) = run_rom(&rom, &l, x0, RomScheme::FixedStress, &rom_stop)?;
                    let lifted: Vec<State> = states.iter().map(|s| lift(&b, s)).collect();
                    let hist = relative_h1_history(ops0, &lifted, &hf.states);
                    let max = hist.iter().fold([0.0f64; 3], |m, h| [m[0].max(h[0]), m[1].max(h[1]), m[2].max(h[2])]);
                    Ok(PointResult {
                        case,
                        omega: w,
                        r,
                        max_rel_h1: max,
                        final_rel_h1: hist.last().copied().unwrap_or_default(),
                        avg_iterations: rep.average_iterations(),
                        n_unconverged: rep.n_unconverged(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    bundle.timings.push(timing("FS-ROM", "online", clock.elapsed().as_secs_f64()));
    let points: Vec<PointResult> = per_point.into_iter().flatten().collect();

    for p in &points {
        for (k, f) in Field::ALL.into_iter().enumerate() {
            bundle.param_errors.push(ParamErrorRow {
                case: p.case.into(),
                omega1: p.omega[0],
                omega2: p.omega[1],
                r: p.r,
                field: f.name().into(),
                max_rel_h1: p.max_rel_h1[k],
                final_rel_h1: p.final_rel_h1[k],
                avg_iterations: p.avg_iterations,
            });
        }
    }
    // conditioning at the hardest training corner
    let hardest = [cfg.grid.train[0][0], cfg.grid.train[1][0]];
    for &r in &cfg.ranks {
        let ranks = basis.truncated(r).ranks();
        let c = rom_ops_at(&family, hardest, ranks).fixed_stress_condition_numbers();
        for (m, v) in ["flow", "heat", "mechanics"].into_iter().zip(c) {
            bundle.condition_numbers.push(ConditionRow {
                experiment: exp.into(),
                variant: format!("omega=({},{})", hardest[0], hardest[1]),
                r,
                matrix: m.into(),
                condition: v,
            });
        }
    }
    Ok(ParametricStudy { ranks: basis.ranks(), points, hf_max_iterations, hf_unconverged, bundle })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshPattern;

    fn base() -> PhysicalParams {
        ExperimentConfig::defaults(super::super::config::ExperimentId::Parametric).physics
    }

    #[test]
    fn affine_family_matches_direct_assembly_on_hf_level() {
        let m = ParametricModel::new(20, MeshPattern::Diagonal, &base(), 0.1).unwrap();
        for w in [[-4.0, -2.0], [1.0, 2.0], [-1.3, 0.7]] {
            let direct = m.assemble(w).unwrap();
            for op in RomOp::ALL {
                let a = m.family.instantiate(op, w).unwrap().to_dense();
                let b = direct.get(op.form()).to_dense();
                let rel = (&a - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
                assert!(rel < 1e-13, "{op:?} at {w:?}: {rel:e}");
            }
        }
    }

    #[test]
    fn coefficients_follow_omega() {
        let c = example2_coefficients([-2.0, 0.0]);
        assert_eq!(c.permeability_at(1), 0.1);
        assert!((c.permeability_at(2) - 1e-3).abs() < 1e-18);
        assert!((c.conductivity_at(2) - 1e-2).abs() < 1e-17);
        let p = example2_params(&base(), [0.0, -1.0]);
        assert!((p.lambda - 0.1).abs() < 1e-16 && p.lambda == p.mu);
    }
}
