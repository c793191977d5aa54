//! Manufactured-solution experiments: mesh refinement, HF vs ROM on the
//! training interval, ROM extrapolation in time, and ROM with a larger step.

use std::time::Instant;

use rayon::prelude::*;

use super::bundle::{Bundle, ConditionRow, EigenvalueRow, ErrorRow, HistoryRow, IterationRow, RateRow, TimingRow};
use super::config::ExperimentConfig;
use super::manufactured::{ExactSolution, ManufacturedCase};
use super::norms::{level_errors, observed_rate, ErrorMode, ErrorTracker, FieldErrors};
use crate::assembly::{CoefficientField, HfOperators, PhysicalParams};
use crate::error::Result;
use crate::hf::{
    fixed_stress_energy, run_hf, FixedStressSolver, HfProblem, HfScheme, Loads, MonolithicSolver, SolverReport, State,
    StoppingCriterion, Trajectory,
};
use crate::linalg::sub;
use crate::mesh::{build_patterned_mesh, build_spaces, BandRegion, BcSpec, Field, MeshPattern, SpaceSet};
use crate::pod::{numerical_rank_floor, PodOptions, PodRoute, ReducedBasis};
use crate::problem::{Forcing, SpaceTimeField};
use crate::rom::{
    lift, project_initial_condition, project_load_sequence, project_operators, run_rom, RomLoads, RomOperators,
    RomScheme, RomState,
};

/// Spaces and operators of one mesh and time step.
pub struct Discretization {
    pub spaces: SpaceSet,
    pub ops: HfOperators,
}

impl Discretization {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        pattern: MeshPattern,
        region: Option<BandRegion>,
        bc: BcSpec,
        params: &PhysicalParams,
        coeffs: &CoefficientField,
        dt: f64,
    ) -> Result<Self> {
        let mesh = build_patterned_mesh(n, region, pattern)?;
        let spaces = build_spaces(&mesh, bc);
        let ops = HfOperators::assemble(params, coeffs, &spaces, dt)?;
        Ok(Discretization { spaces, ops })
    }

    /// The manufactured problem on an `n x n` grid with homogeneous Dirichlet data.
    pub fn manufactured(case: &ManufacturedCase, n: usize, pattern: MeshPattern, dt: f64) -> Result<Self> {
        Self::new(n, pattern, None, BcSpec::all_dirichlet(), &case.params, &case.coefficients(), dt)
    }

    pub fn problem<'a>(&'a self, forcing: &'a dyn Forcing, initial: &'a dyn SpaceTimeField) -> HfProblem<'a> {
        HfProblem { spaces: &self.spaces, ops: &self.ops, forcing, initial }
    }
}

/// Offline products of one training trajectory: basis and full-size operators.
pub struct RomModel {
    pub basis: ReducedBasis,
    pub operators: RomOperators,
    pub offline_seconds: f64,
}

/// One online ROM evaluation.
pub struct RomRun {
    pub scheme: RomScheme,
    pub r: usize,
    pub basis: ReducedBasis,
    pub states: Vec<RomState>,
    pub report: SolverReport,
    pub condition_numbers: [f64; 3],
}

impl RomRun {
    pub fn lifted(&self, n: usize) -> State {
        lift(&self.basis, &self.states[n])
    }
}

impl RomModel {
    pub fn train(states: &[State], ops: &HfOperators, opts: &PodOptions) -> Result<RomModel> {
        let clock = Instant::now();
        let basis = ReducedBasis::from_states(states, [&ops.gram_u, &ops.gram_p, &ops.gram_t], opts)?;
        let operators = project_operators(&basis, ops)?;
        Ok(RomModel { basis, operators, offline_seconds: clock.elapsed().as_secs_f64() })
    }

    /// Projected loads on the grid `n dt`, `n = 1..=n_steps`, at full size.
    pub fn loads(&self, spaces: &SpaceSet, forcing: &dyn Forcing, dt: f64, n_steps: usize) -> Vec<RomLoads> {
        project_load_sequence(&self.basis, spaces, forcing, dt, n_steps)
    }

    /// Runs the ROM of size `r` with time step `dt`; `loads` must come from
    /// [`RomModel::loads`] on the same grid.
    #[allow(clippy::too_many_arguments)]
    pub fn run(
        &self,
        r: usize,
        scheme: RomScheme,
        dt: f64,
        loads: &[RomLoads],
        ops: &HfOperators,
        spaces: &SpaceSet,
        initial: &dyn SpaceTimeField,
        stop: &StoppingCriterion,
    ) -> Result<RomRun> {
        let basis = self.basis.truncated(r);
        let (ru, rp, rt) = basis.ranks();
        let rom = self.operators.truncated(ru, rp, rt).with_dt(dt)?;
        let loads: Vec<RomLoads> = loads.iter().map(|l| l.truncated(ru, rp, rt)).collect();
        let x0 = project_initial_condition(&basis, ops, spaces, initial, 0.0)?;
        let (states, report) = run_rom(&rom, &loads, x0, scheme, stop)?;
        Ok(RomRun { scheme, r, basis, states, report, condition_numbers: rom.fixed_stress_condition_numbers() })
    }

    /// Median per-step online seconds over `repeats` runs (factorizations excluded).
    #[allow(clippy::too_many_arguments)]
    pub fn median_step_seconds(
        &self,
        r: usize,
        scheme: RomScheme,
        dt: f64,
        loads: &[RomLoads],
        x0: &RomState,
        stop: &StoppingCriterion,
        repeats: usize,
    ) -> Result<f64> {
        let (ru, rp, rt) = self.basis.truncated(r).ranks();
        let rom = self.operators.truncated(ru, rp, rt).with_dt(dt)?;
        let loads: Vec<RomLoads> = loads.iter().map(|l| l.truncated(ru, rp, rt)).collect();
        let x0 = RomState {
            u: x0.u[..ru].to_vec(),
            p: x0.p[..rp].to_vec(),
            theta: x0.theta[..rt].to_vec(),
            t: x0.t,
        };
        let mut samples = Vec::with_capacity(repeats.max(1));
        for _ in 0..repeats.max(1) {
            let (_, rep) = run_rom(&rom, &loads, x0.clone(), scheme, stop)?;
            samples.push(rep.solve_seconds() / rep.steps.len().max(1) as f64);
        }
        samples.sort_by(f64::total_cmp);
        Ok(samples[samples.len() / 2])
    }
}

/// Max-over-time absolute and relative errors against `exact` of several
/// trajectories on the grid `n dt`, `n = 1..=n_levels`. `states(n)` returns
/// the states of all trajectories at level `n`.
#[allow(clippy::too_many_arguments)]
pub fn score_against_exact<F>(
    disc: &Discretization,
    exact: &dyn ExactSolution,
    mode: ErrorMode,
    dt: f64,
    n_levels: usize,
    n_traj: usize,
    keep_history: bool,
    states: F,
) -> ErrorTracker
where
    F: Fn(usize) -> Vec<State> + Sync,
{
    let levels: Vec<_> = (1..=n_levels)
        .into_par_iter()
        .map(|n| {
            let t = n as f64 * dt;
            level_errors(&disc.spaces, &disc.ops, t, &states(n), exact, mode)
        })
        .collect();
    let mut tracker = ErrorTracker::new(n_traj, keep_history);
    for (k, lv) in levels.iter().enumerate() {
        tracker.push((k + 1) as f64 * dt, lv);
    }
    tracker
}

/// Max-over-time relative H1 distance of a lifted ROM run from the HF states.
pub fn rom_vs_hf(ops: &HfOperators, run: &RomRun, hf: &[State]) -> [f64; 3] {
    let lifted: Vec<State> = (0..run.states.len()).map(|n| run.lifted(n)).collect();
    super::norms::max_relative_h1(ops, &lifted, hf)
}

fn field_names() -> [&'static str; 3] {
    Field::ALL.map(|f| f.name())
}

fn error_rows(exp: &str, scheme: &str, idx: usize, abs: Option<&FieldErrors>, rel: Option<&FieldErrors>) -> Vec<ErrorRow> {
    let mut rows = Vec::new();
    for (k, field) in field_names().into_iter().enumerate() {
        let mut push = |norm: &str, value: f64| {
            rows.push(ErrorRow {
                experiment: exp.into(),
                scheme: scheme.into(),
                field: field.into(),
                norm: norm.into(),
                cycle_or_r: idx,
                value,
            })
        };
        if let Some(a) = abs {
            push("l2", a.l2[k]);
            push("h1", a.h1[k]);
        }
        if let Some(r) = rel {
            push("rel_l2", r.l2[k]);
            push("rel_h1", r.h1[k]);
        }
    }
    rows
}

fn iteration_rows(exp: &str, scheme: &str, r: usize, report: &SolverReport) -> Vec<IterationRow> {
    report
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| IterationRow {
            experiment: exp.into(),
            scheme: scheme.into(),
            r,
            time_index: k + 1,
            iterations: s.iterations,
        })
        .collect()
}

fn condition_rows(exp: &str, variant: &str, r: usize, c: [f64; 3]) -> Vec<ConditionRow> {
    ["flow", "heat", "mechanics"]
        .into_iter()
        .zip(c)
        .map(|(m, v)| ConditionRow { experiment: exp.into(), variant: variant.into(), r, matrix: m.into(), condition: v })
        .collect()
}

fn eigen_rows(basis: &ReducedBasis) -> Vec<EigenvalueRow> {
    Field::ALL
        .into_iter()
        .flat_map(|f| {
            basis
                .field(f)
                .normalized_spectrum()
                .into_iter()
                .enumerate()
                .map(move |(k, v)| EigenvalueRow { field: f.name().into(), k, nu_normalized: v })
        })
        .collect()
}

fn history_rows(exp: &str, scheme: &str, r: usize, tracker: &ErrorTracker, traj: usize) -> Vec<HistoryRow> {
    let mut rows = Vec::new();
    for (t, rel) in &tracker.history {
        for (k, field) in field_names().into_iter().enumerate() {
            for (norm, v) in [("rel_l2", rel[traj].l2[k]), ("rel_h1", rel[traj].h1[k])] {
                rows.push(HistoryRow {
                    experiment: exp.into(),
                    scheme: scheme.into(),
                    r,
                    time: *t,
                    field: field.into(),
                    norm: norm.into(),
                    value: v,
                });
            }
        }
    }
    rows
}

fn timing(exp: &str, scheme: &str, phase: &str, seconds: f64) -> TimingRow {
    TimingRow { experiment: exp.into(), scheme: scheme.into(), phase: phase.into(), seconds }
}

/// Errors and solver statistics of one scheme (HF: `r = 0`).
#[derive(Clone, Debug)]
pub struct SchemeResult {
    pub scheme: &'static str,
    pub r: usize,
    pub max_abs: FieldErrors,
    pub max_rel: FieldErrors,
    pub iterations: Vec<usize>,
    /// Mean (HF) or median-of-repeats (ROM) online seconds per step.
    pub step_seconds: f64,
    pub condition_numbers: Option<[f64; 3]>,
}

impl SchemeResult {
    pub fn average_iterations(&self) -> f64 {
        if self.iterations.is_empty() {
            0.0
        } else {
            self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct CycleResult {
    pub cycle: usize,
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub runs: Vec<SchemeResult>,
    /// Max-over-time relative H1 distance of FS-HF from M-HF.
    pub fs_vs_m: [f64; 3],
    pub eigenvalues: Vec<EigenvalueRow>,
    pub timings: Vec<TimingRow>,
}

impl CycleResult {
    pub fn run(&self, scheme: &str, r: usize) -> Option<&SchemeResult> {
        self.runs.iter().find(|s| s.scheme == scheme && s.r == r)
    }
}

/// Refinement study: `h` halves and `dt` quarters per cycle.
#[derive(Clone, Debug)]
pub struct RefinementStudy {
    pub cycles: Vec<CycleResult>,
}

const TIMING_REPEATS: usize = 5;

fn stop_hf(cfg: &ExperimentConfig) -> StoppingCriterion {
    StoppingCriterion::h1(cfg.eps, cfg.max_iter)
}

fn stop_rom(cfg: &ExperimentConfig) -> StoppingCriterion {
    StoppingCriterion::euclidean(cfg.eps, cfg.max_iter)
}

fn pod_options(cfg: &ExperimentConfig, r_max: usize) -> PodOptions {
    PodOptions { eig_floor: cfg.eig_floor, ..PodOptions::new(r_max) }
}

fn case_of(cfg: &ExperimentConfig) -> ManufacturedCase {
    ManufacturedCase::new(cfg.physics, super::example1_case().permeability, super::example1_case().conductivity)
}

impl RefinementStudy {
    /// Runs every cycle (concurrently); ROM sizes come from `cfg.ranks` and
    /// are skipped when `cfg.ranks` is empty.
    pub fn run(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let cycles = (0..cfg.cycles)
            .into_par_iter()
            .map(|c| run_cycle(cfg, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(RefinementStudy { cycles })
    }

    pub fn errors(&self, scheme: &str, r: usize) -> Vec<FieldErrors> {
        self.cycles.iter().filter_map(|c| c.run(scheme, r).map(|s| s.max_abs)).collect()
    }

    /// Observed rates between consecutive cycles.
    pub fn rates(&self, scheme: &str, r: usize) -> Vec<FieldErrors> {
        self.errors(scheme, r)
            .windows(2)
            .map(|w| {
                let mut out = FieldErrors::default();
                for k in 0..3 {
                    out.l2[k] = observed_rate(w[0].l2[k], w[1].l2[k]);
                    out.h1[k] = observed_rate(w[0].h1[k], w[1].h1[k]);
                }
                out
            })
            .collect()
    }

    pub fn bundle(&self) -> Bundle {
        let exp = "1a";
        let mut b = Bundle::default();
        for c in &self.cycles {
            for s in &c.runs {
                b.errors.extend(error_rows(exp, &scheme_tag(s.scheme, s.r), c.cycle, Some(&s.max_abs), Some(&s.max_rel)));
                if s.scheme.starts_with("FS") {
                    b.iterations.extend(s.iterations.iter().enumerate().map(|(k, &it)| IterationRow {
                        experiment: format!("{exp}/cycle{}", c.cycle),
                        scheme: s.scheme.into(),
                        r: s.r,
                        time_index: k + 1,
                        iterations: it,
                    }));
                }
                if let Some(cn) = s.condition_numbers {
                    if s.scheme == "FS-ROM" {
                        b.condition_numbers.extend(condition_rows(&format!("{exp}/cycle{}", c.cycle), "floor", s.r, cn));
                    }
                }
            }
            b.timings.extend(c.timings.iter().cloned());
        }
        if let Some(last) = self.cycles.last() {
            b.eigenvalues.extend(last.eigenvalues.iter().cloned());
            let mut keys: Vec<(&'static str, usize)> = last.runs.iter().map(|s| (s.scheme, s.r)).collect();
            keys.dedup();
            for (scheme, r) in keys {
                for (k, rate) in self.rates(scheme, r).iter().enumerate() {
                    for (f, field) in field_names().into_iter().enumerate() {
                        for (norm, v) in [("l2", rate.l2[f]), ("h1", rate.h1[f])] {
                            b.rates.push(RateRow {
                                experiment: exp.into(),
                                scheme: scheme_tag(scheme, r),
                                field: field.into(),
                                norm: norm.into(),
                                from_cycle: k,
                                to_cycle: k + 1,
                                rate: v,
                            });
                        }
                    }
                }
            }
        }
        b
    }
}

/// `FS-ROM(r=3)` style label for ROM rows, the bare scheme for HF.
pub fn scheme_tag(scheme: &str, r: usize) -> String {
    if r == 0 {
        scheme.to_string()
    } else {
        format!("{scheme}(r={r})")
    }
}

fn run_cycle(cfg: &ExperimentConfig, cycle: usize) -> Result<CycleResult> {
    let case = case_of(cfg);
    let n = cfg.mesh_n << cycle;
    let dt = cfg.dt_train / 4f64.powi(cycle as i32);
    let steps = ExperimentConfig::steps(dt, cfg.t_train);
    let disc = Discretization::manufactured(&case, n, cfg.pattern, dt)?;
    let exp = format!("1a/cycle{cycle}");
    let mut timings = Vec::new();
    let hf_stop = stop_hf(cfg);
    let mut hf_runs: Vec<(HfScheme, Trajectory, SolverReport)> = Vec::new();
    for scheme in [HfScheme::Monolithic, HfScheme::FixedStress] {
        let (traj, rep) = run_hf(&disc.problem(&case, &case), scheme, steps, &hf_stop)?;
        timings.push(timing(&exp, scheme.label(), "factorization", rep.factorization_seconds));
        timings.push(timing(&exp, scheme.label(), "online", rep.solve_seconds()));
        hf_runs.push((scheme, traj, rep));
    }
    let fs_vs_m = super::norms::max_relative_h1(&disc.ops, &hf_runs[1].1.states, &hf_runs[0].1.states);

    let r_max = cfg.max_rank();
    let mut rom_runs: Vec<(RomRun, f64)> = Vec::new();
    let mut eigenvalues = Vec::new();
    if r_max > 0 {
        for (hf_scheme, rom_scheme) in [(HfScheme::Monolithic, RomScheme::Monolithic), (HfScheme::FixedStress, RomScheme::FixedStress)] {
            let traj = &hf_runs.iter().find(|h| h.0 == hf_scheme).expect("both HF schemes ran").1;
            let model = RomModel::train(&traj.states, &disc.ops, &pod_options(cfg, r_max))?;
            timings.push(timing(&exp, rom_scheme.label(), "offline", model.offline_seconds));
            if rom_scheme == RomScheme::FixedStress {
                eigenvalues = eigen_rows(&model.basis);
            }
            let loads = model.loads(&disc.spaces, &case, dt, steps);
            for &r in &cfg.ranks {
                let run = model.run(r, rom_scheme, dt, &loads, &disc.ops, &disc.spaces, &case, &stop_rom(cfg))?;
                let x0 = run.states[0].clone();
                let step = model.median_step_seconds(r, rom_scheme, dt, &loads, &x0, &stop_rom(cfg), TIMING_REPEATS)?;
                timings.push(timing(&exp, &scheme_tag(rom_scheme.label(), r), "online", step * steps as f64));
                rom_runs.push((run, step));
            }
        }
    }

    let n_traj = 2 + rom_runs.len();
    let tracker = score_against_exact(&disc, &case, cfg.error_mode, dt, steps, n_traj, false, |lv| {
        let mut v = vec![hf_runs[0].1.states[lv].clone(), hf_runs[1].1.states[lv].clone()];
        v.extend(rom_runs.iter().map(|(r, _)| r.lifted(lv)));
        v
    });

    let mut runs = Vec::with_capacity(n_traj);
    for (k, (scheme, _, rep)) in hf_runs.iter().enumerate() {
        runs.push(SchemeResult {
            scheme: scheme.label(),
            r: 0,
            max_abs: tracker.max_abs[k],
            max_rel: tracker.max_rel[k],
            iterations: rep.steps.iter().map(|s| s.iterations).collect(),
            step_seconds: rep.mean_step_seconds(),
            condition_numbers: None,
        });
    }
    for (k, (run, step)) in rom_runs.iter().enumerate() {
        runs.push(SchemeResult {
            scheme: run.scheme.label(),
            r: run.r,
            max_abs: tracker.max_abs[k + 2],
            max_rel: tracker.max_rel[k + 2],
            iterations: run.report.steps.iter().map(|s| s.iterations).collect(),
            step_seconds: *step,
            condition_numbers: Some(run.condition_numbers),
        });
    }
    log::info!("1a cycle {cycle}: n={n} dt={dt:e} steps={steps} done");
    Ok(CycleResult { cycle, n, h: disc.spaces.mesh.h, dt, steps, runs, fs_vs_m, eigenvalues, timings })
}

/// Per-iteration fixed-stress energy against the monolithic step solution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContractionReport {
    pub steps: usize,
    pub iterations: usize,
    /// Increases above the round-off floor.
    pub violations: usize,
    /// Largest `E_{i+1} / E_i` among pairs above the floor.
    pub worst_ratio: f64,
    /// Largest increase observed below the floor, relative to the step solution energy.
    pub max_noise: f64,
}

/// Relative round-off floor of the contraction check: energies below
/// `CONTRACTION_FLOOR * |||(p, theta)|||` of the step solution are noise.
pub const CONTRACTION_FLOOR: f64 = 1e-11;

/// At every step, starting from the fixed-stress trajectory, solves the
/// monolithic step and tracks `|||(p_i - p, theta_i - theta)|||` over the
/// fixed-stress iterates.
pub fn contraction_study(
    disc: &Discretization,
    forcing: &dyn Forcing,
    initial: &dyn SpaceTimeField,
    n_steps: usize,
    stop: &StoppingCriterion,
) -> Result<ContractionReport> {
    let ops = &disc.ops;
    let mono = MonolithicSolver::new(ops)?;
    let fs = FixedStressSolver::new(ops)?;
    let mut prev = State::interpolate(&disc.spaces, initial, 0.0);
    let mut rep = ContractionReport::default();
    for n in 1..=n_steps {
        let t = n as f64 * ops.dt;
        let loads = Loads::assemble(forcing, t, &disc.spaces);
        let exact = mono.step(&prev, &loads, t)?;
        let scale = fixed_stress_energy(ops, &exact.p, &exact.theta);
        let floor = CONTRACTION_FLOOR * scale;
        let energy = |s: &State| fixed_stress_energy(ops, &sub(&s.p, &exact.p), &sub(&s.theta, &exact.theta));
        // the estimate needs the mechanics equation at both iterates, so the
        // initial guess (previous step) is not part of the sequence
        let mut last = f64::INFINITY;
        let mut local = (0usize, 0.0f64, 0.0f64, 0usize);
        let (next, _, _, _) = fs.time_step(&prev, &loads, t, stop, |_, it| {
            let e = energy(it);
            local.3 += 1;
            if e > last {
                if e > floor {
                    local.0 += 1;
                } else if scale > 0.0 {
                    local.2 = local.2.max((e - last) / scale);
                }
            }
            if last.is_finite() && last > floor && e > floor {
                local.1 = local.1.max(e / last);
            }
            last = e;
        })?;
        rep.violations += local.0;
        rep.worst_ratio = rep.worst_ratio.max(local.1);
        rep.max_noise = rep.max_noise.max(local.2);
        rep.iterations += local.3;
        rep.steps += 1;
        prev = next;
    }
    Ok(rep)
}

/// Distance between ROM and HF trajectories when the basis spans the
/// snapshots: every field keeps its numerical rank.
#[derive(Clone, Debug, PartialEq)]
pub struct ReproductionReport {
    pub ranks_m: (usize, usize, usize),
    pub ranks_fs: (usize, usize, usize),
    pub m_rom_vs_m_hf: [f64; 3],
    pub fs_rom_vs_fs_hf: [f64; 3],
}

pub fn reproduction_check(
    disc: &Discretization,
    case: &ManufacturedCase,
    n_steps: usize,
    eps: f64,
    max_iter: usize,
) -> Result<ReproductionReport> {
    let stop_h = StoppingCriterion::h1(eps, max_iter);
    let stop_r = StoppingCriterion::euclidean(eps, max_iter);
    let dt = disc.ops.dt;
    let cap = disc.spaces.free_counts();
    let r_all = cap.0.max(cap.1).max(cap.2);
    let opts = PodOptions {
        eig_floor: numerical_rank_floor(r_all, n_steps + 1),
        route: PodRoute::Spatial,
        ..PodOptions::new(r_all)
    };
    let mut out = Vec::new();
    for (hs, rs) in [(HfScheme::Monolithic, RomScheme::Monolithic), (HfScheme::FixedStress, RomScheme::FixedStress)] {
        let (traj, _) = run_hf(&disc.problem(case, case), hs, n_steps, &stop_h)?;
        let model = RomModel::train(&traj.states, &disc.ops, &opts)?;
        let loads = model.loads(&disc.spaces, case, dt, n_steps);
        let run = model.run(r_all, rs, dt, &loads, &disc.ops, &disc.spaces, case, &stop_r)?;
        out.push((model.basis.ranks(), rom_vs_hf(&disc.ops, &run, &traj.states)));
    }
    Ok(ReproductionReport { ranks_m: out[0].0, ranks_fs: out[1].0, m_rom_vs_m_hf: out[0].1, fs_rom_vs_fs_hf: out[1].1 })
}

/// Per-rank outcome of an HF-trained ROM family evaluated on one online grid.
#[derive(Clone, Debug)]
pub struct RankResult {
    pub scheme: &'static str,
    pub r: usize,
    pub ranks: (usize, usize, usize),
    /// Max-over-time errors relative to the exact solution.
    pub rel_exact: FieldErrors,
    /// Max-over-time relative H1 distance from the HF run (same grid only).
    pub rel_hf: Option<[f64; 3]>,
    pub iterations: Vec<usize>,
    pub n_unconverged: usize,
    pub condition_numbers: [f64; 3],
}

impl RankResult {
    pub fn average_iterations(&self) -> f64 {
        if self.iterations.is_empty() {
            0.0
        } else {
            self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
        }
    }
}

/// Result of experiments 1b, 1c and 1d.
#[derive(Clone, Debug)]
pub struct TimeStudy {
    pub experiment: String,
    pub hf: Vec<SchemeResult>,
    pub roms: Vec<RankResult>,
    /// Extra ROM family trained without eigenvalue floor (1c only).
    pub roms_no_floor: Vec<RankResult>,
    /// `max |Phi^T G Phi - I|` per field, FS basis.
    pub orthonormality_defect: [f64; 3],
    pub bundle: Bundle,
}

impl TimeStudy {
    pub fn rom(&self, scheme: &str, r: usize) -> Option<&RankResult> {
        self.roms.iter().find(|x| x.scheme == scheme && x.r == r)
    }

    pub fn hf(&self, scheme: &str) -> Option<&SchemeResult> {
        self.hf.iter().find(|x| x.scheme == scheme)
    }
}

struct Family<'a> {
    model: &'a RomModel,
    scheme: RomScheme,
    variant: &'static str,
}

/// Trains on `(0, t_train]` with `dt_train`, evaluates the ROMs on
/// `(0, t_online]` with `dt_online`, and compares with HF runs on both grids.
pub fn run_time_study(cfg: &ExperimentConfig) -> Result<TimeStudy> {
    cfg.validate()?;
    let exp = cfg.experiment.tag().to_string();
    let case = case_of(cfg);
    let hf_stop = stop_hf(cfg);
    let rom_stop = stop_rom(cfg);
    let train = Discretization::manufactured(&case, cfg.mesh_n, cfg.pattern, cfg.dt_train)?;
    let n_train = cfg.train_steps();
    let n_online = cfg.online_steps();
    let mut bundle = Bundle::default();

    // training runs
    let mut trained = Vec::new();
    for scheme in [HfScheme::Monolithic, HfScheme::FixedStress] {
        let (traj, rep) = run_hf(&train.problem(&case, &case), scheme, n_train, &hf_stop)?;
        bundle.timings.push(timing(&exp, scheme.label(), "train_online", rep.solve_seconds()));
        trained.push((scheme, traj, rep));
    }
    let r_max = cfg.max_rank();
    let opts = pod_options(cfg, r_max);
    let m_model = RomModel::train(&trained[0].1.states, &train.ops, &opts)?;
    let fs_model = RomModel::train(&trained[1].1.states, &train.ops, &opts)?;
    bundle.timings.push(timing(&exp, "M-ROM", "offline", m_model.offline_seconds));
    bundle.timings.push(timing(&exp, "FS-ROM", "offline", fs_model.offline_seconds));
    bundle.eigenvalues.extend(eigen_rows(&fs_model.basis));
    let orthonormality_defect = Field::ALL.map(|f| fs_model.basis.field(f).orthonormality_defect(train.ops.gram(f)));
    let no_floor = if cfg.experiment == super::config::ExperimentId::LongerInterval {
        Some(RomModel::train(&trained[1].1.states, &train.ops, &opts.without_floor())?)
    } else {
        None
    };

    // HF reference on the online interval with the training step
    let same_grid = (cfg.dt_online - cfg.dt_train).abs() < 1e-15 && (cfg.t_online - cfg.t_train).abs() < 1e-12;
    let reference: Vec<(HfScheme, Trajectory, SolverReport)> = if (cfg.t_online - cfg.t_train).abs() < 1e-12 {
        trained
    } else {
        let n_ref = ExperimentConfig::steps(cfg.dt_train, cfg.t_online);
        let mut v = Vec::new();
        for scheme in [HfScheme::Monolithic, HfScheme::FixedStress] {
            let (traj, rep) = run_hf(&train.problem(&case, &case), scheme, n_ref, &hf_stop)?;
            v.push((scheme, traj, rep));
        }
        v
    };
    let n_ref = reference[0].1.n_steps();
    let ref_tracker = score_against_exact(&train, &case, cfg.error_mode, cfg.dt_train, n_ref, 2, cfg.history, |lv| {
        reference.iter().map(|r| r.1.states[lv].clone()).collect()
    });
    let mut hf = Vec::new();
    for (k, (scheme, _, rep)) in reference.iter().enumerate() {
        hf.push(SchemeResult {
            scheme: scheme.label(),
            r: 0,
            max_abs: ref_tracker.max_abs[k],
            max_rel: ref_tracker.max_rel[k],
            iterations: rep.steps.iter().map(|s| s.iterations).collect(),
            step_seconds: rep.mean_step_seconds(),
            condition_numbers: None,
        });
        bundle.errors.extend(error_rows(&exp, scheme.label(), 0, Some(&ref_tracker.max_abs[k]), Some(&ref_tracker.max_rel[k])));
        if scheme == &HfScheme::FixedStress {
            bundle.iterations.extend(iteration_rows(&exp, scheme.label(), 0, rep));
        }
        bundle.history.extend(history_rows(&exp, scheme.label(), 0, &ref_tracker, k));
    }

    // online grid
    let online = if same_grid {
        None
    } else {
        Some(Discretization::manufactured(&case, cfg.mesh_n, cfg.pattern, cfg.dt_online)?)
    };
    let online_disc = online.as_ref().unwrap_or(&train);
    let mut families = vec![
        Family { model: &m_model, scheme: RomScheme::Monolithic, variant: "floor" },
        Family { model: &fs_model, scheme: RomScheme::FixedStress, variant: "floor" },
    ];
    if let Some(m) = no_floor.as_ref() {
        families.push(Family { model: m, scheme: RomScheme::FixedStress, variant: "no_floor" });
    }
    let mut roms = Vec::new();
    let mut roms_no_floor = Vec::new();
    for fam in &families {
        let loads = fam.model.loads(&online_disc.spaces, &case, cfg.dt_online, n_online);
        let runs = cfg
            .ranks
            .iter()
            .map(|&r| {
                fam.model.run(r, fam.scheme, cfg.dt_online, &loads, &online_disc.ops, &online_disc.spaces, &case, &rom_stop)
            })
            .collect::<Result<Vec<_>>>()?;
        let tracker = score_against_exact(
            online_disc,
            &case,
            cfg.error_mode,
            cfg.dt_online,
            n_online,
            runs.len(),
            cfg.history && fam.variant == "floor",
            |lv| runs.iter().map(|r| r.lifted(lv)).collect(),
        );
        let hf_ref = reference.iter().find(|h| h.0.label().starts_with(&fam.scheme.label()[..2]));
        for (k, run) in runs.iter().enumerate() {
            let rel_hf = match (same_grid || cfg.dt_online == cfg.dt_train, hf_ref) {
                (true, Some(h)) if h.1.states.len() == run.states.len() => Some(rom_vs_hf(&online_disc.ops, run, &h.1.states)),
                _ => None,
            };
            let tag = scheme_tag(run.scheme.label(), run.r);
            let label = if fam.variant == "floor" { tag.clone() } else { format!("{tag}[{}]", fam.variant) };
            if fam.variant == "floor" {
                bundle.errors.extend(error_rows(&exp, run.scheme.label(), run.r, Some(&tracker.max_abs[k]), Some(&tracker.max_rel[k])));
                if let Some(d) = rel_hf {
                    for (f, field) in field_names().into_iter().enumerate() {
                        bundle.errors.push(ErrorRow {
                            experiment: exp.clone(),
                            scheme: run.scheme.label().into(),
                            field: field.into(),
                            norm: "rel_h1_vs_hf".into(),
                            cycle_or_r: run.r,
                            value: d[f],
                        });
                    }
                }
                bundle.history.extend(history_rows(&exp, run.scheme.label(), run.r, &tracker, k));
            }
            if run.scheme == RomScheme::FixedStress {
                bundle.iterations.extend(iteration_rows(&exp, &label, run.r, &run.report));
                bundle.condition_numbers.extend(condition_rows(&exp, fam.variant, run.r, run.condition_numbers));
            }
            bundle.timings.push(timing(&exp, &label, "online", run.report.solve_seconds()));
            let res = RankResult {
                scheme: run.scheme.label(),
                r: run.r,
                ranks: run.basis.ranks(),
                rel_exact: tracker.max_rel[k],
                rel_hf,
                iterations: run.report.steps.iter().map(|s| s.iterations).collect(),
                n_unconverged: run.report.n_unconverged(),
                condition_numbers: run.condition_numbers,
            };
            if fam.variant == "floor" {
                roms.push(res);
            } else {
                roms_no_floor.push(res);
            }
        }
    }
    Ok(TimeStudy { experiment: exp, hf, roms, roms_no_floor, orthonormality_defect, bundle })
}
