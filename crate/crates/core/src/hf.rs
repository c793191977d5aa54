//! Time stepping of the high-fidelity schemes: the monolithic block solve and
//! the fixed-stress iteration (flow, heat, then mechanics).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_loads, HfOperators, PhysicalParams};
use crate::error::{Error, Result};
use crate::linalg::{factorize, gram_norm, sub, CsrMatrix, Factorization};
use crate::mesh::{Field, SpaceSet};
use crate::problem::{Forcing, SpaceTimeField};

/// Free-dof coefficients of the three fields at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn zeros(sizes: (usize, usize, usize), t: f64) -> Self {
        State {
            u: vec![0.0; sizes.0],
            p: vec![0.0; sizes.1],
            theta: vec![0.0; sizes.2],
            t,
        }
    }

    /// Vertex interpolant of `data` at time `t`.
    pub fn interpolate(spaces: &SpaceSet, data: &dyn SpaceTimeField, t: f64) -> Self {
        let mesh = &spaces.mesh;
        let at = |s: &crate::mesh::FieldSpace, pick: &dyn Fn(&crate::problem::FieldValues, usize) -> f64| {
            (0..s.n_free())
                .map(|i| {
                    let (v, c) = s.free_dof_location(i);
                    let [x, y] = mesh.vertices[v];
                    pick(&data.eval_exact(x, y, t), c)
                })
                .collect::<Vec<_>>()
        };
        State {
            u: at(&spaces.u, &|f, c| f.u[c]),
            p: at(&spaces.p, &|f, _| f.p),
            theta: at(&spaces.theta, &|f, _| f.theta),
            t,
        }
    }

    pub fn field(&self, field: Field) -> &[f64] {
        match field {
            Field::Displacement => &self.u,
            Field::Pressure => &self.p,
            Field::Temperature => &self.theta,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.u.len(), self.p.len(), self.theta.len())
    }
}

/// States at `t_n = n dt`, `n = 0..=N`.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub dt: f64,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn final_time(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementNorm {
    /// `sqrt(x^T G x)` with the field's H1 Gram matrix.
    H1,
    Euclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingCriterion {
    pub eps: f64,
    pub max_iter: usize,
    pub norm: IncrementNorm,
}

impl StoppingCriterion {
    pub fn h1(eps: f64, max_iter: usize) -> Self {
        StoppingCriterion {
            eps,
            max_iter,
            norm: IncrementNorm::H1,
        }
    }

    pub fn euclidean(eps: f64, max_iter: usize) -> Self {
        StoppingCriterion {
            eps,
            max_iter,
            norm: IncrementNorm::Euclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("tolerance must be positive, got {}", self.eps),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "need at least one iteration".into(),
            });
        }
        Ok(())
    }
}

/// One time step of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub iterations: usize,
    /// Largest relative increment over the three fields at the last iteration.
    pub increment: f64,
    pub converged: bool,
    /// Wall-clock of the solve phase (loads and factorizations excluded).
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SolverReport {
    pub steps: Vec<StepRecord>,
    pub factorization_seconds: f64,
    pub total_seconds: f64,
}

impl SolverReport {
    pub fn average_iterations(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.iterations as f64).sum::<f64>() / self.steps.len() as f64
    }

    pub fn max_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).max().unwrap_or(0)
    }

    pub fn n_unconverged(&self) -> usize {
        self.steps.iter().filter(|s| !s.converged).count()
    }

    pub fn solve_seconds(&self) -> f64 {
        self.steps.iter().map(|s| s.seconds).sum()
    }

    pub fn mean_step_seconds(&self) -> f64 {
        if self.steps.is_empty() {
            0.0
        } else {
            self.solve_seconds() / self.steps.len() as f64
        }
    }
}

/// Margins of the sufficient conditions for fixed-stress convergence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionReport {
    /// `c0 > 3 alpha_m` and `C_d > 3 alpha_m theta0`.
    pub storage_ok: bool,
    pub c0_margin: f64,
    pub c_d_margin: f64,
    /// `L >= 2 delta`.
    pub stabilization_ok: bool,
    pub l_margin: f64,
}

pub fn check_assumptions(params: &PhysicalParams, delta: f64) -> AssumptionReport {
    let c0_margin = params.c0 - 3.0 * params.alpha_m;
    let c_d_margin = params.c_d - 3.0 * params.alpha_m * params.theta0;
    let l_margin = params.l_stab - 2.0 * delta;
    let report = AssumptionReport {
        storage_ok: c0_margin > 0.0 && c_d_margin > 0.0,
        c0_margin,
        c_d_margin,
        stabilization_ok: l_margin >= 0.0,
        l_margin,
    };
    if !report.storage_ok {
        log::warn!(
            "storage assumption violated: c0 - 3 alpha_m = {c0_margin:e}, C_d - 3 alpha_m theta0 = {c_d_margin:e}"
        );
    }
    if !report.stabilization_ok {
        log::warn!("stabilization L = {} is below 2 delta = {}", params.l_stab, 2.0 * delta);
    }
    report
}

/// Load vectors `(F, G, H)` at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct Loads {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl Loads {
    pub fn assemble(forcing: &dyn Forcing, t: f64, spaces: &SpaceSet) -> Self {
        let (f, g, h) = assemble_loads(forcing, t, spaces);
        Loads { f, g, h }
    }

    pub fn zeros(sizes: (usize, usize, usize)) -> Self {
        Loads {
            f: vec![0.0; sizes.0],
            g: vec![0.0; sizes.1],
            h: vec![0.0; sizes.2],
        }
    }
}


/// Monolithic scheme with its block matrix factorized once.
pub struct MonolithicSolver<'a> {
    ops: &'a HfOperators,
    sizes: (usize, usize, usize),
    factorization: Factorization,
}

impl<'a> MonolithicSolver<'a> {
    pub fn new(ops: &'a HfOperators) -> Result<Self> {
        let a = Self::block_matrix(ops)?;
        let factorization = factorize(&a)?;
        Ok(MonolithicSolver {
            ops,
            sizes: (ops.auu.nrows(), ops.app.nrows(), ops.att.nrows()),
            factorization,
        })
    }

    /// `[AUU AUP AUT; MPU MPP+APP MPT; MTU MTP MTT+ATT]`.
    pub fn block_matrix(ops: &HfOperators) -> Result<CsrMatrix> {
        let pp = CsrMatrix::linear_combination(&[(1.0, &ops.mpp), (1.0, &ops.app)])?;
        let tt = CsrMatrix::linear_combination(&[(1.0, &ops.mtt), (1.0, &ops.att)])?;
        CsrMatrix::block(&[
            vec![Some(&ops.auu), Some(&ops.aup), Some(&ops.aut)],
            vec![Some(&ops.mpu), Some(&pp), Some(&ops.mpt)],
            vec![Some(&ops.mtu), Some(&ops.mtp), Some(&tt)],
        ])
    }

    pub fn rhs(&self, prev: &State, loads: &Loads) -> Vec<f64> {
        let o = self.ops;
        let (nu, np, _) = self.sizes;
        let mut b = Vec::with_capacity(nu + np + self.sizes.2);
        b.extend_from_slice(&loads.f);
        let mut g = loads.g.clone();
        o.mpu.mul_vec_add(1.0, &prev.u, &mut g);
        o.mpp.mul_vec_add(1.0, &prev.p, &mut g);
        o.mpt.mul_vec_add(1.0, &prev.theta, &mut g);
        let mut h = loads.h.clone();
        o.mtu.mul_vec_add(1.0, &prev.u, &mut h);
        o.mtp.mul_vec_add(1.0, &prev.p, &mut h);
        o.mtt.mul_vec_add(1.0, &prev.theta, &mut h);
        b.extend(g);
        b.extend(h);
        b
    }

    pub fn step(&self, prev: &State, loads: &Loads, t_next: f64) -> Result<State> {
        let x = self.factorization.solve(&self.rhs(prev, loads))?;
        let (nu, np, _) = self.sizes;
        Ok(State {
            u: x[..nu].to_vec(),
            p: x[nu..nu + np].to_vec(),
            theta: x[nu + np..].to_vec(),
            t: t_next,
        })
    }
}

/// Fixed-stress scheme with its three left-hand matrices factorized once.
pub struct FixedStressSolver<'a> {
    ops: &'a HfOperators,
    flow: Factorization,
    heat: Factorization,
    mech: Factorization,
}

impl<'a> FixedStressSolver<'a> {
    pub fn new(ops: &'a HfOperators) -> Result<Self> {
        let flow = CsrMatrix::linear_combination(&[(1.0, &ops.mpp), (1.0, &ops.app), (1.0, &ops.spp)])?;
        let heat = CsrMatrix::linear_combination(&[(1.0, &ops.mtt), (1.0, &ops.att), (1.0, &ops.stt)])?;
        Ok(FixedStressSolver {
            ops,
            flow: factorize(&flow)?,
            heat: factorize(&heat)?,
            mech: factorize(&ops.auu)?,
        })
    }

    /// Step 1: `(MPP+APP+SPP) p = G + MPP p^n + SPP p^i - MPU (u^i - u^n) - MPT (theta^i - theta^n)`.
    pub fn flow_step(&self, iter: &State, prev: &State, g: &[f64]) -> Result<Vec<f64>> {
        let o = self.ops;
        let mut b = g.to_vec();
        o.mpp.mul_vec_add(1.0, &prev.p, &mut b);
        o.spp.mul_vec_add(1.0, &iter.p, &mut b);
        o.mpu.mul_vec_add(-1.0, &sub(&iter.u, &prev.u), &mut b);
        o.mpt.mul_vec_add(-1.0, &sub(&iter.theta, &prev.theta), &mut b);
        self.flow.solve(&b)
    }

    /// Step 2: `(MTT+ATT+STT) theta = H + MTT theta^n + STT theta^i - MTU (u^i - u^n) - MTP (p^i - p^n)`.
    pub fn heat_step(&self, iter: &State, prev: &State, h: &[f64]) -> Result<Vec<f64>> {
        let o = self.ops;
        let mut b = h.to_vec();
        o.mtt.mul_vec_add(1.0, &prev.theta, &mut b);
        o.stt.mul_vec_add(1.0, &iter.theta, &mut b);
        o.mtu.mul_vec_add(-1.0, &sub(&iter.u, &prev.u), &mut b);
        o.mtp.mul_vec_add(-1.0, &sub(&iter.p, &prev.p), &mut b);
        self.heat.solve(&b)
    }

    /// Step 3: `AUU u = F - AUP p - AUT theta` with the updated `p`, `theta`.
    pub fn mech_step(&self, p: &[f64], theta: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let o = self.ops;
        let mut b = f.to_vec();
        o.aup.mul_vec_add(-1.0, p, &mut b);
        o.aut.mul_vec_add(-1.0, theta, &mut b);
        self.mech.solve(&b)
    }

    /// One sweep of Steps 1-3 from iterate `iter`.
    pub fn sweep(&self, iter: &State, prev: &State, loads: &Loads) -> Result<State> {
        let p = self.flow_step(iter, prev, &loads.g)?;
        let theta = self.heat_step(iter, prev, &loads.h)?;
        let u = self.mech_step(&p, &theta, &loads.f)?;
        Ok(State { u, p, theta, t: iter.t })
    }

    /// Iterates from `prev` until the relative H1 increments of all fields
    /// drop below `eps`, calling `observe(i, iterate)` after each sweep.
    pub fn time_step(
        &self,
        prev: &State,
        loads: &Loads,
        t_next: f64,
        stop: &StoppingCriterion,
        mut observe: impl FnMut(usize, &State),
    ) -> Result<(State, usize, f64, bool)> {
        let mut iter = prev.clone();
        iter.t = t_next;
        let mut increment = f64::INFINITY;
        for i in 1..=stop.max_iter {
            let next = self.sweep(&iter, prev, loads)?;
            observe(i, &next);
            let (inc, done) = relative_increments(&next, &iter, stop, Some(self.ops));
            increment = inc;
            iter = next;
            if done {
                return Ok((iter, i, increment, true));
            }
        }
        Ok((iter, stop.max_iter, increment, false))
    }
}

/// Largest relative increment over the fields and whether every field meets
/// `|new - old| <= eps |new|`.
pub fn relative_increments(
    new: &State,
    old: &State,
    stop: &StoppingCriterion,
    ops: Option<&HfOperators>,
) -> (f64, bool) {
    let mut worst: f64 = 0.0;
    let mut all = true;
    for field in Field::ALL {
        let d = sub(new.field(field), old.field(field));
        let (dn, nn) = match (stop.norm, ops) {
            (IncrementNorm::H1, Some(o)) => {
                let g = o.gram(field);
                (gram_norm(g, &d), gram_norm(g, new.field(field)))
            }
            _ => (crate::linalg::norm2(&d), crate::linalg::norm2(new.field(field))),
        };
        if dn > stop.eps * nn {
            all = false;
        }
        let rel = if nn > 0.0 { dn / nn } else if dn > 0.0 { f64::INFINITY } else { 0.0 };
        worst = worst.max(rel);
    }
    (worst, all)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HfScheme {
    Monolithic,
    FixedStress,
}

impl HfScheme {
    pub fn label(self) -> &'static str {
        match self {
            HfScheme::Monolithic => "M-HF",
            HfScheme::FixedStress => "FS-HF",
        }
    }
}

/// Everything a high-fidelity run needs besides the scheme choice.
#[derive(Clone, Copy)]
pub struct HfProblem<'a> {
    pub spaces: &'a SpaceSet,
    pub ops: &'a HfOperators,
    pub forcing: &'a dyn Forcing,
    pub initial: &'a dyn SpaceTimeField,
}

/// Runs `n_steps` steps of size `ops.dt` from the interpolated initial data.
pub fn run_hf(
    problem: &HfProblem<'_>,
    scheme: HfScheme,
    n_steps: usize,
    stop: &StoppingCriterion,
) -> Result<(Trajectory, SolverReport)> {
    stop.validate()?;
    let ops = problem.ops;
    let dt = ops.dt;
    check_assumptions(&ops.params, 0.5);
    let start = Instant::now();
    let mut report = SolverReport::default();
    let t0 = Instant::now();
    let mono = match scheme {
        HfScheme::Monolithic => Some(MonolithicSolver::new(ops)?),
        HfScheme::FixedStress => None,
    };
    let fs = match scheme {
        HfScheme::FixedStress => Some(FixedStressSolver::new(ops)?),
        HfScheme::Monolithic => None,
    };
    report.factorization_seconds = t0.elapsed().as_secs_f64();

    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(State::interpolate(problem.spaces, problem.initial, 0.0));
    for n in 1..=n_steps {
        let t = n as f64 * dt;
        let loads = Loads::assemble(problem.forcing, t, problem.spaces);
        let prev = states.last().expect("initial state");
        let clock = Instant::now();
        let (next, record) = match (&mono, &fs) {
            (Some(m), _) => {
                let s = m.step(prev, &loads, t)?;
                (s, (1, 0.0, true))
            }
            (_, Some(f)) => {
                let (s, it, inc, ok) = f.time_step(prev, &loads, t, stop, |_, _| {})?;
                (s, (it, inc, ok))
            }
            _ => unreachable!(),
        };
        let seconds = clock.elapsed().as_secs_f64();
        if !record.2 {
            log::warn!(
                "{}: step {n} not converged after {} iterations (increment {:e})",
                scheme.label(),
                record.0,
                record.1
            );
        }
        log::debug!("{} step {n} t={t:.6} iterations={} increment={:e}", scheme.label(), record.0, record.1);
        report.steps.push(StepRecord {
            iterations: record.0,
            increment: record.1,
            converged: record.2,
            seconds,
        });
        states.push(next);
    }
    report.total_seconds = start.elapsed().as_secs_f64();
    Ok((Trajectory { states, dt }, report))
}

/// `|||(w, s)|||^2 = (3 alpha_m + L alpha^2/K_dr) |w|^2 + (3 alpha_m + 9 L alpha_T^2 K_dr) |s|^2`
/// with L2 norms through the unit mass matrices.
pub fn fixed_stress_energy(ops: &HfOperators, e_p: &[f64], e_theta: &[f64]) -> f64 {
    let pr = &ops.params;
    let kdr = pr.k_dr();
    let wp = 3.0 * pr.alpha_m + pr.l_stab * pr.alpha * pr.alpha / kdr;
    let wt = 3.0 * pr.alpha_m + 9.0 * pr.l_stab * pr.alpha_t * pr.alpha_t * kdr;
    (wp * ops.mass_p.bilinear(e_p, e_p) + wt * ops.mass_t.bilinear(e_theta, e_theta))
        .max(0.0)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::CoefficientField;
    use crate::mesh::{build_spaces, build_unit_square_mesh, BcSpec};
    use crate::problem::{FieldValues, Zero};

    fn ex1() -> PhysicalParams {
        PhysicalParams {
            lambda: 100.0,
            mu: 100.0,
            c0: 1.0,
            alpha: 1.0,
            alpha_t: 1e-3,
            alpha_m: 1e-5,
            c_d: 1.0,
            theta0: 1.0,
            l_stab: 1.0,
        }
    }

    struct Bump;

    impl SpaceTimeField for Bump {
        fn eval_exact(&self, x: f64, y: f64, _t: f64) -> FieldValues {
            let b = x * y * (1.0 - x) * (1.0 - y);
            FieldValues {
                u: [b * (x - 0.3), -b * y],
                p: b * (1.0 + x),
                theta: b * (2.0 - y),
            }
        }
    }

    impl Forcing for Bump {
        fn eval_forcing(&self, x: f64, y: f64, t: f64) -> FieldValues {
            let mut v = self.eval_exact(x, y, t);
            v.u[0] *= 1e3 * (1.0 + t);
            v.p *= 2.0;
            v
        }
    }

    fn setup(n: usize, dt: f64) -> (SpaceSet, HfOperators) {
        let mesh = build_unit_square_mesh(n, None).unwrap();
        let s = build_spaces(&mesh, BcSpec::all_dirichlet());
        let ops = HfOperators::assemble(&ex1(), &CoefficientField::uniform(1e-5, 1e-5), &s, dt).unwrap();
        (s, ops)
    }

    #[test]
    fn assumptions() {
        let r = check_assumptions(&ex1(), 0.5);
        assert!(r.storage_ok && r.stabilization_ok);
        assert_eq!(r.l_margin, 0.0);
        let mut p = ex1();
        p.c0 = 3.0 * p.alpha_m;
        assert!(!check_assumptions(&p, 0.5).storage_ok);
    }

    #[test]
    fn zero_problem_stays_zero() {
        let (s, ops) = setup(4, 0.01);
        let prob = HfProblem { spaces: &s, ops: &ops, forcing: &Zero, initial: &Zero };
        for scheme in [HfScheme::Monolithic, HfScheme::FixedStress] {
            let (traj, rep) = run_hf(&prob, scheme, 3, &StoppingCriterion::h1(1e-10, 20)).unwrap();
            assert_eq!(traj.states.len(), 4);
            assert!(traj.states.iter().all(|st| st.u.iter().chain(&st.p).chain(&st.theta).all(|&v| v == 0.0)));
            assert!(rep.steps.iter().all(|r| r.iterations == 1 && r.converged));
        }
    }

    #[test]
    fn single_step_trajectory_has_two_states() {
        let (s, ops) = setup(2, 0.5);
        let prob = HfProblem { spaces: &s, ops: &ops, forcing: &Zero, initial: &Bump };
        let (traj, _) = run_hf(&prob, HfScheme::Monolithic, 1, &StoppingCriterion::h1(1e-10, 20)).unwrap();
        assert_eq!(traj.states.len(), 2);
        assert!((traj.final_time() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monolithic_matches_dense_oracle() {
        let (s, ops) = setup(4, 0.01);
        let mono = MonolithicSolver::new(&ops).unwrap();
        let prev = State::interpolate(&s, &Bump, 0.0);
        let loads = Loads::assemble(&Bump, 0.01, &s);
        let x = mono.step(&prev, &loads, 0.01).unwrap();
        let a = MonolithicSolver::block_matrix(&ops).unwrap().to_dense();
        let b = nalgebra::DVector::from_vec(mono.rhs(&prev, &loads));
        let want = a.lu().solve(&b).unwrap();
        let got: Vec<f64> = x.u.iter().chain(&x.p).chain(&x.theta).copied().collect();
        let scale = want.amax();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn monolithic_solution_is_a_fixed_stress_fixed_point() {
        let (s, ops) = setup(4, 0.01);
        let mono = MonolithicSolver::new(&ops).unwrap();
        let fs = FixedStressSolver::new(&ops).unwrap();
        let prev = State::interpolate(&s, &Bump, 0.0);
        let loads = Loads::assemble(&Bump, 0.01, &s);
        let x = mono.step(&prev, &loads, 0.01).unwrap();
        let y = fs.sweep(&x, &prev, &loads).unwrap();
        for f in Field::ALL {
            let d = crate::linalg::norm2(&sub(x.field(f), y.field(f)));
            let n = crate::linalg::norm2(x.field(f));
            assert!(d <= 1e-10 * n, "{f}: {d:e} vs {n:e}");
        }
    }

    #[test]
    fn fixed_stress_converges_to_monolithic_and_contracts() {
        let (s, ops) = setup(4, 0.01);
        let mono = MonolithicSolver::new(&ops).unwrap();
        let fs = FixedStressSolver::new(&ops).unwrap();
        let prev = State::interpolate(&s, &Bump, 0.0);
        let loads = Loads::assemble(&Bump, 0.01, &s);
        let x = mono.step(&prev, &loads, 0.01).unwrap();
        let mut energies = Vec::new();
        let (y, its, _, ok) = fs
            .time_step(&prev, &loads, 0.01, &StoppingCriterion::h1(1e-10, 50), |_, it| {
                energies.push(fixed_stress_energy(&ops, &sub(&it.p, &x.p), &sub(&it.theta, &x.theta)));
            })
            .unwrap();
        assert!(ok && its > 1);
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] || w[1] < 1e-12 * energies[0]);
        }
        for f in Field::ALL {
            let d = gram_norm(ops.gram(f), &sub(x.field(f), y.field(f)));
            assert!(d <= 1e-8 * gram_norm(ops.gram(f), x.field(f)));
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let (s, ops) = setup(4, 0.02);
        let prob = HfProblem { spaces: &s, ops: &ops, forcing: &Bump, initial: &Bump };
        let stop = StoppingCriterion::h1(1e-10, 20);
        let (a, _) = run_hf(&prob, HfScheme::FixedStress, 5, &stop).unwrap();
        let (b, _) = run_hf(&prob, HfScheme::FixedStress, 5, &stop).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn looser_tolerance_never_needs_more_iterations() {
        let (s, ops) = setup(4, 0.02);
        let prob = HfProblem { spaces: &s, ops: &ops, forcing: &Bump, initial: &Bump };
        let (_, tight) = run_hf(&prob, HfScheme::FixedStress, 5, &StoppingCriterion::h1(1e-10, 20)).unwrap();
        let (_, loose) = run_hf(&prob, HfScheme::FixedStress, 5, &StoppingCriterion::h1(1e-6, 20)).unwrap();
        for (a, b) in tight.steps.iter().zip(&loose.steps) {
            assert!(b.iterations <= a.iterations);
        }
    }
}
