//! Galerkin reduced order models: projected operators, affine parameter
//! families, and the monolithic and fixed-stress online solvers.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{FormId, HfOperators};
use crate::error::{Error, Result};
use crate::hf::{Loads, SolverReport, State, StepRecord, StoppingCriterion};
use crate::linalg::{condition_number_2, CsrMatrix};
use crate::mesh::{Field, SpaceSet};
use crate::pod::ReducedBasis;
use crate::problem::{Forcing, SpaceTimeField};

/// The thirteen reduced operators of the schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum RomOp {
    AUU,
    APP,
    ATT,
    AUP,
    AUT,
    MPP,
    MTT,
    MPU,
    MPT,
    MTU,
    MTP,
    SPP,
    STT,
}

impl RomOp {
    pub const ALL: [RomOp; 13] = [
        RomOp::AUU,
        RomOp::APP,
        RomOp::ATT,
        RomOp::AUP,
        RomOp::AUT,
        RomOp::MPP,
        RomOp::MTT,
        RomOp::MPU,
        RomOp::MPT,
        RomOp::MTU,
        RomOp::MTP,
        RomOp::SPP,
        RomOp::STT,
    ];

    pub fn form(self) -> FormId {
        match self {
            RomOp::AUU => FormId::AUU,
            RomOp::APP => FormId::APP,
            RomOp::ATT => FormId::ATT,
            RomOp::AUP => FormId::AUP,
            RomOp::AUT => FormId::AUT,
            RomOp::MPP => FormId::MPP,
            RomOp::MTT => FormId::MTT,
            RomOp::MPU => FormId::MPU,
            RomOp::MPT => FormId::MPT,
            RomOp::MTU => FormId::MTU,
            RomOp::MTP => FormId::MTP,
            RomOp::SPP => FormId::SPP,
            RomOp::STT => FormId::STT,
        }
    }

    pub fn name(self) -> &'static str {
        self.form().name()
    }

    pub fn from_name(name: &str) -> Option<RomOp> {
        RomOp::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn is_time_scaled(self) -> bool {
        self.form().is_time_scaled()
    }
}

/// Projected load vectors at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct RomLoads {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl RomLoads {
    /// Loads of the leading modes (projection is column-wise, so this is a prefix).
    pub fn truncated(&self, ru: usize, rp: usize, rt: usize) -> RomLoads {
        RomLoads {
            f: self.f[..ru.min(self.f.len())].to_vec(),
            g: self.g[..rp.min(self.g.len())].to_vec(),
            h: self.h[..rt.min(self.h.len())].to_vec(),
        }
    }
}

/// Reduced operators for one parameter value and time step.
#[derive(Clone, Debug)]
pub struct RomOperators {
    pub dt: f64,
    pub ranks: (usize, usize, usize),
    pub matrices: BTreeMap<RomOp, DMatrix<f64>>,
}

fn dense_mul_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}

fn project_vec(phi: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (phi.transpose() * DVector::from_column_slice(v)).as_slice().to_vec()
}

impl RomOperators {
    pub fn get(&self, op: RomOp) -> &DMatrix<f64> {
        &self.matrices[&op]
    }

    /// Same operators for another time step: the `1/dt` forms are rescaled.
    pub fn with_dt(&self, dt: f64) -> Result<RomOperators> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") });
        }
        let ratio = self.dt / dt;
        let matrices = self
            .matrices
            .iter()
            .map(|(&op, m)| (op, if op.is_time_scaled() { m * ratio } else { m.clone() }))
            .collect();
        Ok(RomOperators { dt, ranks: self.ranks, matrices })
    }

    /// Operators of the leading `(ru, rp, rt)` modes of the same basis.
    pub fn truncated(&self, ru: usize, rp: usize, rt: usize) -> RomOperators {
        let size = |f: Field| match f {
            Field::Displacement => ru.min(self.ranks.0),
            Field::Pressure => rp.min(self.ranks.1),
            Field::Temperature => rt.min(self.ranks.2),
        };
        let matrices = self
            .matrices
            .iter()
            .map(|(&op, m)| {
                let (a, b) = op.form().fields();
                (op, m.view((0, 0), (size(a), size(b))).into_owned())
            })
            .collect();
        RomOperators { dt: self.dt, ranks: (size(Field::Displacement), size(Field::Pressure), size(Field::Temperature)), matrices }
    }

    /// 2-norm condition numbers of the fixed-stress left-hand matrices
    /// `(flow, heat, mechanics)`.
    pub fn fixed_stress_condition_numbers(&self) -> [f64; 3] {
        let [flow, heat, mech] = self.fixed_stress_matrices();
        [condition_number_2(&flow), condition_number_2(&heat), condition_number_2(&mech)]
    }

    fn fixed_stress_matrices(&self) -> [DMatrix<f64>; 3] {
        let g = |op| self.get(op);
        [
            g(RomOp::MPP) + g(RomOp::APP) + g(RomOp::SPP),
            g(RomOp::MTT) + g(RomOp::ATT) + g(RomOp::STT),
            g(RomOp::AUU).clone(),
        ]
    }

    pub fn monolithic_matrix(&self) -> DMatrix<f64> {
        let (ru, rp, rt) = self.ranks;
        let n = ru + rp + rt;
        let mut a = DMatrix::zeros(n, n);
        let g = |op| self.get(op);
        let place = |a: &mut DMatrix<f64>, r0, c0, m: &DMatrix<f64>| {
            a.view_mut((r0, c0), (m.nrows(), m.ncols())).copy_from(m);
        };
        place(&mut a, 0, 0, g(RomOp::AUU));
        place(&mut a, 0, ru, g(RomOp::AUP));
        place(&mut a, 0, ru + rp, g(RomOp::AUT));
        place(&mut a, ru, 0, g(RomOp::MPU));
        place(&mut a, ru, ru, &(g(RomOp::MPP) + g(RomOp::APP)));
        place(&mut a, ru, ru + rp, g(RomOp::MPT));
        place(&mut a, ru + rp, 0, g(RomOp::MTU));
        place(&mut a, ru + rp, ru, g(RomOp::MTP));
        place(&mut a, ru + rp, ru + rp, &(g(RomOp::MTT) + g(RomOp::ATT)));
        a
    }
}

/// `Phi_test^T A Phi_trial` for every operator.
pub fn project_operators(basis: &ReducedBasis, hf: &HfOperators) -> Result<RomOperators> {
    for f in Field::ALL {
        let b = basis.field(f);
        let n = hf.gram(f).nrows();
        if b.n_dofs() != n {
            return Err(Error::DimensionMismatch { context: "basis vs operators", expected: n, got: b.n_dofs() });
        }
    }
    let matrices = RomOp::ALL
        .into_iter()
        .map(|op| {
            let (a, b) = op.form().fields();
            let m = hf.get(op.form()).congruence(&basis.field(a).modes, &basis.field(b).modes);
            (op, m)
        })
        .collect();
    Ok(RomOperators { dt: hf.dt, ranks: basis.ranks(), matrices })
}

pub fn project_loads(basis: &ReducedBasis, loads: &Loads) -> RomLoads {
    RomLoads {
        f: project_vec(&basis.u.modes, &loads.f),
        g: project_vec(&basis.p.modes, &loads.g),
        h: project_vec(&basis.theta.modes, &loads.h),
    }
}

/// Projected loads at `t_n = n dt`, `n = 1..=n_steps`; entry `n - 1` belongs to step `n`.
pub fn project_load_sequence(
    basis: &ReducedBasis,
    spaces: &SpaceSet,
    forcing: &dyn Forcing,
    dt: f64,
    n_steps: usize,
) -> Vec<RomLoads> {
    if forcing.is_zero() {
        let (ru, rp, rt) = basis.ranks();
        return vec![RomLoads { f: vec![0.0; ru], g: vec![0.0; rp], h: vec![0.0; rt] }; n_steps];
    }
    use rayon::prelude::*;
    (1..=n_steps)
        .into_par_iter()
        .map(|n| project_loads(basis, &Loads::assemble(forcing, n as f64 * dt, spaces)))
        .collect()
}

/// Coefficients of one reduced state.
#[derive(Clone, Debug, PartialEq)]
pub struct RomState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub t: f64,
}

impl RomState {
    pub fn zeros(ranks: (usize, usize, usize), t: f64) -> Self {
        RomState { u: vec![0.0; ranks.0], p: vec![0.0; ranks.1], theta: vec![0.0; ranks.2], t }
    }

    pub fn field(&self, f: Field) -> &[f64] {
        match f {
            Field::Displacement => &self.u,
            Field::Pressure => &self.p,
            Field::Temperature => &self.theta,
        }
    }

    fn as_hf_like(&self) -> State {
        State { u: self.u.clone(), p: self.p.clone(), theta: self.theta.clone(), t: self.t }
    }
}

/// Per field, solves `(Phi^T M Phi) x = Phi^T M v` for the unit L2 mass matrix `M`.
pub fn project_state_l2(basis: &ReducedBasis, hf: &HfOperators, state: &State) -> Result<RomState> {
    let mut out = Vec::with_capacity(3);
    for f in Field::ALL {
        let phi = &basis.field(f).modes;
        let m = hf.mass(f);
        let lhs = m.congruence(phi, phi);
        let rhs = phi.transpose() * DVector::from_vec(m.mul_vec(state.field(f)));
        let x = lhs.clone().cholesky().map(|c| c.solve(&rhs)).ok_or(Error::SingularReduced {
            context: "reduced L2 mass",
            condition: condition_number_2(&lhs),
        })?;
        out.push(x.as_slice().to_vec());
    }
    let mut it = out.into_iter();
    Ok(RomState { u: it.next().unwrap(), p: it.next().unwrap(), theta: it.next().unwrap(), t: state.t })
}

/// L2 projection of the vertex interpolant of `data` at time `t`.
pub fn project_initial_condition(
    basis: &ReducedBasis,
    hf: &HfOperators,
    spaces: &SpaceSet,
    data: &dyn SpaceTimeField,
    t: f64,
) -> Result<RomState> {
    project_state_l2(basis, hf, &State::interpolate(spaces, data, t))
}

/// Lifts reduced coefficients to the HF free dofs.
pub fn lift(basis: &ReducedBasis, x: &RomState) -> State {
    State {
        u: basis.u.lift(&x.u),
        p: basis.p.lift(&x.p),
        theta: basis.theta.lift(&x.theta),
        t: x.t,
    }
}

fn lu_solve(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, b: Vec<f64>, context: &'static str) -> Result<Vec<f64>> {
    lu.solve(&DVector::from_vec(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or(Error::SingularReduced { context, condition: f64::INFINITY })
}

fn axpy_mat(y: &mut [f64], c: f64, a: &DMatrix<f64>, x: &[f64]) {
    if a.ncols() == 0 {
        return;
    }
    let v = dense_mul_vec(a, x);
    for (yi, vi) in y.iter_mut().zip(v) {
        *yi += c * vi;
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Monolithic reduced scheme with the `3r x 3r` block matrix factorized once.
pub struct MonolithicRom<'a> {
    ops: &'a RomOperators,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> MonolithicRom<'a> {
    pub fn new(ops: &'a RomOperators) -> Self {
        MonolithicRom { ops, lu: ops.monolithic_matrix().lu() }
    }

    pub fn step(&self, prev: &RomState, loads: &RomLoads, t_next: f64) -> Result<RomState> {
        let o = self.ops;
        let (ru, rp, _) = o.ranks;
        let mut g = loads.g.clone();
        axpy_mat(&mut g, 1.0, o.get(RomOp::MPU), &prev.u);
        axpy_mat(&mut g, 1.0, o.get(RomOp::MPP), &prev.p);
        axpy_mat(&mut g, 1.0, o.get(RomOp::MPT), &prev.theta);
        let mut h = loads.h.clone();
        axpy_mat(&mut h, 1.0, o.get(RomOp::MTU), &prev.u);
        axpy_mat(&mut h, 1.0, o.get(RomOp::MTP), &prev.p);
        axpy_mat(&mut h, 1.0, o.get(RomOp::MTT), &prev.theta);
        let mut b = loads.f.clone();
        b.extend(g);
        b.extend(h);
        let x = lu_solve(&self.lu, b, "monolithic reduced system")?;
        Ok(RomState {
            u: x[..ru].to_vec(),
            p: x[ru..ru + rp].to_vec(),
            theta: x[ru + rp..].to_vec(),
            t: t_next,
        })
    }
}

/// Fixed-stress reduced scheme with its three matrices factorized once.
pub struct FixedStressRom<'a> {
    ops: &'a RomOperators,
    flow: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    heat: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    mech: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> FixedStressRom<'a> {
    pub fn new(ops: &'a RomOperators) -> Self {
        let [flow, heat, mech] = ops.fixed_stress_matrices();
        FixedStressRom { ops, flow: flow.lu(), heat: heat.lu(), mech: mech.lu() }
    }

    /// Step i: flow problem for the pressure coefficients.
    pub fn step_flow(&self, iter: &RomState, prev: &RomState, loads: &RomLoads) -> Result<Vec<f64>> {
        let o = self.ops;
        let mut b = loads.g.clone();
        axpy_mat(&mut b, 1.0, o.get(RomOp::MPP), &prev.p);
        axpy_mat(&mut b, 1.0, o.get(RomOp::SPP), &iter.p);
        axpy_mat(&mut b, -1.0, o.get(RomOp::MPU), &diff(&iter.u, &prev.u));
        axpy_mat(&mut b, -1.0, o.get(RomOp::MPT), &diff(&iter.theta, &prev.theta));
        lu_solve(&self.flow, b, "reduced flow step")
    }

    /// Step ii: heat problem, reading the same iterate as step i.
    pub fn step_heat(&self, iter: &RomState, prev: &RomState, loads: &RomLoads) -> Result<Vec<f64>> {
        let o = self.ops;
        let mut b = loads.h.clone();
        axpy_mat(&mut b, 1.0, o.get(RomOp::MTT), &prev.theta);
        axpy_mat(&mut b, 1.0, o.get(RomOp::STT), &iter.theta);
        axpy_mat(&mut b, -1.0, o.get(RomOp::MTU), &diff(&iter.u, &prev.u));
        axpy_mat(&mut b, -1.0, o.get(RomOp::MTP), &diff(&iter.p, &prev.p));
        lu_solve(&self.heat, b, "reduced heat step")
    }

    /// Step iii: mechanics with the updated pressure and temperature.
    pub fn step_mech(&self, p: &[f64], theta: &[f64], loads: &RomLoads) -> Result<Vec<f64>> {
        let o = self.ops;
        let mut b = loads.f.clone();
        axpy_mat(&mut b, -1.0, o.get(RomOp::AUP), p);
        axpy_mat(&mut b, -1.0, o.get(RomOp::AUT), theta);
        lu_solve(&self.mech, b, "reduced mechanics step")
    }

    pub fn sweep(&self, iter: &RomState, prev: &RomState, loads: &RomLoads) -> Result<RomState> {
        let p = self.step_flow(iter, prev, loads)?;
        let theta = self.step_heat(iter, prev, loads)?;
        let u = self.step_mech(&p, &theta, loads)?;
        Ok(RomState { u, p, theta, t: iter.t })
    }

    pub fn time_step(
        &self,
        prev: &RomState,
        loads: &RomLoads,
        t_next: f64,
        stop: &StoppingCriterion,
    ) -> Result<(RomState, usize, f64, bool)> {
        let mut iter = prev.clone();
        iter.t = t_next;
        let mut increment = f64::INFINITY;
        for i in 1..=stop.max_iter {
            let next = self.sweep(&iter, prev, loads)?;
            let (inc, done) = crate::hf::relative_increments(&next.as_hf_like(), &iter.as_hf_like(), stop, None);
            increment = inc;
            iter = next;
            if done {
                return Ok((iter, i, increment, true));
            }
        }
        Ok((iter, stop.max_iter, increment, false))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomScheme {
    Monolithic,
    FixedStress,
}

impl RomScheme {
    pub fn label(self) -> &'static str {
        match self {
            RomScheme::Monolithic => "M-ROM",
            RomScheme::FixedStress => "FS-ROM",
        }
    }
}

/// Runs the online stage over `loads.len()` steps of size `ops.dt`.
pub fn run_rom(
    ops: &RomOperators,
    loads: &[RomLoads],
    initial: RomState,
    scheme: RomScheme,
    stop: &StoppingCriterion,
) -> Result<(Vec<RomState>, SolverReport)> {
    stop.validate()?;
    let start = Instant::now();
    let mut report = SolverReport::default();
    let clock = Instant::now();
    let mono = (scheme == RomScheme::Monolithic).then(|| MonolithicRom::new(ops));
    let fs = (scheme == RomScheme::FixedStress).then(|| FixedStressRom::new(ops));
    report.factorization_seconds = clock.elapsed().as_secs_f64();
    let mut states = Vec::with_capacity(loads.len() + 1);
    states.push(initial);
    for (k, l) in loads.iter().enumerate() {
        let t = (k + 1) as f64 * ops.dt;
        let prev = states.last().expect("initial state");
        let clock = Instant::now();
        let (next, it, inc, ok) = match (&mono, &fs) {
            (Some(m), _) => (m.step(prev, l, t)?, 1, 0.0, true),
            (_, Some(f)) => f.time_step(prev, l, t, stop)?,
            _ => unreachable!(),
        };
        let seconds = clock.elapsed().as_secs_f64();
        if !ok {
            log::warn!("{}: step {} not converged after {it} iterations (increment {inc:e})", scheme.label(), k + 1);
        }
        log::debug!("{} step {} iterations={it} increment={inc:e}", scheme.label(), k + 1);
        report.steps.push(StepRecord { iterations: it, increment: inc, converged: ok, seconds });
        states.push(next);
    }
    report.total_seconds = start.elapsed().as_secs_f64();
    Ok((states, report))
}

/// Coefficient `scale * 10^(a1 w1 + a2 w2)` of one affine term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineCoef {
    pub scale: f64,
    pub a1: f64,
    pub a2: f64,
}

impl AffineCoef {
    pub fn constant(scale: f64) -> Self {
        AffineCoef { scale, a1: 0.0, a2: 0.0 }
    }

    pub fn eval(&self, omega: [f64; 2]) -> f64 {
        let e = self.a1 * omega[0] + self.a2 * omega[1];
        if e == 0.0 {
            self.scale
        } else {
            self.scale * 10f64.powf(e)
        }
    }
}

/// HF-level affine decomposition: per form, terms `c_q(omega) A_q`.
#[derive(Clone, Debug)]
pub struct HfAffineFamily {
    pub dt: f64,
    pub terms: BTreeMap<RomOp, Vec<(AffineCoef, CsrMatrix)>>,
}

impl HfAffineFamily {
    pub fn instantiate(&self, op: RomOp, omega: [f64; 2]) -> Result<CsrMatrix> {
        let terms = &self.terms[&op];
        let scaled: Vec<(f64, &CsrMatrix)> = terms.iter().map(|(c, m)| (c.eval(omega), m)).collect();
        CsrMatrix::linear_combination(&scaled)
    }

    /// Projects every term onto the basis.
    pub fn project(&self, basis: &ReducedBasis) -> AffineOperatorFamily {
        let terms = self
            .terms
            .iter()
            .map(|(&op, ts)| {
                let (a, b) = op.form().fields();
                let phi_a = &basis.field(a).modes;
                let phi_b = &basis.field(b).modes;
                (op, ts.iter().map(|(c, m)| (*c, m.congruence(phi_a, phi_b))).collect())
            })
            .collect();
        AffineOperatorFamily { dt: self.dt, ranks: basis.ranks(), terms }
    }
}

/// Reduced affine decomposition `A_r(omega) = sum_q c_q(omega) A_q`.
#[derive(Clone, Debug)]
pub struct AffineOperatorFamily {
    pub dt: f64,
    pub ranks: (usize, usize, usize),
    pub terms: BTreeMap<RomOp, Vec<(AffineCoef, DMatrix<f64>)>>,
}

pub fn instantiate_affine(family: &AffineOperatorFamily, omega: [f64; 2]) -> RomOperators {
    let matrices = family
        .terms
        .iter()
        .map(|(&op, ts)| {
            let (rows, cols) = ts.first().map_or((0, 0), |(_, m)| m.shape());
            let mut acc = DMatrix::zeros(rows, cols);
            for (c, m) in ts {
                acc += m * c.eval(omega);
            }
            (op, acc)
        })
        .collect();
    RomOperators { dt: family.dt, ranks: family.ranks, matrices }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{CoefficientField, PhysicalParams};
    use crate::hf::{run_hf, HfProblem, HfScheme};
    use crate::mesh::{build_spaces, build_unit_square_mesh, BcSpec};
    use crate::pod::{FieldBasis, PodOptions};
    use crate::problem::{FieldValues, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    struct Wave;

    impl SpaceTimeField for Wave {
        fn eval_exact(&self, x: f64, y: f64, t: f64) -> FieldValues {
            let b = x * y * (1.0 - x) * (1.0 - y);
            FieldValues { u: [b * (1.0 + t), -b * x], p: b * (1.0 + y + t), theta: b * (2.0 - x * t) }
        }
    }

    impl Forcing for Wave {
        fn eval_forcing(&self, x: f64, y: f64, t: f64) -> FieldValues {
            let mut v = self.eval_exact(x, y, t);
            v.u[0] *= 100.0;
            v.u[1] *= 100.0 * t.cos();
            v.theta *= 1.0 + t;
            v
        }
    }

    fn setup(n: usize, dt: f64) -> (SpaceSet, HfOperators) {
        let mesh = build_unit_square_mesh(n, None).unwrap();
        let s = build_spaces(&mesh, BcSpec::all_dirichlet());
        let ops = HfOperators::assemble(&ex1(), &CoefficientField::uniform(1e-3, 1e-3), &s, dt).unwrap();
        (s, ops)
    }

    fn random_orthonormal_basis(hf: &HfOperators, r: usize, seed: u64) -> ReducedBasis {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mk = |f: Field, rng: &mut ChaCha8Rng| {
            let n = hf.gram(f).nrows();
            let data = DMatrix::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0));
            let snaps = crate::pod::SnapshotSet { field: f, data };
            crate::pod::compute_modes(&snaps, hf.gram(f), &PodOptions::new(r)).unwrap()
        };
        ReducedBasis {
            u: mk(Field::Displacement, &mut rng),
            p: mk(Field::Pressure, &mut rng),
            theta: mk(Field::Temperature, &mut rng),
        }
    }

    #[test]
    fn gram_projects_to_identity_and_auu_stays_spd() {
        let (_, hf) = setup(4, 0.01);
        let basis = random_orthonormal_basis(&hf, 3, 1);
        let g = hf.gram_p.congruence(&basis.p.modes, &basis.p.modes);
        assert!((g - DMatrix::identity(3, 3)).amax() < 1e-12);
        let rom = project_operators(&basis, &hf).unwrap();
        let auu = rom.get(RomOp::AUU);
        assert!((auu - auu.transpose()).amax() <= 1e-12 * auu.amax());
        assert!(auu.clone().cholesky().is_some());
        // congruence definition
        let direct = basis.p.modes.transpose() * hf.mpu.to_dense() * &basis.u.modes;
        assert!((rom.get(RomOp::MPU) - direct).amax() <= 1e-12 * rom.get(RomOp::MPU).amax());
    }

    #[test]
    fn zero_problem() {
        let (_, hf) = setup(4, 0.01);
        let basis = random_orthonormal_basis(&hf, 2, 2);
        let rom = project_operators(&basis, &hf).unwrap();
        let loads = vec![RomLoads { f: vec![0.0; 2], g: vec![0.0; 2], h: vec![0.0; 2] }; 3];
        for scheme in [RomScheme::Monolithic, RomScheme::FixedStress] {
            let (states, rep) = run_rom(&rom, &loads, RomState::zeros((2, 2, 2), 0.0), scheme, &StoppingCriterion::euclidean(1e-10, 20)).unwrap();
            assert!(states.iter().all(|s| s.u.iter().chain(&s.p).chain(&s.theta).all(|&v| v == 0.0)));
            assert!(rep.steps.iter().all(|s| s.iterations == 1));
        }
    }

    #[test]
    fn initial_projection_of_a_mode_is_a_unit_vector() {
        let (_, hf) = setup(4, 0.01);
        let basis = random_orthonormal_basis(&hf, 3, 3);
        let st = State {
            u: basis.u.modes.column(0).as_slice().to_vec(),
            p: basis.p.modes.column(0).as_slice().to_vec(),
            theta: basis.theta.modes.column(0).as_slice().to_vec(),
            t: 0.0,
        };
        let x = project_state_l2(&basis, &hf, &st).unwrap();
        for f in Field::ALL {
            let v = x.field(f);
            assert!((v[0] - 1.0).abs() < 1e-10 && v[1..].iter().all(|c| c.abs() < 1e-10));
        }
        let back = lift(&basis, &x);
        for f in Field::ALL {
            let d = crate::linalg::norm2(&crate::linalg::sub(back.field(f), st.field(f)));
            assert!(d < 1e-10);
        }
        let z = project_state_l2(&basis, &hf, &State::zeros(st.sizes(), 0.0)).unwrap();
        assert!(z.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn monolithic_rom_solution_is_a_fixed_stress_fixed_point() {
        let (s, hf) = setup(4, 0.01);
        let basis = random_orthonormal_basis(&hf, 3, 4);
        let rom = project_operators(&basis, &hf).unwrap();
        let loads = project_loads(&basis, &Loads::assemble(&Wave, 0.01, &s));
        let prev = project_initial_condition(&basis, &hf, &s, &Wave, 0.0).unwrap();
        let x = MonolithicRom::new(&rom).step(&prev, &loads, 0.01).unwrap();
        let y = FixedStressRom::new(&rom).sweep(&x, &prev, &loads).unwrap();
        for f in Field::ALL {
            let d = crate::linalg::norm2(&diff(x.field(f), y.field(f)));
            assert!(d <= 1e-10 * crate::linalg::norm2(x.field(f)), "{f}");
        }
    }

    #[test]
    fn full_span_reproduces_hf() {
        let (s, hf) = setup(3, 0.05);
        let prob = HfProblem { spaces: &s, ops: &hf, forcing: &Wave, initial: &Wave };
        let stop = StoppingCriterion::h1(1e-12, 50);
        let (traj, _) = run_hf(&prob, HfScheme::Monolithic, 10, &stop).unwrap();
        let basis = ReducedBasis::from_states(&traj.states, [&hf.gram_u, &hf.gram_p, &hf.gram_t], &PodOptions::new(100)).unwrap();
        let rom = project_operators(&basis, &hf).unwrap();
        let loads = project_load_sequence(&basis, &s, &Wave, hf.dt, 10);
        let x0 = project_initial_condition(&basis, &hf, &s, &Wave, 0.0).unwrap();
        let (states, _) = run_rom(&rom, &loads, x0, RomScheme::Monolithic, &StoppingCriterion::euclidean(1e-12, 50)).unwrap();
        for (a, b) in states.iter().zip(&traj.states) {
            let l = lift(&basis, a);
            for f in Field::ALL {
                let d = crate::linalg::norm2(&crate::linalg::sub(l.field(f), b.field(f)));
                // modes below the relative floor 1e-12 carry ~1e-7 of the content
                assert!(d <= 1e-6 * crate::linalg::norm2(b.field(f)), "{f} {d:e}");
            }
        }
    }

    #[test]
    fn dt_rescaling_matches_reprojection() {
        let (s, hf) = setup(4, 0.01);
        let basis = random_orthonormal_basis(&hf, 2, 5);
        let rom = project_operators(&basis, &hf).unwrap().with_dt(0.1).unwrap();
        let hf2 = HfOperators::assemble(&ex1(), &CoefficientField::uniform(1e-3, 1e-3), &s, 0.1).unwrap();
        let direct = project_operators(&basis, &hf2).unwrap();
        for op in RomOp::ALL {
            let a = rom.get(op);
            let b = direct.get(op);
            assert!((a - b).amax() <= 1e-12 * b.amax().max(1e-300), "{}", op.name());
        }
        let _ = Zero;
    }

    #[test]
    fn truncation_matches_projection_on_fewer_modes() {
        let (_, hf) = setup(4, 0.01);
        let basis = random_orthonormal_basis(&hf, 4, 6);
        let full = project_operators(&basis, &hf).unwrap();
        let small = project_operators(&basis.truncated_per_field(2, 3, 1), &hf).unwrap();
        let t = full.truncated(2, 3, 1);
        assert_eq!(t.ranks, (2, 3, 1));
        for op in RomOp::ALL {
            assert!((t.get(op) - small.get(op)).amax() < 1e-13);
        }
        let _: &FieldBasis = &basis.u;
    }

    #[test]
    fn affine_coefficients() {
        assert_eq!(AffineCoef::constant(2.0).eval([3.0, 4.0]), 2.0);
        let c = AffineCoef { scale: 0.1, a1: 1.0, a2: 0.0 };
        assert!((c.eval([-2.0, 5.0]) - 1e-3).abs() < 1e-18);
        assert_eq!(c.eval([0.0, 1.0]), 0.1);
    }
}
