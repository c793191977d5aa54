//! Error norms against exact solutions and between trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manufactured::ExactSolution;
use crate::assembly::{cell_quadrature, p1_gradients, HfOperators};
use crate::hf::State;
use crate::linalg::{gram_norm, sub};
use crate::mesh::{Field, SpaceSet};

/// How the exact solution enters an error norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// True `L2`/`H1` errors, integrating the exact function and gradient with the 6-point rule.
    #[default]
    Quadrature,
    /// Discrete norms of `x_h - I_h x` through the mass and Gram matrices.
    Interpolant,
}

/// Per-field errors, indexed like [`Field::ALL`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldErrors {
    pub l2: [f64; 3],
    pub h1: [f64; 3],
}

impl FieldErrors {
    pub fn max_with(&self, o: &FieldErrors) -> FieldErrors {
        let mut r = *self;
        for k in 0..3 {
            r.l2[k] = r.l2[k].max(o.l2[k]);
            r.h1[k] = r.h1[k].max(o.h1[k]);
        }
        r
    }

    /// Componentwise `self / norms`; a zero norm leaves the absolute value.
    pub fn relative_to(&self, norms: &FieldErrors) -> FieldErrors {
        let div = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
        let mut r = *self;
        for k in 0..3 {
            r.l2[k] = div(self.l2[k], norms.l2[k]);
            r.h1[k] = div(self.h1[k], norms.h1[k]);
        }
        r
    }
}

pub fn state_errors(
    spaces: &SpaceSet,
    ops: &HfOperators,
    state: &State,
    exact: &dyn ExactSolution,
    mode: ErrorMode,
) -> FieldErrors {
    match mode {
        ErrorMode::Interpolant => {
            let interp = State::interpolate(spaces, exact, state.t);
            let mut e = FieldErrors::default();
            for (k, f) in Field::ALL.into_iter().enumerate() {
                let d = sub(state.field(f), interp.field(f));
                e.l2[k] = gram_norm(ops.mass(f), &d);
                e.h1[k] = gram_norm(ops.gram(f), &d);
            }
            e
        }
        ErrorMode::Quadrature => level_errors(spaces, ops, state.t, std::slice::from_ref(state), exact, mode).errors[0],
    }
}

/// Errors of several states at one time level, plus the norms of the exact
/// solution in the same mode (for relative errors).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LevelErrors {
    pub exact: FieldErrors,
    pub errors: Vec<FieldErrors>,
}

/// Evaluates the exact solution once and scores every state against it.
/// All states must carry time `t`.
pub fn level_errors(
    spaces: &SpaceSet,
    ops: &HfOperators,
    t: f64,
    states: &[State],
    exact: &dyn ExactSolution,
    mode: ErrorMode,
) -> LevelErrors {
    match mode {
        ErrorMode::Interpolant => {
            let interp = State::interpolate(spaces, exact, t);
            let norms = |s: &State, reference: Option<&State>| {
                let mut e = FieldErrors::default();
                for (k, f) in Field::ALL.into_iter().enumerate() {
                    let d = match reference {
                        Some(r) => sub(s.field(f), r.field(f)),
                        None => s.field(f).to_vec(),
                    };
                    e.l2[k] = gram_norm(ops.mass(f), &d);
                    e.h1[k] = gram_norm(ops.gram(f), &d);
                }
                e
            };
            LevelErrors {
                exact: norms(&interp, None),
                errors: states.iter().map(|s| norms(s, Some(&interp))).collect(),
            }
        }
        ErrorMode::Quadrature => quadrature_errors(spaces, t, states, exact),
    }
}

fn quadrature_errors(spaces: &SpaceSet, t: f64, states: &[State], exact: &dyn ExactSolution) -> LevelErrors {
    let mesh = &spaces.mesh;
    let full: Vec<[Vec<f64>; 3]> = states
        .iter()
        .map(|s| [spaces.u.expand(&s.u), spaces.p.expand(&s.p), spaces.theta.expand(&s.theta)])
        .collect();
    // squared L2 and gradient contributions for u, p, theta; slot 0 is the exact norm
    let mut sq = vec![[0.0f64; 6]; states.len() + 1];
    let mut ex_v = [[0.0f64; 4]; 6];
    let mut ex_g = [[[0.0f64; 2]; 4]; 6];
    for c in 0..mesh.n_cells() {
        let verts = mesh.cells[c];
        let (g, _) = p1_gradients(&mesh.cell_coords(c));
        let quad = cell_quadrature(mesh, c);
        for (q, (pt, _, _)) in quad.iter().enumerate() {
            let ex = exact.eval_exact(pt[0], pt[1], t);
            let eg = exact.eval_gradients(pt[0], pt[1], t);
            ex_v[q] = [ex.u[0], ex.u[1], ex.p, ex.theta];
            ex_g[q] = [eg.u[0], eg.u[1], eg.p, eg.theta];
        }
        for (q, (_, w, _)) in quad.iter().enumerate() {
            let acc = &mut sq[0];
            for k in 0..4usize {
                let slot = 2 * k.saturating_sub(1);
                acc[slot] += w * ex_v[q][k].powi(2);
                acc[slot + 1] += w * (ex_g[q][k][0].powi(2) + ex_g[q][k][1].powi(2));
            }
        }
        for (s, [u, p, th]) in full.iter().enumerate() {
            let comps = [
                verts.map(|v| u[2 * v]),
                verts.map(|v| u[2 * v + 1]),
                verts.map(|v| p[v]),
                verts.map(|v| th[v]),
            ];
            let grads = comps.map(|vals| {
                [
                    vals[0] * g[0][0] + vals[1] * g[1][0] + vals[2] * g[2][0],
                    vals[0] * g[0][1] + vals[1] * g[1][1] + vals[2] * g[2][1],
                ]
            });
            let acc = &mut sq[s + 1];
            for (q, (_, w, l)) in quad.iter().enumerate() {
                for k in 0..4usize {
                    let slot = 2 * k.saturating_sub(1);
                    let v = comps[k][0] * l[0] + comps[k][1] * l[1] + comps[k][2] * l[2];
                    acc[slot] += w * (v - ex_v[q][k]).powi(2);
                    acc[slot + 1] += w * ((grads[k][0] - ex_g[q][k][0]).powi(2) + (grads[k][1] - ex_g[q][k][1]).powi(2));
                }
            }
        }
    }
    let finish = |a: &[f64; 6]| {
        let mut e = FieldErrors::default();
        for k in 0..3 {
            e.l2[k] = a[2 * k].sqrt();
            e.h1[k] = (a[2 * k] + a[2 * k + 1]).sqrt();
        }
        e
    };
    LevelErrors { exact: finish(&sq[0]), errors: sq[1..].iter().map(finish).collect() }
}

/// Running maxima of absolute and relative errors of several trajectories.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorTracker {
    pub max_abs: Vec<FieldErrors>,
    pub max_rel: Vec<FieldErrors>,
    /// Per level (relative errors), kept when requested.
    pub history: Vec<(f64, Vec<FieldErrors>)>,
    keep_history: bool,
}

impl ErrorTracker {
    pub fn new(n_traj: usize, keep_history: bool) -> Self {
        ErrorTracker {
            max_abs: vec![FieldErrors::default(); n_traj],
            max_rel: vec![FieldErrors::default(); n_traj],
            history: Vec::new(),
            keep_history,
        }
    }

    pub fn push(&mut self, t: f64, level: &LevelErrors) {
        let rel: Vec<FieldErrors> = level.errors.iter().map(|e| e.relative_to(&level.exact)).collect();
        for (k, e) in level.errors.iter().enumerate() {
            self.max_abs[k] = self.max_abs[k].max_with(e);
            self.max_rel[k] = self.max_rel[k].max_with(&rel[k]);
        }
        if self.keep_history {
            self.history.push((t, rel));
        }
    }
}

/// Maximum over `n >= 1` of the per-field errors.
pub fn max_errors_over_time(
    spaces: &SpaceSet,
    ops: &HfOperators,
    states: &[State],
    exact: &dyn ExactSolution,
    mode: ErrorMode,
) -> FieldErrors {
    states
        .par_iter()
        .skip(1)
        .map(|s| state_errors(spaces, ops, s, exact, mode))
        .reduce(FieldErrors::default, |a, b| a.max_with(&b))
}

/// Relative H1 distance of `a` from the reference `b`, per field, at each `n >= 1`.
pub fn relative_h1_history(ops: &HfOperators, a: &[State], b: &[State]) -> Vec<[f64; 3]> {
    a.par_iter()
        .zip(b.par_iter())
        .skip(1)
        .map(|(x, y)| {
            Field::ALL.map(|f| {
                let g = ops.gram(f);
                let den = gram_norm(g, y.field(f));
                let num = gram_norm(g, &sub(x.field(f), y.field(f)));
                if den > 0.0 {
                    num / den
                } else {
                    num
                }
            })
        })
        .collect()
}

/// Max over time of [`relative_h1_history`].
pub fn max_relative_h1(ops: &HfOperators, a: &[State], b: &[State]) -> [f64; 3] {
    relative_h1_history(ops, a, b)
        .into_iter()
        .fold([0.0; 3], |m, r| [m[0].max(r[0]), m[1].max(r[1]), m[2].max(r[2])])
}

/// Observed order `log2(e_coarse / e_fine)` for a halving of `h`.
pub fn observed_rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{CoefficientField, HfOperators};
    use crate::experiments::{example1_case, example1_params};
    use crate::mesh::{build_patterned_mesh, build_spaces, BcSpec, MeshPattern};
    use crate::problem::{FieldValues, SpaceTimeField};

    /// Affine in space, so P1 represents it exactly.
    struct Plane;

    impl SpaceTimeField for Plane {
        fn eval_exact(&self, x: f64, y: f64, t: f64) -> FieldValues {
            FieldValues { u: [x + t, 2.0 * y], p: 1.0 - x + y, theta: 3.0 * x * t }
        }
    }

    impl ExactSolution for Plane {
        fn eval_gradients(&self, _x: f64, _y: f64, t: f64) -> super::super::FieldGradients {
            super::super::FieldGradients { u: [[1.0, 0.0], [0.0, 2.0]], p: [-1.0, 1.0], theta: [3.0 * t, 0.0] }
        }
    }

    fn setup(bc: BcSpec) -> (SpaceSet, HfOperators) {
        let mesh = build_patterned_mesh(4, None, MeshPattern::Crossed).unwrap();
        let s = build_spaces(&mesh, bc);
        let ops = HfOperators::assemble(&example1_params(), &CoefficientField::uniform(1.0, 1.0), &s, 0.1).unwrap();
        (s, ops)
    }

    #[test]
    fn interpolant_has_zero_error() {
        let (s, ops) = setup(BcSpec::all_dirichlet());
        let case = example1_case();
        let st = State::interpolate(&s, &case, 0.4);
        let e = state_errors(&s, &ops, &st, &case, ErrorMode::Interpolant);
        assert_eq!(e, FieldErrors::default());
    }

    #[test]
    fn zero_state_error_is_the_exact_norm() {
        let (s, ops) = setup(BcSpec::all_dirichlet());
        let case = example1_case();
        for mode in [ErrorMode::Interpolant, ErrorMode::Quadrature] {
            let z = State::zeros(s.free_counts(), 0.7);
            let lv = level_errors(&s, &ops, 0.7, std::slice::from_ref(&z), &case, mode);
            assert_eq!(lv.errors[0], lv.exact);
            assert!(lv.exact.h1.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn quadrature_is_exact_on_affine_fields() {
        // Neumann-free spaces so boundary values are carried too
        let (s, ops) = setup(BcSpec { u: crate::mesh::BoundaryKind::Neumann, p: crate::mesh::BoundaryKind::Neumann, theta: crate::mesh::BoundaryKind::Neumann });
        let st = State::interpolate(&s, &Plane, 0.5);
        let lv = level_errors(&s, &ops, 0.5, &[st.clone(), State::zeros(s.free_counts(), 0.5)], &Plane, ErrorMode::Quadrature);
        for k in 0..3 {
            assert!(lv.errors[0].l2[k] < 1e-14 && lv.errors[0].h1[k] < 1e-13);
        }
        // |p|_L2^2 for p = 1 - x + y is 7/6; |grad p|^2 = 2
        assert!((lv.exact.l2[1] - (7.0f64 / 6.0).sqrt()).abs() < 1e-13);
        assert!((lv.exact.h1[1] - (7.0f64 / 6.0 + 2.0).sqrt()).abs() < 1e-13);
        let rel = lv.errors[1].relative_to(&lv.exact);
        assert!(rel.h1.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn tracker_keeps_maxima() {
        let mut t = ErrorTracker::new(1, true);
        let e = |v: f64| FieldErrors { l2: [v; 3], h1: [v; 3] };
        t.push(0.1, &LevelErrors { exact: e(2.0), errors: vec![e(1.0)] });
        t.push(0.2, &LevelErrors { exact: e(10.0), errors: vec![e(3.0)] });
        assert_eq!(t.max_abs[0], e(3.0));
        assert_eq!(t.max_rel[0], e(0.5));
        assert_eq!(t.history.len(), 2);
    }

    #[test]
    fn rates() {
        assert!((observed_rate(0.4, 0.1) - 2.0).abs() < 1e-15);
    }
}
