//! Smooth manufactured solution on the unit square and its forcing.
//!
//! `u = [sin(pi x t) cos(pi y t), cos(pi x t) sin(pi y t)] B`,
//! `p = cos(t + x - y) B`, `theta = sin(t + x - y) B`, `B = x y (1-x) (1-y)`.
//! Derivatives are carried exactly through the product and chain rules by a
//! small second-order jet type.

use std::ops::{Add, Mul};

use crate::assembly::{CoefficientField, PhysicalParams};
use crate::problem::{FieldValues, Forcing, SpaceTimeField};

/// Value and the partial derivatives needed by the model, in `(x, y, t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Jet {
    /// `g(a)` given `g, g', g''` at `a.v`.
    fn compose(a: Jet, g: f64, g1: f64, g2: f64) -> Jet {
        Jet {
            v: g,
            x: g1 * a.x,
            y: g1 * a.y,
            t: g1 * a.t,
            xx: g2 * a.x * a.x + g1 * a.xx,
            xy: g2 * a.x * a.y + g1 * a.xy,
            yy: g2 * a.y * a.y + g1 * a.yy,
            tx: g2 * a.t * a.x + g1 * a.tx,
            ty: g2 * a.t * a.y + g1 * a.ty,
        }
    }

    fn sin(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        Jet::compose(self, s, c, -s)
    }

    fn cos(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        Jet::compose(self, c, -s, -c)
    }

    fn laplacian(&self) -> f64 {
        self.xx + self.yy
    }
}

impl Mul for Jet {
    type Output = Jet;

    fn mul(self, g: Jet) -> Jet {
        let f = self;
        Jet {
            v: f.v * g.v,
            x: f.x * g.v + f.v * g.x,
            y: f.y * g.v + f.v * g.y,
            t: f.t * g.v + f.v * g.t,
            xx: f.xx * g.v + 2.0 * f.x * g.x + f.v * g.xx,
            xy: f.xy * g.v + f.x * g.y + f.y * g.x + f.v * g.xy,
            yy: f.yy * g.v + 2.0 * f.y * g.y + f.v * g.yy,
            tx: f.tx * g.v + f.t * g.x + f.x * g.t + f.v * g.tx,
            ty: f.ty * g.v + f.t * g.y + f.y * g.t + f.v * g.ty,
        }
    }
}

impl Add for Jet {
    type Output = Jet;

    fn add(self, g: Jet) -> Jet {
        Jet {
            v: self.v + g.v,
            x: self.x + g.x,
            y: self.y + g.y,
            t: self.t + g.t,
            xx: self.xx + g.xx,
            xy: self.xy + g.xy,
            yy: self.yy + g.yy,
            tx: self.tx + g.tx,
            ty: self.ty + g.ty,
        }
    }
}

/// Spatial gradients of the three fields at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldGradients {
    /// `u[c]` is the gradient of component `c`.
    pub u: [[f64; 2]; 2],
    pub p: [f64; 2],
    pub theta: [f64; 2],
}

/// Exact data that also knows its spatial gradients (for H1 error norms).
pub trait ExactSolution: SpaceTimeField {
    fn eval_gradients(&self, x: f64, y: f64, t: f64) -> FieldGradients;
}

/// Jets of `(u1, u2, p, theta)`.
pub fn solution_jets(x: f64, y: f64, t: f64) -> [Jet; 4] {
    use std::f64::consts::PI;
    let bx = Jet { v: x * (1.0 - x), x: 1.0 - 2.0 * x, xx: -2.0, ..Jet::default() };
    let by = Jet { v: y * (1.0 - y), y: 1.0 - 2.0 * y, yy: -2.0, ..Jet::default() };
    let bubble = bx * by;
    let ax = Jet { v: PI * x * t, x: PI * t, t: PI * x, tx: PI, ..Jet::default() };
    let ay = Jet { v: PI * y * t, y: PI * t, t: PI * y, ty: PI, ..Jet::default() };
    let phase = Jet { v: t + x - y, x: 1.0, y: -1.0, t: 1.0, ..Jet::default() };
    let u1 = ax.sin() * ay.cos() * bubble;
    let u2 = ax.cos() * ay.sin() * bubble;
    let p = phase.cos() * bubble;
    let theta = phase.sin() * bubble;
    [u1, u2, p, theta]
}

/// The manufactured problem with its material parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedCase {
    pub params: PhysicalParams,
    pub permeability: f64,
    pub conductivity: f64,
}

impl ManufacturedCase {
    pub fn new(params: PhysicalParams, permeability: f64, conductivity: f64) -> Self {
        ManufacturedCase { params, permeability, conductivity }
    }

    pub fn coefficients(&self) -> CoefficientField {
        CoefficientField::uniform(self.permeability, self.conductivity)
    }
}

impl SpaceTimeField for ManufacturedCase {
    fn eval_exact(&self, x: f64, y: f64, t: f64) -> FieldValues {
        let [u1, u2, p, th] = solution_jets(x, y, t);
        FieldValues { u: [u1.v, u2.v], p: p.v, theta: th.v }
    }
}

impl ExactSolution for ManufacturedCase {
    fn eval_gradients(&self, x: f64, y: f64, t: f64) -> FieldGradients {
        let [u1, u2, p, th] = solution_jets(x, y, t);
        FieldGradients {
            u: [[u1.x, u1.y], [u2.x, u2.y]],
            p: [p.x, p.y],
            theta: [th.x, th.y],
        }
    }
}

impl Forcing for ManufacturedCase {
    fn eval_forcing(&self, x: f64, y: f64, t: f64) -> FieldValues {
        let pr = &self.params;
        let kdr = pr.k_dr();
        let [u1, u2, p, th] = solution_jets(x, y, t);
        let grad_div = [u1.xx + u2.xy, u1.xy + u2.yy];
        let div_t = u1.tx + u2.ty;
        let f = [
            -pr.mu * u1.laplacian() - (pr.lambda + pr.mu) * grad_div[0]
                + pr.alpha * p.x
                + 3.0 * pr.alpha_t * kdr * th.x,
            -pr.mu * u2.laplacian() - (pr.lambda + pr.mu) * grad_div[1]
                + pr.alpha * p.y
                + 3.0 * pr.alpha_t * kdr * th.y,
        ];
        let g = pr.c0 * p.t + pr.alpha * div_t - 3.0 * pr.alpha_m * th.t
            - self.permeability * p.laplacian();
        let eta = pr.c_d * th.t + 3.0 * pr.alpha_t * kdr * pr.theta0 * div_t
            - 3.0 * pr.alpha_m * pr.theta0 * p.t
            - self.conductivity * th.laplacian();
        FieldValues { u: f, p: g, theta: eta }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::example1_case;

    #[test]
    fn vanishes_on_the_boundary() {
        let c = example1_case();
        for s in [0.0, 0.3, 0.77, 1.0] {
            for (x, y) in [(0.0, s), (1.0, s), (s, 0.0), (s, 1.0)] {
                let v = c.eval_exact(x, y, 0.6);
                assert_eq!(v.u, [0.0, 0.0]);
                assert_eq!(v.p, 0.0);
                assert_eq!(v.theta, 0.0);
            }
        }
    }

    #[test]
    fn initial_values() {
        let c = example1_case();
        let (x, y): (f64, f64) = (0.3, 0.8);
        let b = x * y * (1.0 - x) * (1.0 - y);
        let v = c.eval_exact(x, y, 0.0);
        assert_eq!(v.u, [0.0, 0.0]);
        assert!((v.p - (x - y).cos() * b).abs() < 1e-16);
        assert!((v.theta - (x - y).sin() * b).abs() < 1e-16);
        let mid = c.eval_exact(0.5, 0.5, 1.0);
        assert!((mid.p - 1f64.cos() * 0.0625).abs() < 1e-16);
    }

    #[test]
    fn decoupled_forcing_reduces_to_diffusion() {
        let mut c = example1_case();
        c.params.alpha = 0.0;
        c.params.alpha_t = 0.0;
        c.params.alpha_m = 0.0;
        let (x, y, t): (f64, f64, f64) = (0.21, 0.64, 0.37);
        let b = x * y * (1.0 - x) * (1.0 - y);
        let bx = (1.0 - 2.0 * x) * y * (1.0 - y);
        let by = (1.0 - 2.0 * y) * x * (1.0 - x);
        let bxx = -2.0 * y * (1.0 - y);
        let byy = -2.0 * x * (1.0 - x);
        let a = t + x - y;
        // p = cos(a) B: p_t = -sin(a) B, lap p = -2 cos(a) B - 2 sin(a) (B_x - B_y) + cos(a) (B_xx + B_yy)
        let p_t = -a.sin() * b;
        let lap = -2.0 * a.cos() * b - 2.0 * a.sin() * (bx - by) + a.cos() * (bxx + byy);
        let want = c.params.c0 * p_t - c.permeability * lap;
        assert!((c.eval_forcing(x, y, t).p - want).abs() < 1e-15);
    }
}
