//! P1 finite element assembly of the bilinear forms and load vectors of the
//! three-field problem, restricted to free dofs.
//!
//! Bilinear forms are integrated exactly (closed-form P1 element matrices).
//! Loads use the 6-point degree-4 triangle rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{Field, FieldSpace, Mesh, SpaceSet};
use crate::problem::Forcing;

/// Material constants of the thermo-poroelastic model in two dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub lambda: f64,
    pub mu: f64,
    /// Inverse Biot modulus.
    pub c0: f64,
    /// Biot-Willis coefficient.
    pub alpha: f64,
    /// Skeleton thermal dilation.
    pub alpha_t: f64,
    /// Thermal dilation coefficient; the factor 3 is applied at assembly.
    pub alpha_m: f64,
    pub c_d: f64,
    pub theta0: f64,
    /// Fixed-stress stabilization coefficient.
    pub l_stab: f64,
}

impl PhysicalParams {
    /// Drained bulk modulus `(d lambda + 2 mu) / d` with `d = 2`.
    pub fn k_dr(&self) -> f64 {
        self.lambda + self.mu
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("c0", self.c0),
            ("alpha", self.alpha),
            ("alpha_t", self.alpha_t),
            ("alpha_m", self.alpha_m),
            ("c_d", self.c_d),
            ("theta0", self.theta0),
            ("l_stab", self.l_stab),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} is not finite"),
                });
            }
        }
        let check = |ok: bool, name: &'static str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: reason.to_string(),
                })
            }
        };
        check(self.mu > 0.0, "mu", "must be positive")?;
        check(self.lambda >= 0.0, "lambda", "must be nonnegative")?;
        check(self.theta0 != 0.0, "theta0", "must be nonzero")?;
        check(self.l_stab > 0.0, "l_stab", "must be positive")?;
        check(self.c0 >= 0.0, "c0", "must be nonnegative")?;
        check(self.c_d >= 0.0, "c_d", "must be nonnegative")
    }
}

/// Piecewise-constant permeability `K` and conductivity `D`, indexed by cell label (1 or 2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub permeability: [f64; 2],
    pub conductivity: [f64; 2],
}

impl CoefficientField {
    pub fn uniform(k: f64, d: f64) -> Self {
        CoefficientField {
            permeability: [k, k],
            conductivity: [d, d],
        }
    }

    /// Label-1 values first, then label-2 values.
    pub fn banded(k1: f64, k2: f64, d1: f64, d2: f64) -> Self {
        CoefficientField {
            permeability: [k1, k2],
            conductivity: [d1, d2],
        }
    }

    pub fn permeability_at(&self, label: u8) -> f64 {
        self.permeability[label_slot(label)]
    }

    pub fn conductivity_at(&self, label: u8) -> f64 {
        self.conductivity[label_slot(label)]
    }

    pub fn k_min(&self) -> f64 {
        self.permeability[0].min(self.permeability[1])
    }

    pub fn k_max(&self) -> f64 {
        self.permeability[0].max(self.permeability[1])
    }

    pub fn d_min(&self) -> f64 {
        self.conductivity[0].min(self.conductivity[1])
    }

    pub fn d_max(&self) -> f64 {
        self.conductivity[0].max(self.conductivity[1])
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("permeability", self.permeability),
            ("conductivity", self.conductivity),
        ] {
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v:?} must be positive"),
                });
            }
        }
        Ok(())
    }
}

fn label_slot(label: u8) -> usize {
    if label == 1 {
        0
    } else {
        1
    }
}

/// The assembled operators of the fully discrete schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum FormId {
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
    GramU,
    GramP,
    GramT,
}

impl FormId {
    pub const ALL: [FormId; 16] = [
        FormId::AUU,
        FormId::APP,
        FormId::ATT,
        FormId::AUP,
        FormId::AUT,
        FormId::MPP,
        FormId::MTT,
        FormId::MPU,
        FormId::MPT,
        FormId::MTU,
        FormId::MTP,
        FormId::SPP,
        FormId::STT,
        FormId::GramU,
        FormId::GramP,
        FormId::GramT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormId::AUU => "AUU",
            FormId::APP => "APP",
            FormId::ATT => "ATT",
            FormId::AUP => "AUP",
            FormId::AUT => "AUT",
            FormId::MPP => "MPP",
            FormId::MTT => "MTT",
            FormId::MPU => "MPU",
            FormId::MPT => "MPT",
            FormId::MTU => "MTU",
            FormId::MTP => "MTP",
            FormId::SPP => "SPP",
            FormId::STT => "STT",
            FormId::GramU => "GRAM_U",
            FormId::GramP => "GRAM_P",
            FormId::GramT => "GRAM_T",
        }
    }

    /// `(test field, trial field)`: rows belong to the test space.
    pub fn fields(self) -> (Field, Field) {
        use Field::*;
        match self {
            FormId::AUU | FormId::GramU => (Displacement, Displacement),
            FormId::APP | FormId::MPP | FormId::SPP | FormId::GramP => (Pressure, Pressure),
            FormId::ATT | FormId::MTT | FormId::STT | FormId::GramT => (Temperature, Temperature),
            FormId::AUP => (Displacement, Pressure),
            FormId::AUT => (Displacement, Temperature),
            FormId::MPU => (Pressure, Displacement),
            FormId::MPT => (Pressure, Temperature),
            FormId::MTU => (Temperature, Displacement),
            FormId::MTP => (Temperature, Pressure),
        }
    }

    /// True for forms carrying a `1/dt` factor.
    pub fn is_time_scaled(self) -> bool {
        matches!(
            self,
            FormId::MPP
                | FormId::MTT
                | FormId::MPU
                | FormId::MPT
                | FormId::MTU
                | FormId::MTP
                | FormId::SPP
                | FormId::STT
        )
    }

    pub fn is_symmetric(self) -> bool {
        let (a, b) = self.fields();
        a == b
    }
}

impl std::fmt::Display for FormId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Gradients of the three barycentric functions and the (positive) area.
pub fn p1_gradients(x: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]);
    let g = [
        [(x[1][1] - x[2][1]) / det, (x[2][0] - x[1][0]) / det],
        [(x[2][1] - x[0][1]) / det, (x[0][0] - x[2][0]) / det],
        [(x[0][1] - x[1][1]) / det, (x[1][0] - x[0][0]) / det],
    ];
    (g, 0.5 * det.abs())
}

/// Element matrix of `(grad phi_b, grad phi_a)`.
pub fn element_stiffness(x: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let (g, area) = p1_gradients(x);
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    k
}

/// Element matrix of `(phi_b, phi_a)`.
pub fn element_mass(x: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let (_, area) = p1_gradients(x);
    let mut m = [[area / 12.0; 3]; 3];
    for (a, row) in m.iter_mut().enumerate() {
        row[a] = area / 6.0;
    }
    m
}

type Local = Vec<f64>;

/// Generic cell loop. `kernel(cell, local)` fills a row-major local matrix of
/// size `(3 * nc_test) x (3 * nc_trial)`, local dof index `vertex * nc + comp`.
/// Cells for which `keep` is false are skipped.
fn assemble_kernel<K>(
    mesh: &Mesh,
    test: &FieldSpace,
    trial: &FieldSpace,
    keep: impl Fn(usize) -> bool + Sync,
    kernel: K,
) -> CsrMatrix
where
    K: Fn(usize, &mut Local) + Sync,
{
    let nt = 3 * test.n_components;
    let ns = 3 * trial.n_components;
    const CHUNK: usize = 512;
    let cells: Vec<usize> = (0..mesh.n_cells()).filter(|&c| keep(c)).collect();
    let parts: Vec<Vec<(usize, usize, f64)>> = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * nt * ns);
            let mut local = vec![0.0; nt * ns];
            for &c in chunk {
                local.iter_mut().for_each(|v| *v = 0.0);
                kernel(c, &mut local);
                let verts = mesh.cells[c];
                for a in 0..nt {
                    let Some(i) = test.free_index(verts[a / test.n_components], a % test.n_components)
                    else {
                        continue;
                    };
                    for b in 0..ns {
                        let v = local[a * ns + b];
                        if v == 0.0 {
                            continue;
                        }
                        if let Some(j) =
                            trial.free_index(verts[b / trial.n_components], b % trial.n_components)
                        {
                            out.push((i, j, v));
                        }
                    }
                }
            }
            out
        })
        .collect();
    let cap = parts.iter().map(Vec::len).sum();
    let mut tb = TripletBuilder::with_capacity(test.n_free(), trial.n_free(), cap);
    for part in parts {
        for (i, j, v) in part {
            tb.push(i, j, v);
        }
    }
    tb.build()
}

fn check_same_shape(form: &'static str, a: &FieldSpace, b: &FieldSpace) -> Result<()> {
    if a.n_components != b.n_components {
        return Err(Error::FormMismatch {
            form,
            reason: format!(
                "test space has {} components, trial space {}",
                a.n_components, b.n_components
            ),
        });
    }
    Ok(())
}

/// `sum_c (phi_c, psi_c)` between two spaces with equal component counts.
pub fn mass_matrix(mesh: &Mesh, test: &FieldSpace, trial: &FieldSpace) -> Result<CsrMatrix> {
    check_same_shape("mass", test, trial)?;
    let nc = test.n_components;
    Ok(assemble_kernel(mesh, test, trial, |_| true, |c, local| {
        let m = element_mass(&mesh.cell_coords(c));
        let ns = 3 * nc;
        for a in 0..3 {
            for b in 0..3 {
                for k in 0..nc {
                    local[(a * nc + k) * ns + b * nc + k] = m[a][b];
                }
            }
        }
    }))
}

/// `sum_c (kappa grad phi_c, grad psi_c)` with a per-cell coefficient; cells where
/// `kappa` returns zero are skipped.
pub fn stiffness_matrix(
    mesh: &Mesh,
    test: &FieldSpace,
    trial: &FieldSpace,
    kappa: impl Fn(usize) -> f64 + Sync,
) -> Result<CsrMatrix> {
    check_same_shape("stiffness", test, trial)?;
    let nc = test.n_components;
    Ok(assemble_kernel(mesh, test, trial, |c| kappa(c) != 0.0, |c, local| {
        let k = element_stiffness(&mesh.cell_coords(c));
        let s = kappa(c);
        let ns = 3 * nc;
        for a in 0..3 {
            for b in 0..3 {
                for q in 0..nc {
                    local[(a * nc + q) * ns + b * nc + q] = s * k[a][b];
                }
            }
        }
    }))
}

/// Stiffness restricted to cells with the given label, unit coefficient.
pub fn labeled_stiffness(mesh: &Mesh, space: &FieldSpace, label: u8) -> Result<CsrMatrix> {
    stiffness_matrix(mesh, space, space, |c| {
        if mesh.cell_labels[c] == label {
            1.0
        } else {
            0.0
        }
    })
}

fn expect_vector(form: &'static str, s: &FieldSpace) -> Result<()> {
    if s.n_components != 2 {
        return Err(Error::FormMismatch {
            form,
            reason: format!("expected a vector space, got {} components", s.n_components),
        });
    }
    Ok(())
}

fn expect_scalar(form: &'static str, s: &FieldSpace) -> Result<()> {
    if s.n_components != 1 {
        return Err(Error::FormMismatch {
            form,
            reason: format!("expected a scalar space, got {} components", s.n_components),
        });
    }
    Ok(())
}

/// `2 (eps(u), eps(v))` on a vector space.
pub fn strain_matrix(mesh: &Mesh, u: &FieldSpace) -> Result<CsrMatrix> {
    expect_vector("strain", u)?;
    Ok(assemble_kernel(mesh, u, u, |_| true, |c, local| {
        let (g, area) = p1_gradients(&mesh.cell_coords(c));
        for a in 0..3 {
            for ci in 0..2 {
                for b in 0..3 {
                    for d in 0..2 {
                        let dot = if ci == d {
                            g[a][0] * g[b][0] + g[a][1] * g[b][1]
                        } else {
                            0.0
                        };
                        local[(a * 2 + ci) * 6 + b * 2 + d] = area * (dot + g[a][d] * g[b][ci]);
                    }
                }
            }
        }
    }))
}

/// `(div u, div v)` on a vector space.
pub fn div_div_matrix(mesh: &Mesh, u: &FieldSpace) -> Result<CsrMatrix> {
    expect_vector("div-div", u)?;
    Ok(assemble_kernel(mesh, u, u, |_| true, |c, local| {
        let (g, area) = p1_gradients(&mesh.cell_coords(c));
        for a in 0..3 {
            for ci in 0..2 {
                for b in 0..3 {
                    for d in 0..2 {
                        local[(a * 2 + ci) * 6 + b * 2 + d] = area * g[a][ci] * g[b][d];
                    }
                }
            }
        }
    }))
}

/// `(div u, w)`: rows on the scalar test space, columns on the vector trial space.
pub fn div_coupling_matrix(mesh: &Mesh, scalar: &FieldSpace, u: &FieldSpace) -> Result<CsrMatrix> {
    expect_scalar("div coupling", scalar)?;
    expect_vector("div coupling", u)?;
    Ok(assemble_kernel(mesh, scalar, u, |_| true, |c, local| {
        let (g, area) = p1_gradients(&mesh.cell_coords(c));
        for a in 0..3 {
            for b in 0..3 {
                for d in 0..2 {
                    local[a * 6 + b * 2 + d] = area / 3.0 * g[b][d];
                }
            }
        }
    }))
}

/// H1 Gram matrix (unit mass plus unit stiffness) of one field.
pub fn gram_matrix(mesh: &Mesh, s: &FieldSpace) -> Result<CsrMatrix> {
    let m = mass_matrix(mesh, s, s)?;
    let k = stiffness_matrix(mesh, s, s, |_| 1.0)?;
    CsrMatrix::linear_combination(&[(1.0, &m), (1.0, &k)])
}

fn require_dt(form: FormId, dt: f64) -> Result<()> {
    if form.is_time_scaled() && !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("{form} needs a positive time step, got {dt}"),
        });
    }
    Ok(())
}

/// Assembles one operator with all scalings of the fully discrete scheme baked in.
pub fn assemble_form(
    id: FormId,
    params: &PhysicalParams,
    coeffs: &CoefficientField,
    spaces: &SpaceSet,
    dt: f64,
) -> Result<CsrMatrix> {
    require_dt(id, dt)?;
    let mesh = spaces.mesh.as_ref();
    let (u, p, t) = (&spaces.u, &spaces.p, &spaces.theta);
    let pr = params;
    let kdr = pr.k_dr();
    let scaled = |m: CsrMatrix, c: f64| m.scaled(c);
    Ok(match id {
        FormId::AUU => {
            let e = strain_matrix(mesh, u)?;
            let d = div_div_matrix(mesh, u)?;
            CsrMatrix::linear_combination(&[(pr.mu, &e), (pr.lambda, &d)])?
        }
        FormId::APP => stiffness_matrix(mesh, p, p, |c| {
            coeffs.permeability_at(mesh.cell_labels[c])
        })?,
        FormId::ATT => stiffness_matrix(mesh, t, t, |c| {
            coeffs.conductivity_at(mesh.cell_labels[c])
        })?,
        FormId::AUP => scaled(div_coupling_matrix(mesh, p, u)?.transpose(), -pr.alpha),
        FormId::AUT => scaled(
            div_coupling_matrix(mesh, t, u)?.transpose(),
            -3.0 * pr.alpha_t * kdr,
        ),
        FormId::MPP => scaled(mass_matrix(mesh, p, p)?, pr.c0 / dt),
        FormId::MTT => scaled(mass_matrix(mesh, t, t)?, pr.c_d / dt),
        FormId::MPU => scaled(div_coupling_matrix(mesh, p, u)?, pr.alpha / dt),
        FormId::MPT => scaled(mass_matrix(mesh, p, t)?, -3.0 * pr.alpha_m / dt),
        FormId::MTU => scaled(
            div_coupling_matrix(mesh, t, u)?,
            3.0 * pr.alpha_t * kdr * pr.theta0 / dt,
        ),
        FormId::MTP => scaled(mass_matrix(mesh, t, p)?, -3.0 * pr.alpha_m * pr.theta0 / dt),
        FormId::SPP => scaled(
            mass_matrix(mesh, p, p)?,
            pr.l_stab * pr.alpha * pr.alpha / kdr / dt,
        ),
        FormId::STT => scaled(
            mass_matrix(mesh, t, t)?,
            9.0 * pr.l_stab * pr.alpha_t * pr.alpha_t * kdr * pr.theta0 / dt,
        ),
        FormId::GramU => gram_matrix(mesh, u)?,
        FormId::GramP => gram_matrix(mesh, p)?,
        FormId::GramT => gram_matrix(mesh, t)?,
    })
}

/// Every operator of one run (fixed parameters and time step), plus the unit
/// L2 mass matrices used for projections and error norms.
#[derive(Clone, Debug)]
pub struct HfOperators {
    pub dt: f64,
    pub params: PhysicalParams,
    pub auu: CsrMatrix,
    pub app: CsrMatrix,
    pub att: CsrMatrix,
    pub aup: CsrMatrix,
    pub aut: CsrMatrix,
    pub mpp: CsrMatrix,
    pub mtt: CsrMatrix,
    pub mpu: CsrMatrix,
    pub mpt: CsrMatrix,
    pub mtu: CsrMatrix,
    pub mtp: CsrMatrix,
    pub spp: CsrMatrix,
    pub stt: CsrMatrix,
    pub gram_u: CsrMatrix,
    pub gram_p: CsrMatrix,
    pub gram_t: CsrMatrix,
    pub mass_u: CsrMatrix,
    pub mass_p: CsrMatrix,
    pub mass_t: CsrMatrix,
}

impl HfOperators {
    pub fn assemble(
        params: &PhysicalParams,
        coeffs: &CoefficientField,
        spaces: &SpaceSet,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        coeffs.validate()?;
        let mut forms: Vec<(FormId, CsrMatrix)> = FormId::ALL
            .par_iter()
            .map(|&id| assemble_form(id, params, coeffs, spaces, dt).map(|m| (id, m)))
            .collect::<Result<_>>()?;
        let mesh = spaces.mesh.as_ref();
        let mass_u = mass_matrix(mesh, &spaces.u, &spaces.u)?;
        let mass_p = mass_matrix(mesh, &spaces.p, &spaces.p)?;
        let mass_t = mass_matrix(mesh, &spaces.theta, &spaces.theta)?;
        let mut take = |id: FormId| {
            let k = forms.iter().position(|(f, _)| *f == id).expect("all forms assembled");
            forms.swap_remove(k).1
        };
        Ok(HfOperators {
            dt,
            params: *params,
            auu: take(FormId::AUU),
            app: take(FormId::APP),
            att: take(FormId::ATT),
            aup: take(FormId::AUP),
            aut: take(FormId::AUT),
            mpp: take(FormId::MPP),
            mtt: take(FormId::MTT),
            mpu: take(FormId::MPU),
            mpt: take(FormId::MPT),
            mtu: take(FormId::MTU),
            mtp: take(FormId::MTP),
            spp: take(FormId::SPP),
            stt: take(FormId::STT),
            gram_u: take(FormId::GramU),
            gram_p: take(FormId::GramP),
            gram_t: take(FormId::GramT),
            mass_u,
            mass_p,
            mass_t,
        })
    }

    pub fn get(&self, id: FormId) -> &CsrMatrix {
        match id {
            FormId::AUU => &self.auu,
            FormId::APP => &self.app,
            FormId::ATT => &self.att,
            FormId::AUP => &self.aup,
            FormId::AUT => &self.aut,
            FormId::MPP => &self.mpp,
            FormId::MTT => &self.mtt,
            FormId::MPU => &self.mpu,
            FormId::MPT => &self.mpt,
            FormId::MTU => &self.mtu,
            FormId::MTP => &self.mtp,
            FormId::SPP => &self.spp,
            FormId::STT => &self.stt,
            FormId::GramU => &self.gram_u,
            FormId::GramP => &self.gram_p,
            FormId::GramT => &self.gram_t,
        }
    }

    pub fn gram(&self, field: Field) -> &CsrMatrix {
        match field {
            Field::Displacement => &self.gram_u,
            Field::Pressure => &self.gram_p,
            Field::Temperature => &self.gram_t,
        }
    }

    pub fn mass(&self, field: Field) -> &CsrMatrix {
        match field {
            Field::Displacement => &self.mass_u,
            Field::Pressure => &self.mass_p,
            Field::Temperature => &self.mass_t,
        }
    }
}

/// Symmetric 6-point rule of degree 4 on the reference triangle:
/// barycentric coordinates and weights summing to one.
#[allow(clippy::excessive_precision)]
pub const TRIANGLE_RULE_6: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445948490915964886;
    const B1: f64 = 0.108103018168070227;
    const W1: f64 = 0.223381589678011065;
    const A2: f64 = 0.091576213509770743;
    const B2: f64 = 0.816847572980458513;
    const W2: f64 = 0.109951743655321868;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// Physical quadrature points `(x, y, weight * area, barycentric)` of cell `c`.
pub fn cell_quadrature(mesh: &Mesh, c: usize) -> [([f64; 2], f64, [f64; 3]); 6] {
    let x = mesh.cell_coords(c);
    let area = mesh.cell_area(c).abs();
    TRIANGLE_RULE_6.map(|(l, w)| {
        let px = l[0] * x[0][0] + l[1] * x[1][0] + l[2] * x[2][0];
        let py = l[0] * x[0][1] + l[1] * x[1][1] + l[2] * x[2][1];
        ([px, py], w * area, l)
    })
}

/// `(f, phi_i)` over the free dofs of `space` for an `n_components`-valued `f`.
pub fn assemble_load<F>(mesh: &Mesh, space: &FieldSpace, f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> [f64; 2] + Sync,
{
    let nc = space.n_components;
    let mut out = vec![0.0; space.n_free()];
    let locals: Vec<[f64; 6]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let mut local = [0.0; 6];
            for (pt, w, l) in cell_quadrature(mesh, c) {
                let v = f(pt[0], pt[1]);
                for a in 0..3 {
                    for k in 0..nc {
                        local[a * nc + k] += w * v[k] * l[a];
                    }
                }
            }
            local
        })
        .collect();
    for (c, local) in locals.iter().enumerate() {
        let verts = mesh.cells[c];
        for a in 0..3 {
            for k in 0..nc {
                if let Some(i) = space.free_index(verts[a], k) {
                    out[i] += local[a * nc + k];
                }
            }
        }
    }
    out
}

/// Load vectors `(F, G, H)` of the three balance equations at time `t`.
pub fn assemble_loads(
    forcing: &dyn Forcing,
    t: f64,
    spaces: &SpaceSet,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mesh = spaces.mesh.as_ref();
    if forcing.is_zero() {
        return (
            vec![0.0; spaces.u.n_free()],
            vec![0.0; spaces.p.n_free()],
            vec![0.0; spaces.theta.n_free()],
        );
    }
    let f = assemble_load(mesh, &spaces.u, |x, y| forcing.eval_forcing(x, y, t).u);
    let g = assemble_load(mesh, &spaces.p, |x, y| [forcing.eval_forcing(x, y, t).p, 0.0]);
    let h = assemble_load(mesh, &spaces.theta, |x, y| {
        [forcing.eval_forcing(x, y, t).theta, 0.0]
    });
    (f, g, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::factorize;
    use crate::mesh::{build_spaces, build_unit_square_mesh, BcSpec, BoundaryKind};
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

    fn reference_triangle() -> SpaceSet {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            cells: vec![[0, 1, 2]],
            h: 2f64.sqrt(),
            cell_labels: vec![2],
            boundary_vertices: vec![0, 1, 2],
            n: 1,
        };
        let bc = BcSpec {
            u: BoundaryKind::Neumann,
            p: BoundaryKind::Neumann,
            theta: BoundaryKind::Neumann,
        };
        build_spaces(&mesh, bc)
    }

    #[test]
    fn reference_stiffness_and_mass() {
        let s = reference_triangle();
        let coeffs = CoefficientField::uniform(1.0, 1.0);
        let a = assemble_form(FormId::APP, &ex1(), &coeffs, &s, 1.0).unwrap().to_dense();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
        let m = mass_matrix(&s.mesh, &s.p, &s.p).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { 2.0 } else { 1.0 } / 24.0;
                assert!((m[(i, j)] - w).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn elasticity_is_spd_and_coercive() {
        let mesh = build_unit_square_mesh(4, None).unwrap();
        let s = build_spaces(&mesh, BcSpec::all_dirichlet());
        let pr = ex1();
        let coeffs = CoefficientField::uniform(1e-5, 1e-5);
        let auu = assemble_form(FormId::AUU, &pr, &coeffs, &s, 1.0).unwrap();
        assert!(auu.asymmetry() <= 1e-12 * auu.max_abs());
        let dense = auu.to_dense();
        assert!(dense.clone().cholesky().is_some());
        let dd = div_div_matrix(&mesh, &s.u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v: Vec<f64> = (0..s.u.n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let energy = auu.bilinear(&v, &v);
            let div2 = dd.bilinear(&v, &v);
            assert!(pr.k_dr() * div2 <= energy * (1.0 + 1e-12));
        }
    }

    #[test]
    fn coupling_duality() {
        let mesh = build_unit_square_mesh(4, None).unwrap();
        let s = build_spaces(&mesh, BcSpec::all_dirichlet());
        let b = div_coupling_matrix(&mesh, &s.p, &s.u).unwrap();
        let pr = ex1();
        let coeffs = CoefficientField::uniform(1.0, 1.0);
        let dt = 0.01;
        let aup = assemble_form(FormId::AUP, &pr, &coeffs, &s, dt).unwrap();
        let mpu = assemble_form(FormId::MPU, &pr, &coeffs, &s, dt).unwrap();
        // -AUP / alpha = B^T, MPU dt / alpha = B
        let bt = b.transpose().to_dense();
        assert!((aup.to_dense() * (-1.0 / pr.alpha) - &bt).amax() < 1e-12);
        assert!((mpu.to_dense() * (dt / pr.alpha) - b.to_dense()).amax() < 1e-12);
    }

    #[test]
    fn permeability_scaling_is_linear() {
        let mesh = build_unit_square_mesh(4, Some(crate::mesh::BandRegion { y0: 0.25, y1: 0.75 }))
            .unwrap();
        let s = build_spaces(&mesh, BcSpec::all_dirichlet());
        let c1 = CoefficientField::banded(0.3, 2.0, 1.0, 1.0);
        let c10 = CoefficientField::banded(3.0, 20.0, 1.0, 1.0);
        let a1 = assemble_form(FormId::APP, &ex1(), &c1, &s, 1.0).unwrap();
        let a10 = assemble_form(FormId::APP, &ex1(), &c10, &s, 1.0).unwrap();
        assert!((a1.scaled(10.0).to_dense() - a10.to_dense()).amax() <= 1e-14 * a10.max_abs());
        assert!(factorize(&a1).is_ok());
    }

    #[test]
    fn symmetric_forms_are_symmetric() {
        let mesh = build_unit_square_mesh(5, None).unwrap();
        let s = build_spaces(&mesh, BcSpec::clamped_insulated());
        let coeffs = CoefficientField::uniform(1e-5, 1e-5);
        for id in FormId::ALL.into_iter().filter(|f| f.is_symmetric()) {
            let a = assemble_form(id, &ex1(), &coeffs, &s, 0.1).unwrap();
            assert!(a.asymmetry() <= 1e-12 * a.max_abs(), "{id}");
        }
    }

    #[test]
    fn time_scaled_forms_need_dt() {
        let s = reference_triangle();
        let c = CoefficientField::uniform(1.0, 1.0);
        assert!(assemble_form(FormId::MPP, &ex1(), &c, &s, 0.0).is_err());
        assert!(assemble_form(FormId::APP, &ex1(), &c, &s, 0.0).is_ok());
    }

    #[test]
    fn constant_load_is_area_over_three() {
        let mesh = build_unit_square_mesh(4, None).unwrap();
        let s = build_spaces(&mesh, BcSpec::all_dirichlet());
        let l = assemble_load(&mesh, &s.p, |_, _| [1.0, 0.0]);
        let mut want = vec![0.0; s.p.n_free()];
        for c in 0..mesh.n_cells() {
            for &v in &mesh.cells[c] {
                if let Some(i) = s.p.free_index(v, 0) {
                    want[i] += mesh.cell_area(c) / 3.0;
                }
            }
        }
        for (a, b) in l.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        // every interior vertex touches six cells of area 1/32
        assert!((l[0] - 6.0 / 32.0 / 3.0).abs() < 1e-15);
        let z = assemble_load(&mesh, &s.u, |_, _| [0.0, 0.0]);
        assert!(z.iter().all(|&v| v == 0.0));
    }

    /// Conical product Gauss rule: Duffy map of a Gauss-Legendre square rule.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            out.push((0.5 * (x + 1.0), 1.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    }

    #[test]
    fn well_source_load_matches_high_order_oracle() {
        let wells = crate::problem::WellPair::default();
        let mesh = build_unit_square_mesh(100, Some(crate::mesh::BandRegion { y0: 0.35, y1: 0.65 }))
            .unwrap();
        let spaces = build_spaces(&mesh, BcSpec::clamped_insulated());
        let (_, g, _) = assemble_loads(&wells, 0.3, &spaces);
        let gl = gauss_legendre(12);
        let mut want = vec![0.0; spaces.p.n_free()];
        for c in 0..mesh.n_cells() {
            let x = mesh.cell_coords(c);
            let area = mesh.cell_area(c).abs();
            for &(s1, w1) in &gl {
                for &(s2, w2) in &gl {
                    // Duffy: (s1, s2) in unit square -> (l1, l2) = (s1, s2 (1 - s1))
                    let l1 = s1;
                    let l2 = s2 * (1.0 - s1);
                    let l0 = 1.0 - l1 - l2;
                    let w = w1 * w2 * (1.0 - s1) * 2.0 * area;
                    let px = l0 * x[0][0] + l1 * x[1][0] + l2 * x[2][0];
                    let py = l0 * x[0][1] + l1 * x[1][1] + l2 * x[2][1];
                    let f = wells.source(px, py);
                    for (a, la) in [l0, l1, l2].into_iter().enumerate() {
                        want[spaces.p.free_index(mesh.cells[c][a], 0).unwrap()] += w * f * la;
                    }
                }
            }
        }
        let err = g.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max load error {err}");
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = ex1();
        p.mu = 0.0;
        assert!(p.validate().is_err());
        let mut p = ex1();
        p.theta0 = 0.0;
        assert!(p.validate().is_err());
        assert!(ex1().validate().is_ok());
        assert_eq!(ex1().k_dr(), 200.0);
    }
}
