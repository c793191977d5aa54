//! Proper orthogonal decomposition under the H1 inner product.
//!
//! Modes come from the method of snapshots, `C = S^T G S`, `C v = nu v`,
//! `phi = nu^{-1/2} S v`. When there are more snapshots than free dofs the same
//! modes are obtained from the spatial operator `R S S^T R^T` with `G = R^T R`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hf::State;
use crate::linalg::{sym_eig, CsrMatrix};
use crate::mesh::Field;

/// Snapshot columns of one field.
#[derive(Clone, Debug)]
pub struct SnapshotSet {
    pub field: Field,
    pub data: DMatrix<f64>,
}

impl SnapshotSet {
    pub fn from_states<'a>(field: Field, states: impl IntoIterator<Item = &'a State>) -> Self {
        let cols: Vec<&[f64]> = states.into_iter().map(|s| s.field(field)).collect();
        let n = cols.first().map_or(0, |c| c.len());
        let mut data = DMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            data.column_mut(j).copy_from_slice(c);
        }
        SnapshotSet { field, data }
    }

    pub fn n_dofs(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    /// Appends the columns of `other`.
    pub fn extend(&mut self, other: &SnapshotSet) -> Result<()> {
        if other.field != self.field || (other.n_dofs() != self.n_dofs() && !self.is_empty()) {
            return Err(Error::DimensionMismatch {
                context: "snapshot concatenation",
                expected: self.n_dofs(),
                got: other.n_dofs(),
            });
        }
        if self.is_empty() {
            self.data = other.data.clone();
            return Ok(());
        }
        let m = self.len();
        let data = std::mem::replace(&mut self.data, DMatrix::zeros(0, 0));
        let mut data = data.resize_horizontally(m + other.len(), 0.0);
        data.columns_mut(m, other.len()).copy_from(&other.data);
        self.data = data;
        Ok(())
    }
}

/// `C[n][m] = s_n^T G s_m`, unsymmetrized.
pub fn build_correlation(snaps: &SnapshotSet, gram: &CsrMatrix) -> Result<DMatrix<f64>> {
    if snaps.is_empty() {
        return Err(Error::EmptyBasis { field: snaps.field.name() });
    }
    if gram.nrows() != snaps.n_dofs() {
        return Err(Error::DimensionMismatch {
            context: "correlation matrix",
            expected: gram.nrows(),
            got: snaps.n_dofs(),
        });
    }
    let gs = gram.mul_dense(&snaps.data);
    let m = snaps.len();
    let cols: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let gj = gs.column(j);
            (0..m).map(|i| snaps.data.column(i).dot(&gj)).collect()
        })
        .collect();
    Ok(DMatrix::from_fn(m, m, |i, j| cols[j][i]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PodRoute {
    /// Snapshots when there are at most as many snapshots as dofs, spatial otherwise.
    #[default]
    Auto,
    Snapshots,
    Spatial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodOptions {
    pub r_max: usize,
    /// Modes with `nu_k / nu_0 <= eig_floor` are dropped; `0` keeps every positive eigenvalue.
    pub eig_floor: f64,
    pub route: PodRoute,
}

impl PodOptions {
    pub fn new(r_max: usize) -> Self {
        PodOptions {
            r_max,
            eig_floor: 1e-12,
            route: PodRoute::Auto,
        }
    }

    pub fn without_floor(mut self) -> Self {
        self.eig_floor = 0.0;
        self
    }
}

/// Eigenvalue floor matching the usual numerical rank of an `n x m` matrix,
/// `sigma_k > max(n, m) eps sigma_0`.
pub fn numerical_rank_floor(n: usize, m: usize) -> f64 {
    (n.max(m) as f64 * f64::EPSILON).powi(2)
}

/// Retained modes of one field and the full computed spectrum.
#[derive(Clone, Debug)]
pub struct FieldBasis {
    pub field: Field,
    /// `n_free x r`, columns H1-orthonormal.
    pub modes: DMatrix<f64>,
    /// All eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
}

impl FieldBasis {
    pub fn r(&self) -> usize {
        self.modes.ncols()
    }

    pub fn n_dofs(&self) -> usize {
        self.modes.nrows()
    }

    /// `nu_k / nu_0` over the whole computed spectrum.
    pub fn normalized_spectrum(&self) -> Vec<f64> {
        pod_spectrum_report(&self.eigenvalues)
    }

    /// First `r` modes (all of them if fewer are available).
    pub fn truncated(&self, r: usize) -> FieldBasis {
        let r = r.min(self.r());
        FieldBasis {
            field: self.field,
            modes: self.modes.columns(0, r).into_owned(),
            eigenvalues: self.eigenvalues.clone(),
        }
    }

    /// `max |Phi^T G Phi - I|`.
    pub fn orthonormality_defect(&self, gram: &CsrMatrix) -> f64 {
        let c = gram.congruence(&self.modes, &self.modes);
        (c - DMatrix::identity(self.r(), self.r())).amax()
    }

    pub fn lift(&self, coeffs: &[f64]) -> Vec<f64> {
        (&self.modes * nalgebra::DVector::from_column_slice(coeffs))
            .as_slice()
            .to_vec()
    }
}

pub fn pod_spectrum_report(eigenvalues: &[f64]) -> Vec<f64> {
    match eigenvalues.first() {
        Some(&nu0) if nu0 > 0.0 => eigenvalues.iter().map(|v| v / nu0).collect(),
        _ => eigenvalues.to_vec(),
    }
}

/// One basis per field.
#[derive(Clone, Debug)]
pub struct ReducedBasis {
    pub u: FieldBasis,
    pub p: FieldBasis,
    pub theta: FieldBasis,
}

impl ReducedBasis {
    pub fn field(&self, f: Field) -> &FieldBasis {
        match f {
            Field::Displacement => &self.u,
            Field::Pressure => &self.p,
            Field::Temperature => &self.theta,
        }
    }

    pub fn ranks(&self) -> (usize, usize, usize) {
        (self.u.r(), self.p.r(), self.theta.r())
    }

    /// Same `r` for every field (capped by what each field retained).
    pub fn truncated(&self, r: usize) -> ReducedBasis {
        self.truncated_per_field(r, r, r)
    }

    pub fn truncated_per_field(&self, ru: usize, rp: usize, rt: usize) -> ReducedBasis {
        ReducedBasis {
            u: self.u.truncated(ru),
            p: self.p.truncated(rp),
            theta: self.theta.truncated(rt),
        }
    }

    /// Trains one basis per field from the given states.
    pub fn from_states<'a, I>(
        states: I,
        grams: [&CsrMatrix; 3],
        opts: &PodOptions,
    ) -> Result<ReducedBasis>
    where
        I: IntoIterator<Item = &'a State> + Clone,
    {
        let sets: Vec<SnapshotSet> = Field::ALL.iter().map(|&f| SnapshotSet::from_states(f, states.clone())).collect();
        let bases: Vec<FieldBasis> = sets
            .par_iter()
            .zip(grams.par_iter())
            .map(|(snaps, g)| compute_modes(snaps, g, opts))
            .collect::<Result<_>>()?;
        let mut it = bases.into_iter();
        Ok(ReducedBasis {
            u: it.next().expect("three fields"),
            p: it.next().expect("three fields"),
            theta: it.next().expect("three fields"),
        })
    }
}

fn fix_sign(col: &mut nalgebra::DVectorViewMut<'_, f64>) {
    let pivot = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        col.neg_mut();
    }
}

fn retained(eigenvalues: &[f64], opts: &PodOptions) -> usize {
    let nu0 = eigenvalues.first().copied().unwrap_or(0.0);
    eigenvalues
        .iter()
        .take(opts.r_max)
        .take_while(|&&v| v > 0.0 && v > opts.eig_floor * nu0)
        .count()
}

pub fn compute_modes(snaps: &SnapshotSet, gram: &CsrMatrix, opts: &PodOptions) -> Result<FieldBasis> {
    if !(opts.eig_floor >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "eig_floor",
            reason: format!("must be nonnegative, got {}", opts.eig_floor),
        });
    }
    let field = snaps.field;
    if snaps.is_empty() || snaps.n_dofs() == 0 {
        return Err(Error::EmptyBasis { field: field.name() });
    }
    let spatial = match opts.route {
        PodRoute::Auto => snaps.len() > snaps.n_dofs(),
        PodRoute::Snapshots => false,
        PodRoute::Spatial => true,
    };
    let (eigenvalues, modes) = if spatial {
        spatial_modes(snaps, gram, opts)?
    } else {
        snapshot_modes(snaps, gram, opts)?
    };
    if modes.ncols() == 0 {
        return Err(Error::EmptyBasis { field: field.name() });
    }
    Ok(FieldBasis { field, modes, eigenvalues })
}

fn snapshot_modes(
    snaps: &SnapshotSet,
    gram: &CsrMatrix,
    opts: &PodOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let c = build_correlation(snaps, gram)?;
    let eig = sym_eig(&c)?;
    let r = retained(&eig.values, opts);
    let mut modes = &snaps.data * eig.vectors.columns(0, r);
    for k in 0..r {
        let mut col = modes.column_mut(k);
        col /= eig.values[k].sqrt();
        fix_sign(&mut col);
    }
    Ok((eig.values, modes))
}

fn spatial_modes(
    snaps: &SnapshotSet,
    gram: &CsrMatrix,
    opts: &PodOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if gram.nrows() != snaps.n_dofs() {
        return Err(Error::DimensionMismatch {
            context: "spatial POD",
            expected: gram.nrows(),
            got: snaps.n_dofs(),
        });
    }
    // G = L L^T, A = L^T S = U Sigma V^T; modes solve L^T phi = u_k.
    // The SVD keeps nu_k = sigma_k^2 accurate far below eps * nu_0.
    let chol = gram
        .to_dense()
        .cholesky()
        .ok_or(Error::NotSymmetric { asymmetry: gram.asymmetry() })?;
    let lt = chol.l().transpose();
    let a = &lt * &snaps.data;
    let svd = a.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    let r = retained(&values, opts);
    let w = DMatrix::from_fn(lt.nrows(), r, |i, k| u[(i, order[k])]);
    let mut modes = lt
        .solve_upper_triangular(&w)
        .ok_or(Error::SingularReduced { context: "spatial POD back substitution", condition: f64::INFINITY })?;
    for k in 0..r {
        fix_sign(&mut modes.column_mut(k));
    }
    Ok((values, modes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::gram_matrix;
    use crate::mesh::{build_spaces, build_unit_square_mesh, BcSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gram() -> CsrMatrix {
        let mesh = build_unit_square_mesh(4, None).unwrap();
        let s = build_spaces(&mesh, BcSpec::all_dirichlet());
        gram_matrix(&mesh, &s.p).unwrap()
    }

    fn random_snaps(n: usize, m: usize, rank: usize, seed: u64) -> SnapshotSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, rank, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(rank, m, |_, _| rng.gen_range(-1.0..1.0));
        SnapshotSet { field: Field::Pressure, data: a * b }
    }

    #[test]
    fn single_snapshot() {
        let g = gram();
        let s = random_snaps(9, 1, 1, 1);
        let c = build_correlation(&s, &g).unwrap();
        let norm2 = g.bilinear(s.data.as_slice(), s.data.as_slice());
        assert!((c[(0, 0)] - norm2).abs() < 1e-14 * norm2);
        let b = compute_modes(&s, &g, &PodOptions::new(5)).unwrap();
        assert_eq!(b.r(), 1);
        assert!((b.eigenvalues[0] - norm2).abs() < 1e-13 * norm2);
        let scaled = &s.data / norm2.sqrt();
        let d1 = (&b.modes.column(0) - scaled.column(0)).amax();
        let d2 = (&b.modes.column(0) + scaled.column(0)).amax();
        assert!(d1.min(d2) < 1e-13);
        assert_eq!(b.normalized_spectrum(), vec![1.0]);
    }

    #[test]
    fn orthogonal_snapshots_give_diagonal_correlation() {
        let g = CsrMatrix::identity(3);
        let data = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        let c = build_correlation(&SnapshotSet { field: Field::Pressure, data }, &g).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]));
    }

    #[test]
    fn duplicated_snapshot_is_rank_one() {
        let g = gram();
        let s = random_snaps(9, 1, 1, 2);
        let mut d = s.clone();
        d.extend(&s).unwrap();
        assert_eq!(d.len(), 2);
        let b = compute_modes(&d, &g, &PodOptions::new(5)).unwrap();
        assert_eq!(b.r(), 1);
    }

    #[test]
    fn routes_agree() {
        let g = gram();
        let s = random_snaps(9, 7, 4, 3);
        let mut o = PodOptions::new(10);
        o.route = PodRoute::Snapshots;
        let a = compute_modes(&s, &g, &o).unwrap();
        o.route = PodRoute::Spatial;
        let b = compute_modes(&s, &g, &o).unwrap();
        assert_eq!(a.r(), 4);
        assert_eq!(b.r(), 4);
        for k in 0..4 {
            assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() < 1e-10 * a.eigenvalues[0]);
        }
        assert!((&a.modes - &b.modes).amax() < 1e-8);
        assert!(a.orthonormality_defect(&g) < 1e-10);
        assert!(b.orthonormality_defect(&g) < 1e-10);
    }

    #[test]
    fn full_rank_projection_reproduces_snapshots() {
        let g = gram();
        let s = random_snaps(9, 6, 3, 4);
        let b = compute_modes(&s, &g, &PodOptions::new(10)).unwrap();
        let gd = g.to_dense();
        let proj = &b.modes * (b.modes.transpose() * &gd * &s.data);
        assert!((&proj - &s.data).amax() <= 1e-8 * s.data.amax());
    }

    #[test]
    fn empty_basis_is_an_error() {
        let g = gram();
        let s = SnapshotSet { field: Field::Temperature, data: DMatrix::zeros(9, 3) };
        assert!(matches!(compute_modes(&s, &g, &PodOptions::new(3)), Err(Error::EmptyBasis { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn scaling_snapshots_scales_eigenvalues(seed in 0u64..1000, c in 0.01f64..100.0) {
            let g = gram();
            let s = random_snaps(9, 5, 3, seed);
            let scaled = SnapshotSet { field: s.field, data: &s.data * c };
            let a = compute_modes(&s, &g, &PodOptions::new(3)).unwrap();
            let b = compute_modes(&scaled, &g, &PodOptions::new(3)).unwrap();
            prop_assert_eq!(a.r(), b.r());
            for k in 0..a.r() {
                prop_assert!((b.eigenvalues[k] - c * c * a.eigenvalues[k]).abs() <= 1e-9 * c * c * a.eigenvalues[0]);
                let d = (&a.modes.column(k) - &b.modes.column(k)).amax()
                    .min((&a.modes.column(k) + &b.modes.column(k)).amax());
                prop_assert!(d < 1e-6);
            }
        }
    }
}
