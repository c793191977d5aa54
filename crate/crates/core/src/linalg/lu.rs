//! Sparse direct solver: reverse Cuthill-McKee ordering followed by an
//! envelope (skyline) LU factorization without pivoting.
//!
//! No pivoting means the factorization exists only when every leading
//! principal minor of the reordered matrix is nonsingular. This holds for
//! SPD matrices and for the quasi-definite systems produced by the coupled
//! scheme (SPD mechanics block, negative-definite flow/heat block after row
//! scaling), which are the only systems factorized here.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// A pivot smaller than this fraction of its row's largest entry is rejected.
const PIVOT_TOLERANCE: f64 = 1e-14;

/// Reusable LU factors of one sparse matrix. Immutable after construction, so
/// concurrent `solve` calls from several threads are safe.
#[derive(Clone, Debug)]
pub struct Factorization {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    diag: Vec<f64>,
}

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity graph.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let bfs_levels = |start: usize, mask: &[bool]| -> Vec<Vec<usize>> {
        let mut seen = mask.to_vec();
        let mut levels = vec![vec![start]];
        seen[start] = true;
        loop {
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    };

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let mut start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        // pseudo-peripheral node search
        let mut depth = bfs_levels(start, &visited).len();
        for _ in 0..8 {
            let levels = bfs_levels(start, &visited);
            let cand = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&v| (degree[v], v))
                .unwrap();
            let d = bfs_levels(cand, &visited).len();
            if d > depth {
                depth = d;
                start = cand;
            } else {
                break;
            }
        }

        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_unstable_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factorizes a square sparse matrix.
pub fn factorize(a: &CsrMatrix) -> Result<Factorization> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "factorize: matrix must be square",
            expected: n,
            got: a.ncols(),
        });
    }
    let perm = reverse_cuthill_mckee(a);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }

    // envelope of the symmetrized permuted pattern
    let mut first: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for (j, _) in a.row(i) {
            let (pi, pj) = (inv[i], inv[j]);
            let (hi, lo) = if pi > pj { (pi, pj) } else { (pj, pi) };
            first[hi] = first[hi].min(lo);
        }
    }
    let mut offsets = vec![0usize; n + 1];
    for i in 0..n {
        offsets[i + 1] = offsets[i] + (i - first[i]);
    }
    let len = offsets[n];
    let mut lower = vec![0.0; len];
    let mut upper = vec![0.0; len];
    let mut diag = vec![0.0; n];
    let mut row_scale = vec![0.0f64; n];

    for i in 0..n {
        for (j, v) in a.row(i) {
            let (pi, pj) = (inv[i], inv[j]);
            row_scale[pi] = row_scale[pi].max(v.abs());
            if pi == pj {
                diag[pi] = v;
            } else if pj < pi {
                lower[offsets[pi] + pj - first[pi]] = v;
            } else {
                upper[offsets[pj] + pi - first[pj]] = v;
            }
        }
    }

    for i in 0..n {
        let fi = first[i];
        let oi = offsets[i];
        let (lprev, lcur) = lower.split_at_mut(oi);
        let (uprev, ucur) = upper.split_at_mut(oi);
        for j in fi..i {
            let fj = first[j];
            let oj = offsets[j];
            let m = fi.max(fj);
            // U[j][i]
            let lj = &lprev[oj + (m - fj)..oj + (j - fj)];
            let ui = &ucur[(m - fi)..(j - fi)];
            let s = dot(lj, ui);
            ucur[j - fi] -= s;
            // L[i][j]
            let li = &lcur[(m - fi)..(j - fi)];
            let uj = &uprev[oj + (m - fj)..oj + (j - fj)];
            let s = dot(li, uj);
            lcur[j - fi] = (lcur[j - fi] - s) / diag[j];
        }
        let width = i - fi;
        diag[i] -= dot(&lcur[..width], &ucur[..width]);
        let d = diag[i];
        if !(d.abs() > PIVOT_TOLERANCE * row_scale[i]) || !d.is_finite() {
            return Err(Error::SingularPivot {
                row: perm[i],
                pivot: d,
            });
        }
    }

    Ok(Factorization {
        n,
        perm,
        first,
        offsets,
        lower,
        upper,
        diag,
    })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of both triangular factors.
    pub fn envelope_size(&self) -> usize {
        2 * self.lower.len() + self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "solve",
                expected: self.n,
                got: b.len(),
            });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.lower[self.offsets[i]..self.offsets[i + 1]];
            y[i] -= dot(row, &y[fi..i]);
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let xi = y[i] / self.diag[i];
            y[i] = xi;
            let col = &self.upper[self.offsets[i]..self.offsets[i + 1]];
            for (yk, u) in y[fi..i].iter_mut().zip(col) {
                *yk -= u * xi;
            }
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        r / nb.max(f64::EPSILON)
    }

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        b.transpose() * &b + DMatrix::identity(n, n)
    }

    #[test]
    fn identity_solve() {
        let f = factorize(&CsrMatrix::identity(3)).unwrap();
        assert_eq!(f.solve(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let x = factorize(&a).unwrap().solve(&[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_inverse() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let x = factorize(&a).unwrap().solve(&[1.0; 5]).unwrap();
        for (k, xk) in x.iter().enumerate() {
            assert!((xk - 1.0 / (k + 1) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn seeded_spd_residuals() {
        for seed in 0..100 {
            let a = CsrMatrix::from_dense(&random_spd(50, seed));
            let f = factorize(&a).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = f.solve(&b).unwrap();
            assert!(residual(&a, &x, &b) <= 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn sparse_nonsymmetric_banded() {
        // convection-diffusion-like tridiagonal operator plus long-range coupling
        let n = 200;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 4.0);
            if i > 0 {
                b.push(i, i - 1, -1.5);
            }
            if i + 1 < n {
                b.push(i, i + 1, -0.5);
            }
            if i + 17 < n {
                b.push(i, i + 17, 0.3);
                b.push(i + 17, i, -0.2);
            }
        }
        let a = b.build();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = factorize(&a).unwrap().solve(&rhs).unwrap();
        assert!(residual(&a, &x, &rhs) <= 1e-13);
    }

    #[test]
    fn singular_pivot_is_named() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0],
        ));
        match factorize(&a) {
            Err(Error::SingularPivot { row, .. }) => assert!(row == 1 || row == 2),
            other => panic!("expected singular pivot, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let f = factorize(&CsrMatrix::identity(3)).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn concurrent_solves_share_factorization() {
        let a = CsrMatrix::from_dense(&random_spd(40, 7));
        let f = factorize(&a).unwrap();
        let rhs: Vec<Vec<f64>> = (0..8)
            .map(|k| (0..40).map(|i| ((i * (k + 1)) as f64).cos()).collect())
            .collect();
        let serial: Vec<Vec<f64>> = rhs.iter().map(|b| f.solve(b).unwrap()).collect();
        let parallel: Vec<Vec<f64>> = std::thread::scope(|s| {
            let handles: Vec<_> = rhs.iter().map(|b| s.spawn(|| f.solve(b).unwrap())).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(serial, parallel);
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = CsrMatrix::from_dense(&random_spd(30, 3));
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..30).collect::<Vec<_>>());
    }
}
