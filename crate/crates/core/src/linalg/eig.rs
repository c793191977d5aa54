//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! the implicit QL algorithm with Wilkinson-type shifts.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Relative asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

pub fn sym_eig(c: &DMatrix<f64>) -> Result<SymEig> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "sym_eig: matrix must be square",
            expected: n,
            got: c.ncols(),
        });
    }
    if n == 0 {
        return Ok(SymEig {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let scale = c.amax();
    let asym = (c - c.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }

    // column-major n x n work array: v[j * n + i] = V[i][j]
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            v[j * n + i] = 0.5 * (c[(i, j)] + c[(j, i)]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    ql_implicit(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = &v[src * n..(src + 1) * n];
        // largest-magnitude entry positive
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    Ok(SymEig { values, vectors })
}

#[inline]
fn at(n: usize, i: usize, j: usize) -> usize {
    j * n + i
}

/// Householder reduction to tridiagonal form, accumulating the transform in `v`.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = 0.0;
                v[at(n, j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(n, j, i)] = f;
                g = e[j] + v[at(n, j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(n, k, j)] * d[k];
                    e[k] += v[at(n, k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(n, k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[at(n, n - 1, i)] = v[at(n, i, i)];
        v[at(n, i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(n, k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(n, k, i + 1)] * v[at(n, k, j)];
                }
                for k in 0..=i {
                    v[at(n, k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(n, k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
        v[at(n, n - 1, j)] = 0.0;
    }
    v[at(n, n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iteration on the tridiagonal `(d, e)`, rotating the columns of `v`.
fn ql_implicit(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NotSymmetric { asymmetry: f64::NAN });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut left[i * n..];
                    let col_i1 = &mut right[..n];
                    for (a, b) in col_i.iter_mut().zip(col_i1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal() {
        let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let r = sym_eig(&c).unwrap();
        assert_eq!(r.values, vec![3.0, 2.0, 1.0]);
        assert!((r.vectors[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((r.vectors[(2, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn classic_two_by_two() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = sym_eig(&c).unwrap();
        assert!((r.values[0] - 3.0).abs() < 1e-14);
        assert!((r.values[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.vectors[(0, 0)].abs() - s).abs() < 1e-14);
        assert!((r.vectors[(0, 0)] - r.vectors[(1, 0)]).abs() < 1e-14);
        assert!((r.vectors[(0, 1)] + r.vectors[(1, 1)]).abs() < 1e-14);
    }

    #[test]
    fn seeded_random_residual_and_orthonormality() {
        for (seed, n) in [(1u64, 20usize), (2, 1), (3, 2), (4, 57)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let c = &b + b.transpose();
            let r = sym_eig(&c).unwrap();
            let norm = c.norm();
            for k in 0..n {
                let v = r.vectors.column(k);
                let res = (&c * v - r.values[k] * v).norm();
                assert!(res <= 1e-10 * norm, "residual {res}");
                if k > 0 {
                    assert!(r.values[k - 1] >= r.values[k]);
                }
            }
            let g = r.vectors.transpose() * &r.vectors;
            assert!((g - DMatrix::identity(n, n)).amax() <= 1e-10);
            let trace: f64 = (0..n).map(|i| c[(i, i)]).sum();
            let sum: f64 = r.values.iter().sum();
            assert!((trace - sum).abs() <= 1e-10 * norm);
        }
    }

    #[test]
    fn rank_deficient_gram() {
        let s = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        let c = s.transpose() * &s;
        let r = sym_eig(&c).unwrap();
        assert!((r.values[0] - 10.0).abs() < 1e-13);
        assert!(r.values[1].abs() < 1e-13);
    }

    #[test]
    fn rejects_asymmetric() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&c), Err(Error::NotSymmetric { .. })));
    }
}
