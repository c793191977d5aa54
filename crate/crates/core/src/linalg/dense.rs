use nalgebra::DMatrix;

/// Spectral condition number `σ_max / σ_min`.
///
/// Returns `f64::INFINITY` when the smallest singular value vanishes or the
/// ratio overflows.
pub fn condition_number_2(a: &DMatrix<f64>) -> f64 {
    assert!(a.nrows() > 0 && a.ncols() > 0, "condition number of an empty matrix");
    if a.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        return f64::INFINITY;
    }
    let k = max / min;
    if k.is_finite() {
        k
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;

    #[test]
    fn identity_and_diagonal() {
        assert!((condition_number_2(&DMatrix::identity(4, 4)) - 1.0).abs() < 1e-14);
        let d = DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 0.1]);
        assert!((condition_number_2(&d) - 100.0).abs() < 1e-10);
    }

    #[test]
    fn hilbert_matches_normal_equations_oracle() {
        let h = DMatrix::from_fn(4, 4, |i, j| 1.0 / (i + j + 1) as f64);
        // oracle: singular values from the eigenvalues of HᵀH
        let eig = sym_eig(&(h.transpose() * &h)).unwrap();
        let oracle = (eig.values[0] / eig.values[3]).sqrt();
        let k = condition_number_2(&h);
        assert!((k - oracle).abs() / oracle < 1e-6);
        assert!((k - 1.5514e4).abs() / 1.5514e4 < 1e-3);
    }

    #[test]
    fn singular_is_infinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(condition_number_2(&a) > 1e15);
        assert_eq!(condition_number_2(&DMatrix::zeros(2, 2)), f64::INFINITY);
    }
}
