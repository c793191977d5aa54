//! Sparse and dense linear-algebra kernels.

mod dense;
mod eig;
mod lu;
mod sparse;

pub use dense::condition_number_2;
pub use eig::{sym_eig, SymEig, SYMMETRY_TOLERANCE};
pub use lu::{factorize, reverse_cuthill_mckee, Factorization};
pub use sparse::{CsrMatrix, TripletBuilder};

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `sqrt(xᵀ G x)` for an SPD Gram matrix `G`.
pub fn gram_norm(g: &CsrMatrix, x: &[f64]) -> f64 {
    g.bilinear(x, x).max(0.0).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
