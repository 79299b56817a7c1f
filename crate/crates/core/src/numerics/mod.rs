//! Special functions and adaptive quadrature.
//!
//! Everything here is a pure function of its arguments.

pub mod bessel;
pub mod erf;
pub mod gamma;
pub mod quadrature;

pub use bessel::{bessel_i, bessel_i_scaled};
pub use erf::{erf, erf_complex, erf_inv, erfc, normal_cdf, normal_pdf};
pub use gamma::{factorial, lower_gamma_int, upper_gamma_int};
pub use quadrature::{integrate, Domain, Quadrature, QuadratureSpec};

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how a caller chunked the work that produced them.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
