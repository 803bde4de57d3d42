//! Diophantine tools for rotation vectors: the `Z`-pseudo-norm, best
//! approximants and closeness constants, exact cubic-field arithmetic,
//! Jacobi-Perron expansions and random integral bases.

pub mod approx;
pub mod basis;
pub mod cubic;
pub mod jpa;

pub use approx::{
    best_approximants, best_approximants_checked, closeness_linear, closeness_simultaneous, ApproximantTable,
    BestApproximant,
};
pub use basis::{random_integral_basis, random_integral_bases, IntegralBasis};
pub use cubic::{cubic_field_vector, named_vector, CubicField, CubicFieldElement, FieldVector};
pub use jpa::{jpa_expand_exact, jpa_expand_float, JpaExpansion};

/// `||v||_Z`: the largest distance from a component to its nearest integer.
pub fn znorm(v: &[f64]) -> f64 {
    v.iter().map(|x| (x - x.round()).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn znorm_examples() {
        assert_eq!(znorm(&[0.5, 0.25]), 0.5);
        assert_eq!(znorm(&[3.0, -2.0]), 0.0);
        assert!((znorm(&[0.554958132087371, 0.246979603717467]) - 0.445041867912628).abs() < 1e-15);
        let a = 2.0 * (std::f64::consts::TAU / 7.0).cos();
        assert!((znorm(&[3.0 * (a * a - 1.0), 3.0 * (a - 1.0)]) - 0.335125603737885).abs() < 1e-14);
    }
}
