//! Built-in example maps.
//!
//! * [`paper_example`] - a strongly volume-expanding skew product over a
//!   degree-5 circle map with a hyperbolic fixed point of stable index 1 at
//!   the origin. Its second coordinate is
//!   `2y − (1+ε) cos²(πx) sin(2πy)/(2π)`, stored here expanded into pure
//!   sine terms so every coefficient bound is exact.
//! * [`product_example`] - a direct product `(3x, g(y))` where `g` is a
//!   degree-2 circle map with an attracting fixed point at 0. Volume
//!   expanding but not transitive: the trapping annulus around `y = 0` never
//!   escapes.
//! * [`linear`] - the linear endomorphism induced by an integer matrix.

use crate::integer_linear::IntMat2;
use crate::map_model::{FourierTerm, MapError, PeriodicField, TorusEndomorphism};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error("unknown gallery map `{0}`")]
    UnknownName(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Skew product `(5x + sin(2πx)/2π, 2y − (1+ε) cos²(πx) sin(2πy)/2π)`.
///
/// Using `cos²(πx) = (1 + cos(2πx))/2` and the product-to-sum identity, the
/// displacement of the second coordinate expands into the three sine terms
/// with wavevectors `(0,1)`, `(1,1)` and `(1,-1)` below.
///
/// For `ε < 1/6` the Jacobian exceeds 5 everywhere while the linear part is
/// `diag(5, 2)`, and the derivative at the fixed origin is
/// `diag(6, 1−ε)` - a stable index-1 fixed point, so the map cannot be
/// conjugate to its linear part.
pub fn paper_example(eps: f64) -> TorusEndomorphism {
    let x_terms = vec![FourierTerm::sin(1.0 / TAU, 1, 0)];
    let c = (1.0 + eps) / TAU;
    let y_terms = vec![
        FourierTerm::sin(-c / 2.0, 0, 1),
        FourierTerm::sin(-c / 4.0, 1, 1),
        FourierTerm::sin(c / 4.0, 1, -1),
    ];
    TorusEndomorphism::new(
        IntMat2::diag(5, 2),
        PeriodicField::new(x_terms, y_terms).expect("static terms are valid"),
        format!("paper_example(eps={eps})"),
    )
    .expect("diag(5,2) is nonsingular")
}

/// Amplitude of the `sin(2πy)` term of the product factor `g`.
pub const PRODUCT_G_AMP1: f64 = 0.8;
/// Amplitude of the `sin(4πy)` term of the product factor `g`.
pub const PRODUCT_G_AMP2: f64 = 0.4;

/// Direct product `(3x, g(y))` with
/// `g(y) = 2y − 0.8 sin(2πy)/(2π) − 0.4 sin(4πy)/(4π)`.
///
/// `g` satisfies `g(0) = 0`, `g'(0) = 0.8 < 1` (attractor at 0) and
/// `2/3 < g'(y) < 3` for all `y` (see [`product_g_prime_range`]); the product
/// therefore has Jacobian `3 g' > 2` everywhere yet keeps the fixed trapping
/// annulus around `y = 0`.
pub fn product_example() -> TorusEndomorphism {
    let y_terms = vec![
        FourierTerm::sin(-PRODUCT_G_AMP1 / TAU, 0, 1),
        FourierTerm::sin(-PRODUCT_G_AMP2 / (2.0 * TAU), 0, 2),
    ];
    TorusEndomorphism::new(
        IntMat2::diag(3, 2),
        PeriodicField::new(vec![], y_terms).expect("static terms are valid"),
        "product_example",
    )
    .expect("diag(3,2) is nonsingular")
}

/// The linear endomorphism induced by `a`.
pub fn linear(a: IntMat2) -> TorusEndomorphism {
    TorusEndomorphism::new(a, PeriodicField::zero(), format!("linear{a:?}"))
        .expect("caller must pass a nonsingular matrix")
}

/// Exact range of `g'(y) = 2 − a1 cos(2πy) − a2 cos(4πy)` for the product
/// factor, computed in closed form from the coefficients.
///
/// With `c = cos(2πy)` and `cos(4πy) = 2c² − 1` this is the quadratic
/// `q(c) = 2 + a2 − a1 c − 2 a2 c²` over `c ∈ [−1, 1]`; the extrema are at
/// the endpoints and at the interior vertex `c = −a1/(4 a2)`.
pub fn product_g_prime_range() -> (f64, f64) {
    let (a1, a2) = (PRODUCT_G_AMP1, PRODUCT_G_AMP2);
    let q = |c: f64| 2.0 + a2 - a1 * c - 2.0 * a2 * c * c;
    let mut lo = q(-1.0).min(q(1.0));
    let mut hi = q(-1.0).max(q(1.0));
    let vertex = -a1 / (4.0 * a2);
    if (-1.0..=1.0).contains(&vertex) {
        lo = lo.min(q(vertex));
        hi = hi.max(q(vertex));
    }
    (lo, hi)
}

/// The lift of the product factor `g` (1-d), used by fiber oracles.
pub fn product_g_lift(y: f64) -> f64 {
    2.0 * y - PRODUCT_G_AMP1 * (TAU * y).sin() / TAU
        - PRODUCT_G_AMP2 * (2.0 * TAU * y).sin() / (2.0 * TAU)
}

/// The lift of the restriction of [`paper_example`] to the invariant circle
/// `x = 0`: `y ↦ 2y − (1+ε) sin(2πy)/(2π)`.
pub fn paper_example_circle_lift(eps: f64, y: f64) -> f64 {
    2.0 * y - (1.0 + eps) * (TAU * y).sin() / TAU
}

/// Looks up a gallery map by its public name.
pub fn by_name(name: &str, eps: f64) -> Result<TorusEndomorphism, GalleryError> {
    match name {
        "paper_example" => Ok(paper_example(eps)),
        "product_example" => Ok(product_example()),
        "linear" => Ok(linear(IntMat2::diag(5, 2))),
        other => Err(GalleryError::UnknownName(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn paper_example_second_coordinate_matches_closed_form() {
        // The expanded sine terms must reproduce 2y − (1+ε)cos²(πx)sin(2πy)/2π.
        let eps = 0.1;
        let f = paper_example(eps);
        for &(x, y) in &[(0.13, 0.77), (0.5, 0.25), (0.9, 0.01), (0.333, 0.666)] {
            let lift = f.eval_lift([x, y]);
            let alpha = 5.0 * x + (TAU * x).sin() / TAU;
            let beta = 2.0 * y - (1.0 + eps) * (PI * x).cos().powi(2) * (TAU * y).sin() / TAU;
            assert!((lift[0] - alpha).abs() < 1e-12);
            assert!((lift[1] - beta).abs() < 1e-12, "at ({x},{y})");
        }
    }

    #[test]
    fn product_factor_constraints() {
        // g(0) = 0, g'(0) < 1, 2/3 < g' < 3 - all from the coefficients.
        assert_eq!(product_g_lift(0.0), 0.0);
        let (lo, hi) = product_g_prime_range();
        let g_prime_at_0 = 2.0 - PRODUCT_G_AMP1 - PRODUCT_G_AMP2;
        assert!((g_prime_at_0 - 0.8).abs() < 1e-12);
        assert!(g_prime_at_0 < 1.0);
        assert!(lo > 2.0 / 3.0, "min g' = {lo}");
        assert!(hi < 3.0, "max g' = {hi}");
        // Sampled derivative stays inside the closed-form range.
        for i in 0..2000 {
            let y = i as f64 / 2000.0;
            let d = 2.0 - PRODUCT_G_AMP1 * (TAU * y).cos() - PRODUCT_G_AMP2 * (2.0 * TAU * y).cos();
            assert!(d >= lo - 1e-12 && d <= hi + 1e-12);
        }
    }

    #[test]
    fn product_example_jacobian_dips_below_three() {
        // min 3 g' = 2.4 < 3 = |lambda_1|: strong volume expansion fails.
        let f = product_example();
        let j = f.jacobian_det([0.3, 0.0]);
        assert!((j - 3.0 * 0.8).abs() < 1e-9);
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(
            by_name("mystery", 0.1),
            Err(GalleryError::UnknownName(_))
        ));
    }
}
