//! Validated numerics for smooth endomorphisms of the 2-torus.
//!
//! The crate represents torus maps as an integer linear part plus a
//! trigonometric-polynomial displacement, which keeps derivatives, sup bounds
//! and Lipschitz constants exact-by-coefficients. On top of that it provides:
//!
//! * [`map_model`] - map evaluation on lifts, analytic derivatives, inverse
//!   branches via Newton iteration;
//! * [`integer_linear`] - exact 2×2 integer linear algebra (integer spectra,
//!   unimodular triangularization) and a constructive Blichfeldt/pigeonhole
//!   search over exact rational cell sets;
//! * [`ph_certifier`] - grid certificates with Lipschitz slack for cone-field
//!   invariance/expansion and strong volume expansion;
//! * [`semiconjugacy`] - the semiconjugacy to the linear part with certified
//!   error, fiber diameter estimates and the conjugacy/annulus dichotomy probe;
//! * [`transitivity`] - region iteration with lift bookkeeping, doubly-essential
//!   and covering witnesses, and the effective essential-iterate bound;
//! * [`directions`] - unstable/center direction probes over pre-orbits.
//!
//! Certified verdicts are mathematically rigorous up to floating-point
//! evaluation of closed-form quantities; searches and fiber estimates are
//! labelled as numerical evidence and carry the witnesses that back them.
//!
//! ```
//! use torusendo_core::{gallery, ph_certifier, semiconjugacy};
//!
//! // A volume-expanding skew product with linear part diag(5, 2).
//! let f = gallery::paper_example(0.1);
//!
//! // |det Df| > 5 everywhere, proved on a grid with Lipschitz slack.
//! let cert = ph_certifier::certify_strong_volume_expansion(&f, 256, 1).unwrap();
//! assert!(cert.is_certified());
//!
//! // The semiconjugacy onto the linear part stays kappa-close to the
//! // identity and fixes the origin.
//! let params = semiconjugacy::kappa_bound(&f).unwrap();
//! let h0 = semiconjugacy::semiconj_eval(&f, [0.0, 0.0], 1e-8).unwrap();
//! assert!(h0[0].abs() < 1e-8 && h0[1].abs() < 1e-8);
//! assert!(params.kappa < 0.2);
//! ```

pub mod directions;
pub mod gallery;
pub mod integer_linear;
pub mod map_model;
pub mod mat;
pub mod parallel;
pub mod ph_certifier;
pub mod rat;
pub mod rng;
pub mod semiconjugacy;
pub mod transitivity;

pub use integer_linear::IntMat2;
pub use map_model::{FourierTerm, Mat2, PeriodicField, TorusEndomorphism, TrigKind};
