//! Numerical machinery for isomonodromic deformations of 2x2 rational
//! connections on the Riemann sphere.
//!
//! The crate covers the full pipeline from a connection description to
//! theta-divisor analysis:
//!
//! - [`connection`]: the data model for rational connections with Fuchsian
//!   and Poincare-rank-1 irregular poles, validation and evaluation.
//! - [`continuation`]: transport of fundamental solutions along complex
//!   paths, monodromy matrices, normalized matrix logarithms,
//!   irreducibility and apparent-singularity checks.
//! - [`deformation`]: right-hand sides and path integration of the
//!   isomonodromic deformation equations in the pole positions, with
//!   propagation of the infinity-expansion coefficients.
//! - [`gauge`]: the tau value `u1`, the polynomial gauge between the
//!   auxiliary (residue sum `K = diag(-1,1)`) and trivial (residue sum `0`)
//!   normalizations, and the constructions mapping back and forth.
//! - [`theta`]: disc scans for zeros of `u1` by the argument principle,
//!   Newton refinement, pole-order fits of the recovered family, and the
//!   bundle-splitting bound gate.
//! - [`fixtures`]: seeded random configuration generators used by tests
//!   and the CLI.

pub mod config;
pub mod connection;
pub mod continuation;
pub mod deformation;
pub mod error;
pub mod fixtures;
pub mod gauge;
pub mod mat2;
pub mod ode;
pub mod path;
pub mod report;
pub mod schema;
pub mod theta;

pub use config::Tolerances;
pub use connection::{LocalFormalData, Normalization, RationalConnection, ValidationReport};
pub use continuation::MonodromyData;
pub use deformation::{DeformDiagnostics, DeformOutcome, DeformationPath, DeformationState};
pub use error::{Error, Result};
pub use gauge::GaugeMap;
pub use path::ComplexPath;
pub use theta::{ScanOutcome, ThetaZero};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
/// Dense 2x2 complex matrix used for all coefficient and solution data.
pub type CMat2 = nalgebra::Matrix2<C64>;
