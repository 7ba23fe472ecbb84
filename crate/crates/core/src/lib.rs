//! State estimation for state-affine / linear time-varying systems
//!
//! ```text
//! ẋ = A(t) x + b(t),   y = C(t)ᵀ x
//! ```
//!
//! The main piece is the 2G+D observer: a GPEBO extension (an auxiliary copy
//! `ξ` of the plant plus its fundamental matrix `Φ_A`) turns state estimation
//! into estimating the constant `θ = x(0) − ξ(0)` from the scalar regression
//! `𝒴 = ψᵀθ`, and an interlaced gradient + DREM + LMS estimator recovers `θ`
//! exponentially fast as soon as the plant is observable on some finite
//! window. Uniform complete observability is not required.
//!
//! Modules:
//!
//! * [`numerics`]: dense matrices, RK4, Faddeev–LeVerrier, Jacobi SVD
//! * [`ltv_system`]: plant models, simulation, transition matrices, Grammians
//! * [`gpebo`]: the GPEBO extension and the regressor it produces
//! * [`gd_estimator`]: the interlaced gradient/DREM/LMS estimator
//! * [`observer`]: the composed observer and a Kalman-Bucy baseline
//! * [`analysis`]: observability, UCO, excitation and identifiability checks

// `!(x > 0.0)` is used on purpose so that NaN fails the check; index loops
// mirror the matrix notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod exec;
pub mod gd_estimator;
pub mod gpebo;
pub mod ltv_system;
pub mod numerics;
pub mod observer;

pub use error::{Error, Result};
pub use exec::Exec;
pub use numerics::{Matrix, OdeGrid};
