//! Averaging analysis for T-periodic ODEs in standard form `x' = eps * F(t, x, eps)`.
//!
//! The crate computes averaged functions of a truncated expansion
//! `x' = sum_i eps^i F_i(t, x) + eps^(k+1) R(t, x, eps)`, certifies their zeros
//! through Brouwer degree evidence, runs the boundary checks behind the
//! existence theorems for periodic orbits, and validates predicted orbits by
//! direct integration of the full (possibly non-Lipschitz) field.
//!
//! Modules follow the pipeline:
//!
//! * [`expr`] — arithmetic expression DSL used to write field components,
//! * [`problem`] — problem definition (field expansion, domain, epsilon range),
//! * [`averaging`] — averaged functions and boundary/margin checks,
//! * [`degree`] — Brouwer degree computation with refinement evidence,
//! * [`flow`] — fixed-step integration, period maps, orbit certification and
//!   the confinement-hypothesis falsification search,
//! * [`casestudy`] — the non-Lipschitz perturbed harmonic oscillator family.
//!
//! All numerics are generic over the scalar type through the [`Real`] trait;
//! `f64` is the working precision of the CLI and of the type aliases exported
//! at the crate root.

pub mod averaging;
pub mod casestudy;
pub mod degree;
mod error;
pub mod expr;
pub mod flow;
pub mod problem;
pub mod report;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Scalar type the numerical kernels are generic over.
///
/// `f32` and `f64` implement it; `f64` is the default working precision.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    /// Widens to `f64` (used for reporting and serialization).
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Expression64 = expr::Expression<f64>;
pub type Expression32 = expr::Expression<f32>;
