//! Fractional calculus with classical and Caputo derivatives.
//!
//! * [`fracops`]: Riemann-Liouville integrals and derivatives, Caputo
//!   derivatives, and the fractional integration-by-parts check.
//! * [`variational`]: actions `∫ L(t, q, q̇, C_a D^α q) dt`, their
//!   Euler-Lagrange residual, and extremals by direct transcription.
//! * [`noether`]: symmetry groups, invariance checks, the transfer series and
//!   Noether quantities, with drift diagnostics.
//! * [`friction`]: the fractional linear-friction model.
//! * [`optctrl`]: optimal control with classical and Caputo dynamics.

pub mod calculus;
pub mod error;
pub mod friction;
pub mod fracops;
pub mod gamma;
pub mod grid;
pub mod noether;
pub mod optctrl;
pub mod optimize;
pub mod variational;

pub use error::{Error, Result};
pub use fracops::FractionalOrder;
pub use grid::{Grid, GridFunction};
