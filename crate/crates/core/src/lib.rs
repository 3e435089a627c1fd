//! Numerical laboratory for random entire functions of the form
//! f(z) = sum_n X_n z^n / n! with i.i.d. complex coefficients.
//!
//! The crate covers five coupled subsystems: coefficient laws and their
//! tail behaviour ([`dist`]), scaled Taylor evaluation with certified
//! truncation ([`series`]), orbit-density and event-probability machinery
//! for the differentiation operator ([`hypercyclicity`]), growth-rate
//! diagnostics against optimal-order envelopes ([`growth`]), and the
//! radius-of-convergence dichotomy ([`radius`]).
//!
//! Everything is deterministic: sampling is a pure function of
//! (law, seed, index), so any figure or table can be regenerated bit for
//! bit from its config.

pub mod acceptance;
pub mod dist;
pub mod error;
pub mod growth;
pub mod hypercyclicity;
pub mod math;
pub mod radius;
pub mod series;

pub use error::{Error, Result};
