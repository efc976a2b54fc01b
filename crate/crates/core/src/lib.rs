//! Classical simulation of nearest-neighbour matchgate circuits.
//!
//! Circuits are compiled to their linear action on Majorana operators; outcome
//! probabilities are Pfaffians of vacuum contraction matrices. The crate covers
//! computational and product-state inputs, marginal and full outcomes,
//! expectation values, adaptive programs, sampling in arbitrary single-qubit
//! bases, and a dense state-vector oracle for small registers.

pub mod error;
pub mod format;
pub mod jw;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod pfaffian;
pub mod prep;
pub mod random;
pub mod strong;
pub mod weak;

pub use error::{Error, Result};
