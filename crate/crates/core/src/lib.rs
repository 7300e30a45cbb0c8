//! Statistically local lattice models.
//!
//! [`weight`] holds the generic product-of-local-factors machinery, [`ising`]
//! the square-lattice Ising model built on it, [`bell`] the lightlike
//! trajectory model of a two-wing spin-correlation experiment, and
//! [`experiments`] the verification campaigns that tie them together.

pub mod bell;
pub mod error;
pub mod experiments;
pub mod ising;
pub mod rng;
pub mod weight;

pub use error::{Error, Result};
