//! Discrete spinorial energy on the flat 3-torus: grid calculus, spinor
//! geometry, the energy and its gradient, the associated flows, and decay
//! analysis of flow traces.

pub mod analysis;
pub mod energy;
pub mod error;
pub mod flow;
pub mod grid;
pub mod spin;

pub use error::{Error, Result};
