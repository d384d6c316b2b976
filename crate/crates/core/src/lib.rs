//! Numerical laboratory for critical transitions in scalar nonautonomous ODEs
//! `x' = f(t, x, Γᶜ(t))` with concave or d-concave right-hand sides.

pub mod attractors;
pub mod classify;
pub mod error;
pub mod ews;
pub mod integrator;
pub mod io;
pub mod models;
pub mod presets;
pub mod transitions;

pub use error::{Error, Result};
