//! Geometric pointing-and-spin tracking control of a fast-spinning rigid body:
//! closed-loop simulation, coordinate-free linearization, equilibrium
//! eigen-structure, nutation-frequency estimation and flow exploration near
//! the desired and antipodal equilibria.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod geom;
pub mod integrator;
pub mod linearization;
pub mod reference;
pub mod spectral;
pub mod trace_io;

pub use error::{Error, Result};
