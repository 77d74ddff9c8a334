//! Solver library for the instantaneous collision response of a shape-memory-alloy solid.
//!
//! A surface percussion applied to a specimen at rest produces jump discontinuities
//! in velocity, temperature and phase volume fractions.  The library computes the
//! post-collision state by:
//!
//! - solving a vector elliptic equation for the post-collision velocity and the
//!   dissipated work it releases,
//! - solving a constrained variational inequality for the martensite/austenite
//!   volume fractions at fixed temperature,
//! - solving a linear thermal balance for the post-collision temperature,
//! - iterating the last two to a fixed point (the mechanical step is one-way),
//! - cross-checking everything against a homogeneous algebraic solution.
//!
//! All internal quantities are SI (m, kg, s, K, Pa, J); configuration files use
//! engineering units and are converted once at load time.

pub mod cli;
pub mod closedform;
pub mod config;
pub mod coupling;
pub mod error;
pub mod fem;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod output;
pub mod params;
pub mod phase;
pub mod sparse;
pub mod thermal;
pub mod velocity;

pub use error::{Error, Result};
pub use params::MaterialParams;
