//! Reduced-rank LCMV beamforming by joint iterative optimization of a
//! projection matrix and a reduced-rank filter, with SG and RLS recursions,
//! automatic rank selection, and analysis tools.

pub mod analysis;
pub mod beamformer;
pub mod complexity;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fullrank;
pub mod jio;
pub mod linalg;
pub mod metrics;
pub mod plot;
pub mod rank;
pub mod signal;

pub use beamformer::Beamformer;
pub use error::{Error, Result};
