//! Lax matrices, spectral strata and Maslov indices of the periodic Toda chain.

pub mod error;
pub mod config;
pub mod dynamics;
pub mod json;
pub mod lax;
pub mod maslov;
pub mod ode;
pub mod report;
pub mod sampling;
pub mod singularity;
pub mod spectral;
pub mod verify;

pub use error::{Result, TodaError};
pub use lax::{LaxClass, LaxMatrix, PhasePoint, SignVector};
pub use spectral::PairId;
