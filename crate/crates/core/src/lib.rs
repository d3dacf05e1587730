//! Random walks on nilpotent Lie groups extended by finite orthogonal groups.

pub mod error;
pub mod experiments;
pub mod format;
pub mod lie;
pub mod norms;
pub mod semidirect;
pub mod splitting;
pub mod stats;
pub mod walker;

pub use error::{Error, Result};
