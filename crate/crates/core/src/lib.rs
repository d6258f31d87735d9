//! Driven two-level atom with photoinduced vibronic coupling.

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod models;
pub mod par;
pub mod scenarios;

pub use error::{Error, Result};
