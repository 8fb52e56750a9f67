//! Global polynomial approximation of squared Riemannian distances.

pub mod cli;
pub mod config;
pub mod domain;
pub mod eikonal;
pub mod error;
pub mod interpolate;
pub mod jet;
pub mod local_series;
pub mod metric;
pub mod multiindex;
pub mod oracles;
pub mod poly;
pub mod report;
pub mod wkb;

pub use error::{Error, Result};
