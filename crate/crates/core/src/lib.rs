//! Survival analysis under dependent censoring with learned Archimedean
//! copulas.

pub mod copula;
pub mod data;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod family;
pub mod generator;
pub mod likelihood;
pub mod marginals;
pub mod metrics;
pub mod roots;
pub mod training;

pub use error::{Error, Result};
