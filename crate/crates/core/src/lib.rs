//! Handwriting-based Parkinson's disease screening: pen-trajectory ingest,
//! image rendering, CNN and dynamic feature extraction, feature selection,
//! classical classifiers and cross-validated evaluation.

pub mod classifiers;
pub mod cnn;
pub mod dynamic;
pub mod error;
pub mod evaluate;
pub mod fixtures;
pub mod ink;
pub mod matrix;
pub mod pipeline;
pub mod render;
pub mod seed;
pub mod select;

pub use error::{Error, ErrorClass, Result};
