//! Cross-validated evaluation: stratified folds, nested feature selection,
//! per-task classifiers, task ensembles, recombination experiments and the
//! report bundle.

mod experiments;
mod metrics;
mod report;
mod run;

pub use experiments::*;
pub use metrics::*;
pub use report::*;
pub use run::*;
