//! Task annotations, live evaluation and scoring.

mod annotation;
mod evaluator;
mod scoring;

pub use annotation::*;
pub use evaluator::*;
pub use scoring::*;
