//! Subjective quality assessment of Java methods.
//!
//! The crate covers the whole pipeline: [`corpus`] extraction and synthesis,
//! a [`tokenizer`], the TF-IDF random-forest [`baseline`], a miniature
//! transformer [`encoder`] with exact gradients, MLM pre-training and
//! fine-tuning in [`training`], the metric suite in [`evaluation`], Shapley
//! span attribution in [`attribution`], and the end-to-end [`pipeline`].

pub mod attribution;
pub mod baseline;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod seed;
pub mod tokenizer;
pub mod training;

pub use corpus::{Dataset, Label, MethodSample, Split};
pub use error::{Error, Result};
