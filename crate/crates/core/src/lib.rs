//! Classifiers and a benchmark harness for small tabular sleep datasets.
//!
//! The pipeline is: load (or synthesize) a dataset, split it 50-50, normalize
//! with statistics fitted on the training half, train one of eight
//! classifiers, and score the held-out half with confusion-matrix metrics.
//!
//! Everything is 64-bit floating point and deterministic per seed. With the
//! `parallel` feature (default) independent benchmark cells and batch
//! predictions run on rayon; without it the same code runs serially and
//! produces identical output.

pub mod classic;
pub mod convnet;
pub mod dataio;
mod error;
pub mod exec;
pub mod harness;
pub mod metrics;
pub mod persist;
pub mod preprocess;
pub mod tensor;

pub use error::{Error, Result};
