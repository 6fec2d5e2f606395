//! Deep adversarial data augmentation for classification with very little
//! labeled data.
//!
//! A class-conditional generator (the augmenter) and a classifier with `2k`
//! outputs (real and fake versions of every class) are trained against each
//! other; the generator is then frozen and used as a data provider while the
//! classifier is trained on folded `k`-way probabilities.
//!
//! Module map:
//! - [`tensor`]: dense tensors, reverse-mode differentiation, gradient checking
//! - [`models`]: the augmenter and classifier networks
//! - [`losses`]: training objectives, label construction, probability folding
//! - [`trainer`]: the two-phase training loop and Adam
//! - [`data`]: datasets, synthetic generators, subsampling, augmentation, IDX/CSV
//! - [`harness`]: experiment matrix, config files, result curves, sample dumps

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod models;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{DadaError, Result};
