#![cfg_attr(not(feature = "std"), no_std)]
//! Random subspace ensemble classification.
//!
//! Each weak learner is a base classifier (LDA, QDA, k-NN or independent
//! Gamma) trained on the best of many randomly drawn feature subspaces, where
//! "best" is judged by a ratio information criterion or a cross-validation
//! error. Learners vote; the vote threshold is tuned on the training data, and
//! per-feature selection frequencies give a feature ranking that can also be
//! fed back into the subspace distribution for further rounds.
//!
//! The crate needs only `alloc`. The default `std` feature adds parallel
//! fitting over learners on a rayon pool; results do not depend on the thread
//! count.

extern crate alloc;

pub mod base;
pub mod criteria;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod neighbors;
pub mod sampling;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
