//! Nonlinearity ("complexity") and effective-dimension analysis of ReLU network
//! representations.
//!
//! The pipeline: layer outputs ([`datamodel::ActivationTensor`], NACT files) are
//! viewed as an effective batch of samples ([`binarize`]), turned into binary
//! regime indicators, and summarized by entropy estimates ([`entropy`]) and the
//! PCA spectrum entropy ([`effdim`]). [`nettrainer`] produces such dumps from
//! small dense and highway networks; [`analytics`] assembles per-epoch tables
//! and fits.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod analytics;
pub mod binarize;
pub mod cli;
pub mod datamodel;
pub mod datasets;
pub mod effdim;
pub mod entropy;
pub mod error;
pub mod nettrainer;
pub mod rng;

pub use error::{Error, Result};
