//! Dual teacher-student self-training for distantly supervised sequence labeling.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: BIO-labelled sentences, CoNLL I/O, span codec, vocabularies.
//! - [`distant_supervision`]: gazetteer matching, noise injection and a synthetic
//!   benchmark generator that produces incomplete and inaccurate annotations.
//! - [`tagger`]: a small window-based neural token classifier with dropout,
//!   exact gradients, Adam and EMA support.
//! - [`selection`]: confidence / MC-dropout uncertainty scoring and the token mask.
//! - [`collaboration`]: small-loss sentence selection and cross-student label transfer.
//! - [`engine`]: pre-training, the self-training loop, dev-set model selection.
//! - [`evaluation`]: span-level and token-level metrics.
//! - [`commands`]: configuration files and the `generate` / `train` / `evaluate` /
//!   `report` operations used by the command-line front end.

pub mod collaboration;
pub mod commands;
pub mod corpus;
pub mod distant_supervision;
pub mod engine;
mod error;
pub mod evaluation;
pub mod rng;
pub mod selection;
pub mod tagger;

pub use error::{Error, Result};
