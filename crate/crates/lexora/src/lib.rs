//! Information extraction from court-decision text, end to end: a
//! synthetic corpus generator with planted ground truth, a rule-based
//! extractor, a small from-scratch sequence-to-sequence extractor with
//! per-task soft prompts, field-level evaluation, confidence-threshold
//! calibration, and sentencing analytics over the extracted fields.
//!
//! The `lexora` binary (see [`cli`]) wires these stages into reproducible
//! subcommands; everything it does is callable as a library too.

pub mod cli;
pub mod confgate;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod extraction;
pub mod genix;
pub mod legalstats;
pub mod rulex;
pub mod taskschema;

pub use error::{Error, Result};
