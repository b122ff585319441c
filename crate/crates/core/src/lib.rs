//! Origin-fixation models of language change.
//!
//! Population-level change in a grammaticalisation cycle is modelled as a
//! sequence of originations (exponential waiting times) each followed by a
//! Gamma-distributed fixation time. The parameters of that process are
//! derived from an individual-based Wright-Fisher model of speakers, which
//! lets historical article histories discriminate between accounts of how
//! individuals change their language.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abm;
pub mod cli;
pub mod data;
pub mod demography;
pub mod error;
pub mod fixation;
pub mod inference;
pub mod likelihood;
pub mod numeric;
pub mod output;
pub mod wf_sim;

pub use error::{Error, Result};
