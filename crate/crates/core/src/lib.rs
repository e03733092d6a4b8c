//! Extractive question answering over short context snippets.
//!
//! The crate covers the whole pipeline: dataset ingestion with gold span
//! annotation ([`corpus`]), input features ([`embedding`]), a small
//! differentiable recurrent encoder producing start and conditioned end
//! scores ([`encoder`]), span probabilities and factoid/list decoding
//! ([`spanner`]), two-phase training with forgetting-cost and L2-to-base
//! regularization ([`training`]), BioASQ-style metrics and cross-validation
//! ([`evaluation`]), score-averaging ensembles ([`ensemble`]) and the
//! command line front end ([`cli`]).

pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod encoder;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod pipeline;
pub mod spanner;
pub mod training;

pub use error::{Error, Result};
