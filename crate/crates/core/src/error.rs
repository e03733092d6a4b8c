use std::io;

use thiserror::Error;

/// Errors produced by the question-answering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input at {path}: {message}")]
    MalformedInput { path: String, message: String },

    #[error("dimension mismatch on line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("cannot embed an empty word")]
    EmptyWord,

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("activations do not match the parameters: {0}")]
    StaleActivations(String),

    #[error("question {0} has no extractable answer span")]
    NoExtractableAnswer(String),

    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("loss diverged at step {step}: {value}")]
    DivergedLoss { step: usize, value: f64 },

    #[error("no list question with scored spans available for threshold tuning")]
    NoListQuestions,

    #[error("{available} questions cannot be split into {folds} folds")]
    TooFewQuestions { available: usize, folds: usize },

    #[error("ensemble has no members")]
    EmptyEnsemble,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn malformed(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::MalformedInput {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
