//! End-to-end runs built from the pipeline pieces: train on one split,
//! tune the list threshold on held-out training questions, evaluate on
//! another split.

use crate::corpus::Question;
use crate::embedding::Resources;
use crate::encoder::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, evaluate, tune_threshold, CvReport, EvalReport};
use crate::pipeline::{answer_map, predict_all, prepare_all};
use crate::training::{train, TrainConfig};

/// Every `HELD_OUT_STRIDE`-th training question is held out for threshold
/// tuning.
pub const HELD_OUT_STRIDE: usize = 5;

#[derive(Clone, Debug)]
pub struct FoldSetup<'a> {
    pub resources: &'a Resources,
    pub config: ModelConfig,
    pub train: TrainConfig,
    /// Initialization and regularization reference; fresh parameters when
    /// absent.
    pub base: Option<&'a ModelParams>,
}

/// Trains on `train_questions` minus a held-out slice, tunes the list
/// threshold on that slice (keeping the configured one when the slice has
/// no scorable list question) and evaluates on `test_questions`.
pub fn train_and_evaluate(
    setup: &FoldSetup<'_>,
    train_questions: &[Question],
    test_questions: &[Question],
) -> Result<EvalReport> {
    let is_held = |i: usize| i % HELD_OUT_STRIDE == HELD_OUT_STRIDE - 1;
    let pick = |held: bool| -> Vec<Question> {
        (0..train_questions.len())
            .filter(|&i| is_held(i) == held)
            .map(|i| train_questions[i].clone())
            .collect()
    };
    let (fit, held) = (pick(false), pick(true));
    let fit_preps = prepare_all(&fit, setup.resources, &setup.config)?;
    let init = match setup.base {
        Some(b) => b.clone(),
        None => ModelParams::init(setup.config, setup.train.seed),
    };
    let outcome = train(&fit_preps, None, None, init, setup.base, &setup.train)?;
    let mut decoding = setup.train.decoding;
    let held_preps = prepare_all(&held, setup.resources, &setup.config)?;
    let held_records = predict_all(&held_preps, &outcome.params, &decoding)?;
    match tune_threshold(&held_records, &held) {
        Ok(choice) => decoding.list_threshold = choice.threshold,
        Err(Error::NoListQuestions) => {}
        Err(e) => return Err(e),
    }
    let test_preps = prepare_all(test_questions, setup.resources, &setup.config)?;
    let records = predict_all(&test_preps, &outcome.params, &decoding)?;
    Ok(evaluate(&answer_map(&records), test_questions))
}

pub fn cross_validate_model(
    setup: &FoldSetup<'_>,
    questions: &[Question],
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    cross_validate(questions, k, seed, |_, train, test| {
        train_and_evaluate(setup, train, test)
    })
}
