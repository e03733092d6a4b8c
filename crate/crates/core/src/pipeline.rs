//! One question through the whole model: static features and
//! word-in-question features are prepared once, the trainable character
//! columns are recomputed on every pass, every snippet is encoded against
//! the question and the resulting scores are decoded into answers.

use std::collections::BTreeMap;

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Question, QuestionType};
use crate::embedding::{char_backward, fill_char_columns, static_features, CharTrace, Resources};
use crate::encoder::{
    backward, encode, wiq_features, Activations, DropoutMasks, EndRows, ModelConfig, ModelParams,
    ScoreSet,
};
use crate::error::Result;
use crate::spanner::{
    decode_spans, factoid_selection, list_selection, merge_snippets, DecodingConfig, TokenSpan,
};

/// A question with every parameter-independent input precomputed.
#[derive(Clone, Debug)]
pub struct PreparedQuestion {
    pub question: Question,
    question_static: Array2<f64>,
    contexts: Vec<PreparedContext>,
}

#[derive(Clone, Debug)]
struct PreparedContext {
    features: Array2<f64>,
    wiq: Array2<f64>,
}

impl PreparedQuestion {
    pub fn new(question: &Question, resources: &Resources, config: &ModelConfig) -> Result<Self> {
        let emb = &config.embedding;
        let question_static =
            static_features(&question.question_tokens, question.qtype, resources, emb)?;
        let contexts = question
            .snippets
            .iter()
            .map(|snippet| {
                Ok(PreparedContext {
                    features: static_features(&snippet.tokens, question.qtype, resources, emb)?,
                    wiq: wiq_features(&question.question_tokens, &snippet.tokens, resources),
                })
            })
            .collect::<Result<_>>()?;
        Ok(PreparedQuestion {
            question: question.clone(),
            question_static,
            contexts,
        })
    }

    pub fn n_snippets(&self) -> usize {
        self.contexts.len()
    }

    /// Input width of the embedded rows.
    pub fn input_dim(&self) -> usize {
        self.question_static.ncols()
    }
}

pub fn prepare_all(
    questions: &[Question],
    resources: &Resources,
    config: &ModelConfig,
) -> Result<Vec<PreparedQuestion>> {
    questions
        .par_iter()
        .map(|q| PreparedQuestion::new(q, resources, config))
        .collect()
}

/// Intermediate values of one pass, kept for the reverse pass.
pub struct QuestionPass {
    pub scores: Vec<ScoreSet>,
    acts: Vec<Activations>,
    question_chars: Vec<CharTrace>,
    context_chars: Vec<Vec<CharTrace>>,
}

impl QuestionPass {
    /// Scores of snippet `k` with a different choice of end rows.
    pub fn rescore(&self, params: &ModelParams, k: usize, rows: &EndRows) -> ScoreSet {
        self.acts[k].scores(params, rows)
    }
}

/// Encodes every snippet of `prep`; `rows` chooses end rows per snippet.
pub fn forward_question(
    prep: &PreparedQuestion,
    params: &ModelParams,
    masks: Option<&DropoutMasks>,
    rows: impl Fn(usize, &Activations) -> EndRows,
) -> Result<QuestionPass> {
    let emb = &params.config().embedding;
    let mut question = prep.question_static.clone();
    let question_chars = fill_char_columns(
        &mut question,
        &prep.question.question_tokens,
        params.char_cnn(),
        emb,
    )?;
    let mut scores = Vec::with_capacity(prep.contexts.len());
    let mut acts = Vec::with_capacity(prep.contexts.len());
    let mut context_chars = Vec::with_capacity(prep.contexts.len());
    for (k, (ctx, snippet)) in prep
        .contexts
        .iter()
        .zip(&prep.question.snippets)
        .enumerate()
    {
        let mut context = ctx.features.clone();
        context_chars.push(fill_char_columns(
            &mut context,
            &snippet.tokens,
            params.char_cnn(),
            emb,
        )?);
        let a = encode(
            question.view(),
            context.view(),
            ctx.wiq.view(),
            params,
            masks,
        )?;
        scores.push(a.scores(params, &rows(k, &a)));
        acts.push(a);
    }
    Ok(QuestionPass {
        scores,
        acts,
        question_chars,
        context_chars,
    })
}

/// Gradients of a scalar loss with respect to all parameters, given its
/// gradients with respect to each snippet's start scores and end rows.
pub fn backward_question(
    pass: &QuestionPass,
    d_start: &[Vec<f64>],
    d_end: &[BTreeMap<usize, Vec<f64>>],
    params: &ModelParams,
) -> Result<ModelParams> {
    let cols = params.config().embedding.layout().chars;
    let mut grads = params.zeros_like();
    let mut d_question: Option<Array2<f64>> = None;
    for (k, acts) in pass.acts.iter().enumerate() {
        let g = backward(&d_start[k], &d_end[k], acts, params)?;
        grads.add_scaled(&g.params, 1.0);
        let mut cg = grads.char_cnn_mut();
        for (row, trace) in pass.context_chars[k].iter().enumerate() {
            let d = g.context.slice(s![row, cols.clone()]);
            char_backward(trace, d, params.char_cnn(), &mut cg);
        }
        match d_question.as_mut() {
            Some(dq) => *dq += &g.question,
            None => d_question = Some(g.question),
        }
    }
    if let Some(dq) = d_question {
        let mut cg = grads.char_cnn_mut();
        for (row, trace) in pass.question_chars.iter().enumerate() {
            char_backward(
                trace,
                dq.slice(s![row, cols.clone()]),
                params.char_cnn(),
                &mut cg,
            );
        }
    }
    Ok(grads)
}

/// Scores for inference: end rows for the `k_starts` best starts.
pub fn question_scores(
    prep: &PreparedQuestion,
    params: &ModelParams,
    cfg: &DecodingConfig,
) -> Result<Vec<ScoreSet>> {
    Ok(forward_question(prep, params, None, |_, _| EndRows::TopK(cfg.k_starts))?.scores)
}

/// Predicted answers of one question with their provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub qtype: QuestionType,
    /// Factoid: up to `factoid_top` ranked spans. List: spans above the
    /// threshold (at least one when any span exists).
    pub answers: Vec<TokenSpan>,
    /// Every merged candidate, used for threshold tuning.
    pub candidates: Vec<TokenSpan>,
}

impl PredictionRecord {
    pub fn answer_strings(&self) -> Vec<String> {
        self.answers.iter().map(|a| a.text.clone()).collect()
    }
}

/// Decodes per-snippet scores of `question` into a prediction record.
pub fn predict_from_scores(
    question: &Question,
    scores: &[ScoreSet],
    cfg: &DecodingConfig,
) -> PredictionRecord {
    let per_snippet = question
        .snippets
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(k, (snippet, sc))| decode_spans(sc, snippet, k, cfg))
        .collect();
    let candidates = merge_snippets(per_snippet);
    let answers = match question.qtype {
        QuestionType::Factoid => factoid_selection(&candidates, cfg).to_vec(),
        QuestionType::List => list_selection(&candidates, cfg.list_threshold)
            .into_iter()
            .cloned()
            .collect(),
    };
    PredictionRecord {
        id: question.id.clone(),
        qtype: question.qtype,
        answers,
        candidates,
    }
}

pub fn predict(
    prep: &PreparedQuestion,
    params: &ModelParams,
    cfg: &DecodingConfig,
) -> Result<PredictionRecord> {
    let scores = question_scores(prep, params, cfg)?;
    Ok(predict_from_scores(&prep.question, &scores, cfg))
}

/// Predictions for many questions, in input order.
pub fn predict_all(
    preps: &[PreparedQuestion],
    params: &ModelParams,
    cfg: &DecodingConfig,
) -> Result<Vec<PredictionRecord>> {
    preps.par_iter().map(|p| predict(p, params, cfg)).collect()
}

/// Map from question id to answer strings, as consumed by evaluation.
pub fn answer_map(records: &[PredictionRecord]) -> BTreeMap<String, Vec<String>> {
    records
        .iter()
        .map(|r| (r.id.clone(), r.answer_strings()))
        .collect()
}
