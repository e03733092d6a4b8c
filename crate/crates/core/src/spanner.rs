//! From raw scores to answers.
//!
//! Start probabilities are independent sigmoids of the start scores, so
//! several tokens can start an answer; for a given start the end
//! probabilities are a softmax over the row of end scores. A span's
//! probability is the product of the two. Decoding keeps the best starts,
//! ranks the resulting spans, removes duplicate strings, merges snippets
//! and finally reads a ranked factoid list or a thresholded list answer.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_answer, Snippet};
use crate::encoder::{sigmoid, ScoreSet};
use crate::error::{Error, Result};

pub fn start_probs(y_start: &[f64]) -> Vec<f64> {
    y_start.iter().map(|&y| sigmoid(y)).collect()
}

/// Softmax with the row maximum subtracted first.
pub fn end_probs(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = row.iter().map(|&y| (y - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanProbabilities {
    pub p_start: Vec<f64>,
    /// Row for start `i` holds end probabilities for `j in i..n`.
    pub p_end: BTreeMap<usize, Vec<f64>>,
}

impl SpanProbabilities {
    pub fn from_scores(scores: &ScoreSet) -> Self {
        SpanProbabilities {
            p_start: start_probs(&scores.y_start),
            p_end: scores
                .y_end
                .iter()
                .map(|(&i, row)| (i, end_probs(row)))
                .collect(),
        }
    }

    pub fn p_span(&self, i: usize, j: usize) -> Option<f64> {
        let row = self.p_end.get(&i)?;
        Some(self.p_start[i] * row.get(j.checked_sub(i)?)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub k_starts: usize,
    pub k_spans: usize,
    pub factoid_top: usize,
    pub list_threshold: f64,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            k_starts: 20,
            k_spans: 20,
            factoid_top: 5,
            list_threshold: 0.5,
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_starts == 0 || self.factoid_top == 0 || self.factoid_top > self.k_spans {
            return Err(Error::ConfigMismatch(format!(
                "need k_starts >= 1 and 1 <= factoid_top <= k_spans, got {self:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.list_threshold) {
            return Err(Error::ConfigMismatch(format!(
                "list threshold {} outside [0, 1]",
                self.list_threshold
            )));
        }
        Ok(())
    }
}

/// A candidate answer with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub snippet_id: String,
    /// Position of the snippet within its question; used for tie-breaking.
    pub snippet_index: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub char_begin: usize,
    pub char_end: usize,
    pub text: String,
    pub p_start: f64,
    pub p_end: f64,
    pub probability: f64,
}

fn rank_order(a: &TokenSpan, b: &TokenSpan) -> std::cmp::Ordering {
    b.probability
        .total_cmp(&a.probability)
        .then(a.snippet_index.cmp(&b.snippet_index))
        .then(a.token_start.cmp(&b.token_start))
        .then(a.token_end.cmp(&b.token_end))
}

/// Ranks the spans of one snippet.
///
/// The `k_starts` most probable starts among the rows present in `scores`
/// are expanded with their end distributions; the `k_spans` most probable
/// spans are returned, ties broken by smaller start, then smaller end.
pub fn decode_spans(
    scores: &ScoreSet,
    snippet: &Snippet,
    snippet_index: usize,
    cfg: &DecodingConfig,
) -> Vec<TokenSpan> {
    assert_eq!(
        scores.n(),
        snippet.tokens.len(),
        "scores and snippet {} disagree on length",
        snippet.id
    );
    let p_start = start_probs(&scores.y_start);
    let mut starts = scores.selected_starts();
    starts.sort_by(|&a, &b| p_start[b].total_cmp(&p_start[a]).then(a.cmp(&b)));
    starts.truncate(cfg.k_starts);

    let mut spans = Vec::new();
    for i in starts {
        let p_end = end_probs(&scores.y_end[&i]);
        for (offset, &pe) in p_end.iter().enumerate() {
            let j = i + offset;
            let (char_begin, char_end) = snippet.char_range(i, j);
            spans.push(TokenSpan {
                snippet_id: snippet.id.clone(),
                snippet_index,
                token_start: i,
                token_end: j,
                char_begin,
                char_end,
                text: String::new(),
                p_start: p_start[i],
                p_end: pe,
                probability: p_start[i] * pe,
            });
        }
    }
    spans.sort_by(rank_order);
    spans.truncate(cfg.k_spans);
    for s in &mut spans {
        s.text = snippet.surface(s.token_start, s.token_end);
    }
    spans
}

/// Keeps the first (most probable) span of every normalized string.
pub fn dedup(spans: Vec<TokenSpan>) -> Vec<TokenSpan> {
    let mut seen = HashSet::new();
    spans
        .into_iter()
        .filter(|s| seen.insert(normalize_answer(&s.text)))
        .collect()
}

/// Concatenates per-snippet rankings, re-sorts them by probability (ties:
/// snippet order, start, end) and removes duplicates across snippets.
pub fn merge_snippets(per_snippet: Vec<Vec<TokenSpan>>) -> Vec<TokenSpan> {
    let mut all: Vec<TokenSpan> = per_snippet.into_iter().flatten().collect();
    all.sort_by(rank_order);
    dedup(all)
}

pub fn factoid_selection<'a>(merged: &'a [TokenSpan], cfg: &DecodingConfig) -> &'a [TokenSpan] {
    &merged[..merged.len().min(cfg.factoid_top)]
}

/// Ranked factoid answer strings.
pub fn factoid_answers(merged: &[TokenSpan], cfg: &DecodingConfig) -> Vec<String> {
    factoid_selection(merged, cfg)
        .iter()
        .map(|s| s.text.clone())
        .collect()
}

/// Spans with probability at least `threshold`, or the single best span
/// when none qualifies.
pub fn list_selection(merged: &[TokenSpan], threshold: f64) -> Vec<&TokenSpan> {
    let picked: Vec<&TokenSpan> = merged
        .iter()
        .filter(|s| s.probability >= threshold)
        .collect();
    if picked.is_empty() {
        merged.iter().take(1).collect()
    } else {
        picked
    }
}

pub fn list_answers(merged: &[TokenSpan], cfg: &DecodingConfig) -> Vec<String> {
    list_selection(merged, cfg.list_threshold)
        .into_iter()
        .map(|s| s.text.clone())
        .collect()
}
