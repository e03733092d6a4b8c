//! Span loss with minimum-loss synonym selection, forgetting cost and the
//! L2 pull towards base parameters. Losses are computed from raw scores so
//! that log-probabilities stay finite for saturated sigmoids and softmaxes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Question;
use crate::encoder::{sigmoid, top_k_indices, ModelParams, ScoreSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub c_fc: f64,
    pub c_l2: f64,
    pub dropout_rate: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            c_fc: 0.0,
            c_l2: 0.0,
            dropout_rate: 0.5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |c: f64| c.is_finite() && c >= 0.0;
        if !ok(self.c_fc) || !ok(self.c_l2) {
            return Err(Error::ConfigMismatch(format!(
                "loss coefficients must be finite and non-negative, got c_fc={} c_l2={}",
                self.c_fc, self.c_l2
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::ConfigMismatch(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn needs_base(&self) -> bool {
        self.c_fc > 0.0 || self.c_l2 > 0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_original: f64,
    pub l_fc: f64,
    pub l_l2: f64,
    pub l_final: f64,
}

pub fn total_loss(l_original: f64, l_fc: f64, l_l2: f64, cfg: &LossConfig) -> LossBreakdown {
    LossBreakdown {
        l_original,
        l_fc,
        l_l2,
        l_final: l_original + cfg.c_fc * l_fc + cfg.c_l2 * l_l2,
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&y| (y - max).exp()).sum::<f64>().ln();
    row.iter().map(|&y| y - lse).collect()
}

/// A gold span located by snippet position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoldSpan {
    pub snippet: usize,
    pub start: usize,
    pub end: usize,
}

/// Candidate spans per answer group. Groups without any span are dropped.
pub fn gold_spans(question: &Question) -> Result<Vec<Vec<GoldSpan>>> {
    let groups: Vec<Vec<GoldSpan>> = question
        .gold
        .iter()
        .map(|g| {
            g.spans
                .iter()
                .filter_map(|s| {
                    Some(GoldSpan {
                        snippet: question.snippet_index(&s.snippet_id)?,
                        start: s.token_start,
                        end: s.token_end,
                    })
                })
                .collect::<Vec<_>>()
        })
        .filter(|g| !g.is_empty())
        .collect();
    if groups.is_empty() {
        return Err(Error::NoExtractableAnswer(question.id.clone()));
    }
    Ok(groups)
}

/// Start indices whose end rows a loss evaluation needs, per snippet.
pub fn required_starts(groups: &[Vec<GoldSpan>], n_snippets: usize) -> Vec<BTreeSet<usize>> {
    let mut out = vec![BTreeSet::new(); n_snippets];
    for span in groups.iter().flatten() {
        out[span.snippet].insert(span.start);
    }
    out
}

/// A scalar loss with its gradients with respect to the scores of every
/// snippet.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreLoss {
    pub value: f64,
    pub d_start: Vec<Vec<f64>>,
    pub d_end: Vec<BTreeMap<usize, Vec<f64>>>,
}

impl ScoreLoss {
    fn zeros(scores: &[ScoreSet]) -> Self {
        ScoreLoss {
            value: 0.0,
            d_start: scores.iter().map(|s| vec![0.0; s.n()]).collect(),
            d_end: vec![BTreeMap::new(); scores.len()],
        }
    }

    fn end_grad(&mut self, snippet: usize, start: usize, len: usize) -> &mut Vec<f64> {
        self.d_end[snippet]
            .entry(start)
            .or_insert_with(|| vec![0.0; len])
    }

    /// `self + scale * other`, gradients included.
    pub fn add_scaled(&mut self, other: &ScoreLoss, scale: f64) {
        self.value += scale * other.value;
        for (a, b) in self.d_start.iter_mut().zip(&other.d_start) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        for (k, rows) in other.d_end.iter().enumerate() {
            for (&i, row) in rows {
                let dst = self.end_grad(k, i, row.len());
                for (x, y) in dst.iter_mut().zip(row) {
                    *x += scale * y;
                }
            }
        }
    }
}

/// Negative log-likelihood of span `(i, j)`: `-log p_start - log p_end`.
pub fn span_nll(scores: &ScoreSet, i: usize, j: usize) -> f64 {
    softplus(-scores.y_start[i]) - log_softmax(&scores.y_end[&i])[j - i]
}

/// Span loss of one question.
///
/// For every answer group the candidate span with the lowest negative
/// log-likelihood is selected (first candidate on ties) and contributes
/// that value. A binary cross-entropy over every token of every snippet,
/// with the selected starts as positives, averaged over tokens, is added.
/// Returns the loss and the selected spans.
pub fn span_loss(
    scores: &[ScoreSet],
    groups: &[Vec<GoldSpan>],
) -> Result<(ScoreLoss, Vec<GoldSpan>)> {
    if groups.is_empty() || groups.iter().any(Vec::is_empty) {
        return Err(Error::NoExtractableAnswer(
            "answer group without spans".into(),
        ));
    }
    for span in groups.iter().flatten() {
        let row = scores
            .get(span.snippet)
            .and_then(|s| s.y_end.get(&span.start));
        if row.is_none_or(|r| span.end < span.start || span.end - span.start >= r.len()) {
            return Err(Error::ShapeMismatch(format!(
                "no end score for gold span {span:?}"
            )));
        }
    }
    let mut loss = ScoreLoss::zeros(scores);
    let mut selected = Vec::with_capacity(groups.len());
    for group in groups {
        let mut best = group[0];
        let mut best_nll = span_nll(&scores[best.snippet], best.start, best.end);
        for &cand in &group[1..] {
            let nll = span_nll(&scores[cand.snippet], cand.start, cand.end);
            if nll < best_nll {
                best = cand;
                best_nll = nll;
            }
        }
        loss.value += best_nll;
        let sc = &scores[best.snippet];
        loss.d_start[best.snippet][best.start] += sigmoid(sc.y_start[best.start]) - 1.0;
        let row = &sc.y_end[&best.start];
        let probs = crate::spanner::end_probs(row);
        let d = loss.end_grad(best.snippet, best.start, row.len());
        for (k, p) in probs.iter().enumerate() {
            d[k] += p;
        }
        d[best.end - best.start] -= 1.0;
        selected.push(best);
    }

    let positives: BTreeSet<(usize, usize)> =
        selected.iter().map(|s| (s.snippet, s.start)).collect();
    let n_tokens: usize = scores.iter().map(ScoreSet::n).sum();
    let inv_n = 1.0 / n_tokens as f64;
    for (k, sc) in scores.iter().enumerate() {
        for (i, &y) in sc.y_start.iter().enumerate() {
            let t = if positives.contains(&(k, i)) {
                1.0
            } else {
                0.0
            };
            loss.value += inv_n * (softplus(y) - t * y);
            loss.d_start[k][i] += inv_n * (sigmoid(y) - t);
        }
    }
    Ok((loss, selected))
}

/// Start index used for the end term of the forgetting cost on one snippet.
pub fn base_argmax_start(base: &ScoreSet) -> usize {
    top_k_indices(&base.y_start, 1)[0]
}

/// Cross-entropy from the base model's predictions to the current ones.
///
/// Start term: mean over all tokens of the binary cross-entropy with the
/// base start probabilities as soft targets. End term: mean over snippets
/// of the categorical cross-entropy between the base and current end
/// distributions at the base model's most probable start.
pub fn forgetting_cost(current: &[ScoreSet], base: &[ScoreSet]) -> Result<ScoreLoss> {
    if current.len() != base.len()
        || current
            .iter()
            .zip(base)
            .any(|(c, b)| c.n() != b.n() || c.n() == 0)
    {
        return Err(Error::ShapeMismatch(
            "current and base scores cover different contexts".into(),
        ));
    }
    let mut loss = ScoreLoss::zeros(current);
    let n_tokens: usize = current.iter().map(ScoreSet::n).sum();
    let inv_n = 1.0 / n_tokens as f64;
    let inv_s = 1.0 / current.len() as f64;
    for (k, (cur, b)) in current.iter().zip(base).enumerate() {
        for (i, (&y, &yb)) in cur.y_start.iter().zip(&b.y_start).enumerate() {
            let target = sigmoid(yb);
            loss.value += inv_n * (softplus(y) - target * y);
            loss.d_start[k][i] += inv_n * (sigmoid(y) - target);
        }
        let i = base_argmax_start(b);
        let (Some(cur_row), Some(base_row)) = (cur.y_end.get(&i), b.y_end.get(&i)) else {
            return Err(Error::ShapeMismatch(format!(
                "end row for base start {i} missing on snippet {k}"
            )));
        };
        let target = crate::spanner::end_probs(base_row);
        let log_p = log_softmax(cur_row);
        let p = crate::spanner::end_probs(cur_row);
        loss.value -= inv_s * target.iter().zip(&log_p).map(|(t, l)| t * l).sum::<f64>();
        let d = loss.end_grad(k, i, cur_row.len());
        for (idx, (pc, t)) in p.iter().zip(&target).enumerate() {
            d[idx] += inv_s * (pc - t);
        }
    }
    Ok(loss)
}

/// `0.5 * Σ (θ - θ_base)²` and its gradient `θ - θ_base`.
pub fn l2_param_loss(params: &ModelParams, base: &ModelParams) -> Result<(f64, ModelParams)> {
    params.check_same_shapes(base)?;
    let mut grad = params.clone();
    grad.add_scaled(base, -1.0);
    let value = 0.5
        * grad
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>();
    Ok((value, grad))
}
