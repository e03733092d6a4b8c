//! Factoid MRR over the top five answers, per-question list F1 with
//! synonym groups, threshold tuning and k-fold cross-validation.
//!
//! Strings match when they are equal after lowercasing and collapsing
//! whitespace.

mod folds;
mod threshold;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_answer, AnswerGroup, Question, QuestionType};

pub use folds::{cross_validate, make_folds, CvReport};
pub use threshold::{list_f1_at, threshold_candidates, tune_threshold, ThresholdChoice};

/// Number of ranked factoid answers that are scored.
pub const MAX_FACTOID_ANSWERS: usize = 5;

pub fn match_answer<S: AsRef<str>>(predicted: &str, synonyms: &[S]) -> bool {
    let p = normalize_answer(predicted);
    !p.is_empty() && synonyms.iter().any(|s| normalize_answer(s.as_ref()) == p)
}

/// 1-based rank of the first matching answer among the first five.
pub fn first_match_rank<S: AsRef<str>>(ranked: &[String], synonyms: &[S]) -> Option<usize> {
    ranked
        .iter()
        .take(MAX_FACTOID_ANSWERS)
        .position(|a| match_answer(a, synonyms))
        .map(|r| r + 1)
}

pub fn question_rr(ranked: &[String], gold: &AnswerGroup) -> f64 {
    first_match_rank(ranked, &gold.synonyms).map_or(0.0, |r| 1.0 / r as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
}

/// Precision, recall and F1 of a predicted answer set.
///
/// Predictions are first deduplicated by normalized form. Each prediction
/// may credit at most one gold group and each group is credited at most
/// once; the number of true positives is the size of a maximum such
/// matching, so the score does not depend on input order.
pub fn question_list_f1(predicted: &[String], gold: &[AnswerGroup]) -> ListScore {
    let mut seen = std::collections::HashSet::new();
    let preds: Vec<&String> = predicted
        .iter()
        .filter(|p| seen.insert(normalize_answer(p)))
        .collect();
    let edges: Vec<Vec<usize>> = preds
        .iter()
        .map(|p| {
            (0..gold.len())
                .filter(|&g| match_answer(p, &gold[g].synonyms))
                .collect()
        })
        .collect();
    let matched = max_matching(&edges, gold.len());
    let precision = if preds.is_empty() {
        0.0
    } else {
        matched as f64 / preds.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        matched as f64 / gold.len() as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ListScore {
        precision,
        recall,
        f1,
        matched,
    }
}

/// Size of a maximum bipartite matching (augmenting paths).
fn max_matching(edges: &[Vec<usize>], n_right: usize) -> usize {
    fn augment(
        u: usize,
        edges: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &edges[u] {
            if !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, edges, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    (0..edges.len())
        .filter(|&u| augment(u, edges, &mut vec![false; n_right], &mut owner))
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub id: String,
    pub qtype: QuestionType,
    /// Reciprocal rank for factoid questions, F1 for list questions.
    pub score: f64,
    pub rank: Option<usize>,
    pub matched: Option<usize>,
    pub missing: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub factoid_mrr: f64,
    pub list_precision: f64,
    pub list_recall: f64,
    pub list_f1: f64,
}

impl MetricSummary {
    pub fn mean(items: &[MetricSummary]) -> MetricSummary {
        if items.is_empty() {
            return MetricSummary::default();
        }
        let n = items.len() as f64;
        let avg = |f: fn(&MetricSummary) -> f64| items.iter().map(f).sum::<f64>() / n;
        MetricSummary {
            factoid_mrr: avg(|m| m.factoid_mrr),
            list_precision: avg(|m| m.list_precision),
            list_recall: avg(|m| m.list_recall),
            list_f1: avg(|m| m.list_f1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub factoid_mrr: f64,
    pub list_precision: f64,
    pub list_recall: f64,
    pub list_f1: f64,
    pub n_factoid_evaluated: usize,
    pub n_list_evaluated: usize,
    pub n_missing: usize,
    pub per_question: Vec<QuestionScore>,
}

impl EvalReport {
    pub fn summary(&self) -> MetricSummary {
        MetricSummary {
            factoid_mrr: self.factoid_mrr,
            list_precision: self.list_precision,
            list_recall: self.list_recall,
            list_f1: self.list_f1,
        }
    }

    /// Mean of factoid MRR and list F1 over the question types present.
    pub fn combined_score(&self) -> Option<f64> {
        let mut parts = Vec::new();
        if self.n_factoid_evaluated > 0 {
            parts.push(self.factoid_mrr);
        }
        if self.n_list_evaluated > 0 {
            parts.push(self.list_f1);
        }
        (!parts.is_empty()).then(|| parts.iter().sum::<f64>() / parts.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Scores every question; missing predictions count as empty answers and
/// predictions for unknown ids are ignored.
pub fn evaluate(predictions: &BTreeMap<String, Vec<String>>, questions: &[Question]) -> EvalReport {
    let mut per_question = Vec::with_capacity(questions.len());
    let (mut rr_sum, mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0, 0.0);
    let (mut n_factoid, mut n_list, mut n_missing) = (0, 0, 0);
    let empty = Vec::new();
    for q in questions {
        let predicted = predictions.get(&q.id);
        let missing = predicted.is_none();
        n_missing += missing as usize;
        let answers = predicted.unwrap_or(&empty);
        let entry = match q.qtype {
            QuestionType::Factoid => {
                n_factoid += 1;
                let synonyms: Vec<&str> = q
                    .gold
                    .iter()
                    .flat_map(|g| g.synonyms.iter().map(String::as_str))
                    .collect();
                let rank = first_match_rank(answers, &synonyms);
                let score = rank.map_or(0.0, |r| 1.0 / r as f64);
                rr_sum += score;
                QuestionScore {
                    id: q.id.clone(),
                    qtype: q.qtype,
                    score,
                    rank,
                    matched: None,
                    missing,
                }
            }
            QuestionType::List => {
                n_list += 1;
                let s = question_list_f1(answers, &q.gold);
                p_sum += s.precision;
                r_sum += s.recall;
                f_sum += s.f1;
                QuestionScore {
                    id: q.id.clone(),
                    qtype: q.qtype,
                    score: s.f1,
                    rank: None,
                    matched: Some(s.matched),
                    missing,
                }
            }
        };
        per_question.push(entry);
    }
    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
    EvalReport {
        factoid_mrr: mean(rr_sum, n_factoid),
        list_precision: mean(p_sum, n_list),
        list_recall: mean(r_sum, n_list),
        list_f1: mean(f_sum, n_list),
        n_factoid_evaluated: n_factoid,
        n_list_evaluated: n_list,
        n_missing,
        per_question,
    }
}
