use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::question_list_f1;
use crate::corpus::{Question, QuestionType};
use crate::error::{Error, Result};
use crate::pipeline::PredictionRecord;
use crate::spanner::list_selection;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    /// Mean list F1 reached at `threshold`.
    pub list_f1: f64,
}

/// List questions that have a prediction record, paired with it.
fn list_pairs<'a>(
    records: &'a [PredictionRecord],
    questions: &'a [Question],
) -> Vec<(&'a PredictionRecord, &'a Question)> {
    let by_id: HashMap<&str, &PredictionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    questions
        .iter()
        .filter(|q| q.qtype == QuestionType::List)
        .filter_map(|q| by_id.get(q.id.as_str()).map(|r| (*r, q)))
        .collect()
}

/// Every distinct candidate probability plus zero, in descending order.
pub fn threshold_candidates(records: &[PredictionRecord], questions: &[Question]) -> Vec<f64> {
    let mut c: Vec<f64> = list_pairs(records, questions)
        .iter()
        .flat_map(|(r, _)| r.candidates.iter().map(|s| s.probability))
        .chain(std::iter::once(0.0))
        .collect();
    c.sort_by(|a, b| b.total_cmp(a));
    c.dedup();
    c
}

/// Mean list F1 over list questions when answers are re-selected at `t`.
pub fn list_f1_at(records: &[PredictionRecord], questions: &[Question], t: f64) -> f64 {
    let pairs = list_pairs(records, questions);
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|(r, q)| {
            let answers: Vec<String> = list_selection(&r.candidates, t)
                .into_iter()
                .map(|s| s.text.clone())
                .collect();
            question_list_f1(&answers, &q.gold).f1
        })
        .sum();
    total / pairs.len() as f64
}

/// The cutoff maximizing mean list F1; ties go to the largest cutoff.
pub fn tune_threshold(
    records: &[PredictionRecord],
    questions: &[Question],
) -> Result<ThresholdChoice> {
    let pairs = list_pairs(records, questions);
    if !pairs.iter().any(|(r, _)| !r.candidates.is_empty()) {
        return Err(Error::NoListQuestions);
    }
    let mut best: Option<ThresholdChoice> = None;
    for t in threshold_candidates(records, questions) {
        let f1 = list_f1_at(records, questions, t);
        if best.is_none_or(|b| f1 > b.list_f1) {
            best = Some(ThresholdChoice {
                threshold: t,
                list_f1: f1,
            });
        }
    }
    Ok(best.expect("zero is always a candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnswerGroup;
    use crate::spanner::TokenSpan;

    fn span(text: &str, p: f64) -> TokenSpan {
        TokenSpan {
            snippet_id: "s".into(),
            snippet_index: 0,
            token_start: 0,
            token_end: 0,
            char_begin: 0,
            char_end: 0,
            text: text.into(),
            p_start: p,
            p_end: 1.0,
            probability: p,
        }
    }

    fn fixture(spans: Vec<TokenSpan>, gold: &[&str]) -> (Vec<PredictionRecord>, Vec<Question>) {
        let q = Question {
            id: "q".into(),
            qtype: QuestionType::List,
            text: String::new(),
            question_tokens: Vec::new(),
            snippets: Vec::new(),
            gold: gold
                .iter()
                .map(|g| AnswerGroup {
                    synonyms: vec![g.to_string()],
                    spans: Vec::new(),
                })
                .collect(),
        };
        let r = PredictionRecord {
            id: "q".into(),
            qtype: QuestionType::List,
            answers: Vec::new(),
            candidates: spans,
        };
        (vec![r], vec![q])
    }

    #[test]
    fn picks_the_gold_only_cutoff() {
        let (r, q) = fixture(vec![span("gold", 0.9), span("wrong", 0.5)], &["gold"]);
        let c = tune_threshold(&r, &q).unwrap();
        assert_eq!(c.threshold, 0.9);
        assert_eq!(c.list_f1, 1.0);
        assert!((list_f1_at(&r, &q, 0.5) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_prefer_larger() {
        let (r, q) = fixture(vec![span("a", 0.7), span("b", 0.4)], &["a", "b"]);
        let c = tune_threshold(&r, &q).unwrap();
        assert_eq!(c.threshold, 0.4);
        assert_eq!(list_f1_at(&r, &q, 0.0), c.list_f1);
    }

    #[test]
    fn needs_list_candidates() {
        let (r, q) = fixture(vec![], &["a"]);
        assert!(matches!(
            tune_threshold(&r, &q),
            Err(Error::NoListQuestions)
        ));
    }
}
