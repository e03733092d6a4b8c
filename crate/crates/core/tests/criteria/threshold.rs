//! Threshold tuning against a brute-force search over every cutoff.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::Outcome;
use crate::common;
use spanqa::corpus::{AnswerGroup, Question, QuestionType};
use spanqa::evaluation::tune_threshold;
use spanqa::pipeline::PredictionRecord;
use spanqa::spanner::TokenSpan;

const FIXTURES: u64 = 50;
const NAMES: &[&str] = &["a", "b", "c", "d", "e", "f", "g", "h"];

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

/// List questions whose candidates carry distinct names with probabilities
/// on a coarse grid (so cutoffs tie across questions), plus a factoid
/// question that must be ignored.
fn fixture(seed: u64) -> (Vec<PredictionRecord>, Vec<Question>) {
    let mut rng = common::rng(seed);
    let mut records = Vec::new();
    let mut questions = Vec::new();
    for q in 0..rng.gen_range(1..=6) {
        let mut names = NAMES.to_vec();
        names.shuffle(&mut rng);
        let n_cand = rng.gen_range(0..=6);
        let mut candidates: Vec<TokenSpan> = names[..n_cand]
            .iter()
            .map(|n| span(n, f64::from(rng.gen_range(1..=10)) / 10.0))
            .collect();
        candidates.sort_by(|a, b| b.probability.total_cmp(&a.probability));
        let mut gold_names = names.clone();
        gold_names.shuffle(&mut rng);
        let gold = gold_names[..rng.gen_range(1..=4)]
            .iter()
            .map(|n| AnswerGroup {
                synonyms: vec![n.to_string()],
                spans: Vec::new(),
            })
            .collect();
        let id = format!("q{q}");
        questions.push(Question {
            id: id.clone(),
            qtype: QuestionType::List,
            text: String::new(),
            question_tokens: Vec::new(),
            snippets: Vec::new(),
            gold,
        });
        records.push(PredictionRecord {
            id,
            qtype: QuestionType::List,
            answers: Vec::new(),
            candidates,
        });
    }
    let mut factoid = questions[0].clone();
    factoid.id = "factoid".into();
    factoid.qtype = QuestionType::Factoid;
    questions.push(factoid);
    records.push(PredictionRecord {
        id: "factoid".into(),
        qtype: QuestionType::Factoid,
        answers: Vec::new(),
        candidates: vec![span("zzz", 0.55)],
    });
    (records, questions)
}

/// Mean list F1 when every list question keeps the candidates at or above
/// `t`, or its single best candidate when none is.
fn mean_f1(records: &[PredictionRecord], questions: &[Question], t: f64) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (r, q) in records.iter().zip(questions) {
        if q.qtype != QuestionType::List {
            continue;
        }
        n += 1;
        let mut chosen: Vec<&str> = r
            .candidates
            .iter()
            .filter(|s| s.probability >= t)
            .map(|s| s.text.as_str())
            .collect();
        if chosen.is_empty() {
            chosen.extend(r.candidates.first().map(|s| s.text.as_str()));
        }
        let gold: HashSet<&str> = q.gold.iter().map(|g| g.synonyms[0].as_str()).collect();
        let tp = chosen.iter().filter(|c| gold.contains(*c)).count() as f64;
        if tp > 0.0 {
            let (p, r) = (tp / chosen.len() as f64, tp / gold.len() as f64);
            total += 2.0 * p * r / (p + r);
        }
    }
    total / n as f64
}

pub fn check() -> Outcome {
    let mut compared = 0;
    for seed in 0..FIXTURES {
        let (records, questions) = fixture(seed);
        let mut cutoffs: Vec<f64> = records
            .iter()
            .zip(&questions)
            .filter(|(_, q)| q.qtype == QuestionType::List)
            .flat_map(|(r, _)| r.candidates.iter().map(|s| s.probability))
            .collect();
        cutoffs.push(0.0);
        // highest F1, then highest cutoff
        let best = cutoffs
            .iter()
            .map(|&t| (mean_f1(&records, &questions, t), t))
            .max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let has_candidates = cutoffs.len() > 1;
        match (tune_threshold(&records, &questions), best) {
            (Ok(c), Some((f1, t))) if has_candidates => {
                if c.threshold != t || (c.list_f1 - f1).abs() > 1e-12 {
                    return Outcome::Fail(format!(
                        "fixture {seed}: tuned t={} F1={}, search t={t} F1={f1}",
                        c.threshold, c.list_f1
                    ));
                }
                compared += 1;
            }
            (Err(_), _) if !has_candidates => {}
            (got, _) => return Outcome::Fail(format!("fixture {seed}: unexpected {got:?}")),
        }
    }
    Outcome::check(
        compared >= FIXTURES as usize * 9 / 10,
        format!("{compared} of {FIXTURES} fixtures compared, all equal to exhaustive search"),
    )
}
