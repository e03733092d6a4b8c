//! MRR and list F1 on a hand-scored fixture.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::Outcome;
use crate::common;
use spanqa::corpus::load_bioasq;
use spanqa::evaluation::evaluate;

const TOL: f64 = 1e-9;

#[derive(Deserialize)]
struct Expected {
    factoid_reciprocal_ranks: BTreeMap<String, f64>,
    list_f1: BTreeMap<String, f64>,
    factoid_mrr: f64,
    list_precision: f64,
    list_recall: f64,
    #[serde(rename = "list_f1_mean")]
    mean_list_f1: f64,
    n_missing: usize,
}

pub fn check() -> Outcome {
    let questions = load_bioasq(common::data_path("golden_eval_bioasq.json")).unwrap();
    let read = |name: &str| std::fs::read_to_string(common::data_path(name)).unwrap();
    let predictions: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&read("golden_eval_predictions.json")).unwrap();
    let expected: Expected = serde_json::from_str(&read("golden_eval_expected.json")).unwrap();
    let report = evaluate(&predictions, &questions);

    let mut wrong = Vec::new();
    for q in &report.per_question {
        let want = expected
            .factoid_reciprocal_ranks
            .get(&q.id)
            .or_else(|| expected.list_f1.get(&q.id))
            .copied();
        match want {
            Some(w) if (w - q.score).abs() <= TOL => {}
            _ => wrong.push(format!("{}: {} vs {want:?}", q.id, q.score)),
        }
    }
    for (name, got, want) in [
        ("MRR", report.factoid_mrr, expected.factoid_mrr),
        (
            "list precision",
            report.list_precision,
            expected.list_precision,
        ),
        ("list recall", report.list_recall, expected.list_recall),
        ("list F1", report.list_f1, expected.mean_list_f1),
    ] {
        if (got - want).abs() > TOL {
            wrong.push(format!("{name}: {got} vs {want}"));
        }
    }
    if report.n_missing != expected.n_missing {
        wrong.push(format!(
            "missing: {} vs {}",
            report.n_missing, expected.n_missing
        ));
    }
    // the Greek-letter spelling must not match the spelled-out one, the
    // second synonym of a group must
    let score = |id: &str| {
        report
            .per_question
            .iter()
            .find(|q| q.id == id)
            .unwrap()
            .score
    };
    if score("g-f2") != 0.0 || score("g-f3") != 0.5 {
        wrong.push("negative or synonym case misjudged".into());
    }
    Outcome::check(
        wrong.is_empty() && report.per_question.len() == 10,
        if wrong.is_empty() {
            format!(
                "10 questions: MRR {:.4}, list P/R/F1 {:.4}/{:.4}/{:.4}",
                report.factoid_mrr, report.list_precision, report.list_recall, report.list_f1
            )
        } else {
            wrong.join("; ")
        },
    )
}
