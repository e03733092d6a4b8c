//! Sigmoid start probabilities, softmax end rows and their product.

use rand::Rng;

use super::Outcome;
use crate::common;
use spanqa::corpus::Snippet;
use spanqa::encoder::ScoreSet;
use spanqa::spanner::{decode_spans, end_probs, start_probs, DecodingConfig, SpanProbabilities};

const SAMPLES: usize = 500;

pub fn check() -> Outcome {
    let mut failures = Vec::new();
    if start_probs(&[0.0]) != [0.5] {
        failures.push("sigmoid(0) != 0.5".to_string());
    }
    for n in 1..=64 {
        if end_probs(&vec![0.0; n])
            .iter()
            .any(|&p| p != 1.0 / n as f64)
        {
            failures.push(format!("uniform row of {n} is not exactly 1/{n}"));
        }
        // a constant shift leaves the softmax unchanged
        if end_probs(&vec![700.0; n])
            .iter()
            .any(|&p| p != 1.0 / n as f64)
        {
            failures.push(format!("shifted uniform row of {n} is not exactly 1/{n}"));
        }
    }

    let mut rng = common::rng(5);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..SAMPLES {
        let n = rng.gen_range(1..=30);
        let scale = [1.0, 10.0, 300.0][rng.gen_range(0..3)];
        let words: Vec<String> = (0..n).map(|k| format!("w{k}")).collect();
        let snippet = Snippet::new("s", words.join(" "));
        let scores = ScoreSet {
            y_start: (0..n).map(|_| rng.gen_range(-scale..scale)).collect(),
            y_end: (0..n)
                .map(|i| (i, (i..n).map(|_| rng.gen_range(-scale..scale)).collect()))
                .collect(),
        };
        let probs = SpanProbabilities::from_scores(&scores);
        for (i, row) in &probs.p_end {
            worst_sum = worst_sum.max((row.iter().sum::<f64>() - 1.0).abs());
            for (off, &pe) in row.iter().enumerate() {
                if probs.p_span(*i, i + off) != Some(probs.p_start[*i] * pe) {
                    failures.push(format!("p_span({i}, {}) is not the product", i + off));
                }
            }
        }
        if probs.p_start.iter().any(|p| !(0.0..=1.0).contains(p)) {
            failures.push("start probability outside [0, 1]".into());
        }
        let cfg = DecodingConfig {
            k_starts: n,
            k_spans: n * (n + 1) / 2,
            ..Default::default()
        };
        for span in decode_spans(&scores, &snippet, 0, &cfg) {
            if span.probability != span.p_start * span.p_end
                || span.p_start != probs.p_start[span.token_start]
                || span.p_end != probs.p_end[&span.token_start][span.token_end - span.token_start]
            {
                failures.push(format!(
                    "stored factors of span {:?} disagree",
                    (span.token_start, span.token_end)
                ));
            }
        }
    }
    if worst_sum > 1e-9 {
        failures.push(format!("end row sums off by {worst_sum:e}"));
    }
    failures.truncate(3);
    Outcome::check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{SAMPLES} random score sets, worst end-row sum error {worst_sum:.1e}")
        } else {
            failures.join("; ")
        },
    )
}
