//! Ranked decoding against exhaustive enumeration of every span.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Outcome;
use crate::common;
use spanqa::corpus::Snippet;
use spanqa::encoder::ScoreSet;
use spanqa::spanner::{decode_spans, end_probs, merge_snippets, start_probs, DecodingConfig};

const SAMPLES: u64 = 200;
const MAX_LEN: usize = 20;
const LIMIT_SECS: f64 = 30.0;
/// Case and spacing variants collide after normalization.
const WORDS: &[&str] = &[
    "p53", "P53", "gene", "Gene", "GENE", "kinase", "of", "α-actin",
];

/// (snippet, start, end, probability, text)
type Ranked = (usize, usize, usize, f64, String);

fn random_snippet(rng: &mut ChaCha8Rng, id: usize) -> (Snippet, ScoreSet) {
    let n = rng.gen_range(1..=MAX_LEN);
    let text: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    let snippet = Snippet::new(format!("s{id}"), text.join(" "));
    assert_eq!(snippet.tokens.len(), n);
    // Scores from a small grid so exact ties are common.
    let grid = |rng: &mut ChaCha8Rng| f64::from(rng.gen_range(-3i32..=3)) * 0.5;
    let y_start = (0..n).map(|_| grid(rng)).collect();
    let y_end = (0..n)
        .map(|i| (i, (i..n).map(|_| grid(rng)).collect()))
        .collect();
    (snippet, ScoreSet { y_start, y_end })
}

fn normalized(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Every span of every snippet, ranked by probability then snippet, start
/// and end; per snippet only the first `k_spans` survive; duplicates by
/// normalized text keep their best occurrence.
fn enumerate(snippets: &[(Snippet, ScoreSet)], k_spans: usize) -> Vec<Ranked> {
    let mut all = Vec::new();
    for (s, (snippet, scores)) in snippets.iter().enumerate() {
        let ps = start_probs(&scores.y_start);
        let mut spans = Vec::new();
        for i in 0..scores.n() {
            let pe = end_probs(&scores.y_end[&i]);
            for j in i..scores.n() {
                spans.push((s, i, j, ps[i] * pe[j - i], snippet.surface(i, j)));
            }
        }
        spans.sort_by(|a: &Ranked, b: &Ranked| {
            b.3.total_cmp(&a.3).then((a.1, a.2).cmp(&(b.1, b.2)))
        });
        spans.truncate(k_spans);
        all.extend(spans);
    }
    all.sort_by(|a, b| {
        b.3.total_cmp(&a.3)
            .then((a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)))
    });
    let mut seen = HashSet::new();
    all.retain(|r| seen.insert(normalized(&r.4)));
    all
}

fn decoded(snippets: &[(Snippet, ScoreSet)], cfg: &DecodingConfig) -> Vec<Ranked> {
    let per = snippets
        .iter()
        .enumerate()
        .map(|(k, (sn, sc))| decode_spans(sc, sn, k, cfg))
        .collect();
    merge_snippets(per)
        .into_iter()
        .map(|t| {
            (
                t.snippet_index,
                t.token_start,
                t.token_end,
                t.probability,
                t.text,
            )
        })
        .collect()
}

/// Independent closed forms for the stored probabilities.
fn closed_form_error(snippets: &[(Snippet, ScoreSet)], ranked: &[Ranked]) -> f64 {
    ranked
        .iter()
        .map(|(s, i, j, p, _)| {
            let sc = &snippets[*s].1;
            let row: &Vec<f64> = &sc.y_end[i];
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            let expected = 1.0 / (1.0 + (-sc.y_start[*i]).exp()) * row[j - i].exp() / z;
            (p - expected).abs()
        })
        .fold(0.0, f64::max)
}

pub fn check() -> Outcome {
    let started = Instant::now();
    let mut rng = common::rng(2024);
    let mut spans_checked = 0;
    let mut max_err: f64 = 0.0;
    for sample in 0..SAMPLES {
        let n_snippets = rng.gen_range(1..=3);
        let snippets: Vec<_> = (0..n_snippets)
            .map(|k| random_snippet(&mut rng, k))
            .collect();
        let exhaustive = DecodingConfig {
            k_starts: MAX_LEN,
            k_spans: MAX_LEN * (MAX_LEN + 1) / 2,
            ..Default::default()
        };
        for cfg in [exhaustive, DecodingConfig::default()] {
            let got = decoded(&snippets, &cfg);
            let want = enumerate(&snippets, cfg.k_spans);
            if got != want {
                let at = got
                    .iter()
                    .zip(&want)
                    .position(|(a, b)| a != b)
                    .unwrap_or(got.len().min(want.len()));
                return Outcome::Fail(format!(
                    "sample {sample}, k_spans {}: first disagreement at rank {at}: {:?} vs {:?}",
                    cfg.k_spans,
                    got.get(at),
                    want.get(at)
                ));
            }
            max_err = max_err.max(closed_form_error(&snippets, &got));
            spans_checked += got.len();
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::check(
        secs < LIMIT_SECS && max_err < 1e-12,
        format!(
            "{SAMPLES} score sets, {spans_checked} ranked spans agree exactly, closed-form error {max_err:.1e}"
        ),
    )
}
