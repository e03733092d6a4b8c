#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanqa::corpus::{Question, QuestionType, Snippet};
use spanqa::embedding::{EmbeddingConfig, Resources, WordVectorTable};
use spanqa::encoder::{ModelConfig, ModelParams};
use spanqa::pipeline::{prepare_all, PreparedQuestion};

pub const WORD_DIM: usize = 4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_word(rng: &mut ChaCha8Rng) -> String {
    const LETTERS: &[char] = &[
        'a', 'b', 'c', 'd', 'e', 'k', 'n', 'p', 'r', 's', 't', '5', '3', 'α', 'β', '-',
    ];
    let len = rng.gen_range(1..=7);
    (0..len).map(|_| *LETTERS.choose(rng).unwrap()).collect()
}

/// Vocabulary with random vectors; some words stay out of vocabulary.
pub fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> (Vec<String>, WordVectorTable) {
    let mut table = WordVectorTable::new(WORD_DIM);
    let mut words = Vec::new();
    while words.len() < size {
        let w = random_word(rng);
        if words.contains(&w) {
            continue;
        }
        if rng.gen_bool(0.8) {
            let v = (0..WORD_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
            table.insert(&w, v).unwrap();
        }
        words.push(w);
    }
    (words, table)
}

/// A question whose snippets are random word sequences of 1..=max_len
/// tokens; gold answers are random spans of those snippets.
pub fn random_question(
    rng: &mut ChaCha8Rng,
    id: &str,
    words: &[String],
    max_len: usize,
) -> Question {
    let qtype = if rng.gen_bool(0.5) {
        QuestionType::Factoid
    } else {
        QuestionType::List
    };
    let n_snippets = rng.gen_range(1..=2);
    let snippets: Vec<Snippet> = (0..n_snippets)
        .map(|k| {
            let len = rng.gen_range(1..=max_len);
            let text: Vec<&str> = (0..len)
                .map(|_| words.choose(rng).unwrap().as_str())
                .collect();
            Snippet::new(format!("{id}/{k}"), text.join(" "))
        })
        .collect();
    let question_text: Vec<&str> = (0..rng.gen_range(1..=5))
        .map(|_| words.choose(rng).unwrap().as_str())
        .collect();
    let n_groups = if qtype == QuestionType::List { 2 } else { 1 };
    let groups = (0..n_groups)
        .map(|_| {
            let s = snippets.choose(rng).unwrap();
            let n = s.tokens.len();
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(i..n.min(i + 3));
            vec![s.surface(i, j)]
        })
        .collect();
    Question::annotated(id, qtype, question_text.join(" "), snippets, groups)
}

pub fn toy_config(hidden: usize) -> ModelConfig {
    ModelConfig::new(
        EmbeddingConfig {
            open_domain_dim: Some(WORD_DIM),
            ..Default::default()
        },
        hidden,
    )
}

pub fn toy_resources(table: WordVectorTable) -> Resources {
    Resources {
        open_domain: Some(table),
        domain: None,
        entities: None,
    }
}

/// `count` random questions prepared for a toy model of width `hidden`.
pub fn toy_set(
    seed: u64,
    count: usize,
    max_len: usize,
    hidden: usize,
) -> (Vec<PreparedQuestion>, ModelConfig) {
    let mut r = rng(seed);
    let (words, table) = vocabulary(&mut r, 25);
    let questions: Vec<Question> = (0..count)
        .map(|i| random_question(&mut r, &format!("q{i}"), &words, max_len))
        .collect();
    let config = toy_config(hidden);
    let preps = prepare_all(&questions, &toy_resources(table), &config).unwrap();
    (preps, config)
}

/// Parameters with every tensor, biases included, drawn uniformly from
/// `[-scale, scale]`.
pub fn random_params(config: ModelConfig, seed: u64, scale: f64) -> ModelParams {
    let mut p = ModelParams::init(config, seed);
    let mut r = rng(seed ^ 0x5eed);
    for (_, t) in p.iter_mut() {
        t.mapv_inplace(|_| r.gen_range(-scale..scale));
    }
    p
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}
