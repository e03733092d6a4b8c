//! Training from scratch memorizes the bundled synthetic corpus.

use std::time::Instant;

use super::Outcome;
use crate::common;
use spanqa::corpus::load_bioasq;
use spanqa::embedding::{EmbeddingConfig, Resources, WordVectorTable};
use spanqa::encoder::{ModelConfig, ModelParams};
use spanqa::evaluation::evaluate;
use spanqa::pipeline::{answer_map, predict_all, prepare_all};
use spanqa::training::{train, LossConfig, TrainConfig};

const LIMIT_SECS: f64 = 300.0;

pub fn check() -> Outcome {
    let started = Instant::now();
    let questions = load_bioasq(common::data_path("synthetic_bioasq.json")).unwrap();
    let table = WordVectorTable::load_inferred(common::data_path("synthetic_vectors.txt")).unwrap();
    let config = ModelConfig::new(
        EmbeddingConfig {
            open_domain_dim: Some(table.dim()),
            ..Default::default()
        },
        32,
    );
    let resources = Resources {
        open_domain: Some(table),
        ..Default::default()
    };
    let preps = prepare_all(&questions, &resources, &config).unwrap();
    // Memorization is a capacity check, so dropout is off; everything
    // else keeps its default.
    let cfg = TrainConfig {
        steps: 500,
        loss: LossConfig {
            dropout_rate: 0.0,
            ..Default::default()
        },
        seed: 11,
        ..Default::default()
    };
    let outcome = train(
        &preps,
        None,
        None,
        ModelParams::init(config, 11),
        None,
        &cfg,
    )
    .unwrap();
    let records = predict_all(&preps, &outcome.params, &cfg.decoding).unwrap();
    let report = evaluate(&answer_map(&records), &questions);
    let secs = started.elapsed().as_secs_f64();
    Outcome::check(
        questions.len() == 20
            && report.n_factoid_evaluated > 0
            && report.n_list_evaluated > 0
            && report.factoid_mrr == 1.0
            && report.list_f1 >= 0.95
            && secs < LIMIT_SECS,
        format!(
            "{} factoid / {} list questions, {} steps: MRR {:.4}, list F1 {:.4}",
            report.n_factoid_evaluated,
            report.n_list_evaluated,
            outcome.log.len(),
            report.factoid_mrr,
            report.list_f1
        ),
    )
}
