mod bioasq;
mod decoding;
mod determinism;
mod ensemble;
mod folds;
mod forgetting;
mod gradients;
mod l2_pull;
mod metrics;
mod overfit;
mod probabilities;
mod threshold;

pub enum Outcome {
    Pass(String),
    Fail(String),
    /// Needs external data that is not available.
    Skip(String),
}

impl Outcome {
    pub fn check(ok: bool, detail: String) -> Outcome {
        if ok {
            Outcome::Pass(detail)
        } else {
            Outcome::Fail(detail)
        }
    }
}

pub type Check = fn() -> Outcome;

pub const CRITERIA: &[(&str, Check)] = &[
    ("gradient correctness", gradients::check),
    ("decoding oracle", decoding::check),
    ("probability identities", probabilities::check),
    ("overfit synthetic corpus", overfit::check),
    ("forgetting-cost behavior", forgetting::check),
    ("l2-pull behavior", l2_pull::check),
    ("metric oracles", metrics::check),
    ("threshold optimality", threshold::check),
    ("ensemble identity", ensemble::check),
    ("determinism", determinism::check),
    ("cross-validation partition", folds::check),
    ("bioasq 2017 ingestion", bioasq::check),
];

use spanqa::encoder::ModelParams;
use spanqa::pipeline::PreparedQuestion;
use spanqa::training::{train, LossConfig, Phase, TrainConfig};

pub const TOY_HIDDEN: usize = 16;

/// A base model trained on one toy task, a differently drawn target task
/// and held-out questions from a third draw.
pub struct Transfer {
    pub base: ModelParams,
    pub target: Vec<PreparedQuestion>,
    pub held_out: Vec<PreparedQuestion>,
}

pub fn toy_transfer() -> Transfer {
    let (source, config) = crate::common::toy_set(100, 24, 8, TOY_HIDDEN);
    let (target, _) = crate::common::toy_set(200, 24, 8, TOY_HIDDEN);
    let (held_out, _) = crate::common::toy_set(300, 12, 8, TOY_HIDDEN);
    let cfg = TrainConfig {
        lr: Some(1e-2),
        steps: 150,
        loss: LossConfig {
            dropout_rate: 0.0,
            ..Default::default()
        },
        seed: 1,
        ..Default::default()
    };
    let base = train(
        &source,
        None,
        None,
        ModelParams::init(config, 1),
        None,
        &cfg,
    )
    .unwrap()
    .params;
    Transfer {
        base,
        target,
        held_out,
    }
}

/// Fine-tunes the base on the target task with the given regularizers.
pub fn finetune(t: &Transfer, c_fc: f64, c_l2: f64, lr: f64, steps: usize) -> ModelParams {
    let cfg = TrainConfig {
        phase: Phase::Finetune,
        lr: Some(lr),
        steps,
        loss: LossConfig {
            c_fc,
            c_l2,
            dropout_rate: 0.0,
        },
        seed: 2,
        ..Default::default()
    };
    train(&t.target, None, None, t.base.clone(), Some(&t.base), &cfg)
        .unwrap()
        .params
}
