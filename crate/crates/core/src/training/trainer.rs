use std::collections::BTreeSet;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::OptimizerState;
use super::dropout::variational_masks;
use super::loss::{
    base_argmax_start, forgetting_cost, gold_spans, l2_param_loss, required_starts, span_loss,
    total_loss, LossBreakdown, LossConfig,
};
use super::mix::{epochs, mix_datasets, Draw};
use super::schedule::{maybe_halve_lr, Phase, TrainSchedule};
use crate::encoder::{DropoutMasks, EndRows, ModelParams};
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::pipeline::{answer_map, forward_question, predict_all, PreparedQuestion};
use crate::spanner::DecodingConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub phase: Phase,
    /// Defaults to the phase's initial rate.
    pub lr: Option<f64>,
    pub steps: usize,
    pub batch_size: usize,
    pub checkpoint_every: usize,
    pub loss: LossConfig,
    pub seed: u64,
    /// Decoding used for dev evaluation during fine-tuning.
    pub decoding: DecodingConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            phase: Phase::Pretrain,
            lr: None,
            steps: 500,
            batch_size: 8,
            checkpoint_every: 50,
            loss: LossConfig::default(),
            seed: 0,
            decoding: DecodingConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn initial_lr(&self) -> f64 {
        self.lr.unwrap_or_else(|| self.phase.default_lr())
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.decoding.validate()?;
        let lr = self.initial_lr();
        if !(lr.is_finite() && lr > 0.0) || self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(Error::ConfigMismatch(format!(
                "need a positive learning rate, batch size and checkpoint interval (lr={lr}, batch={}, every={})",
                self.batch_size, self.checkpoint_every
            )));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: usize,
    pub l_original: f64,
    pub l_fc: f64,
    pub l_l2: f64,
    pub l_final: f64,
    /// Rate used for this step.
    pub lr: f64,
    /// Present on checkpoint steps when a dev set is available.
    pub dev_metric: Option<f64>,
}

pub fn write_log_csv(rows: &[TrainLogRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<TrainLogRow>,
    pub schedule: TrainSchedule,
}

/// Span loss and forgetting cost of one question with the gradient of
/// `l_original + c_fc * l_fc`. The forgetting cost is computed only when
/// `base` is given; the base model sees no dropout.
pub fn example_gradient(
    prep: &PreparedQuestion,
    params: &ModelParams,
    base: Option<&ModelParams>,
    c_fc: f64,
    masks: Option<&DropoutMasks>,
) -> Result<(f64, f64, ModelParams)> {
    let groups = gold_spans(&prep.question)?;
    let mut rows = required_starts(&groups, prep.n_snippets());
    let base_scores = match base {
        Some(b) => {
            let scores = forward_question(prep, b, None, |_, _| EndRows::TopK(1))?.scores;
            for (k, sc) in scores.iter().enumerate() {
                rows[k].insert(base_argmax_start(sc));
            }
            Some(scores)
        }
        None => None,
    };
    let pass = forward_question(prep, params, masks, |k, _| {
        EndRows::Starts(rows[k].iter().copied().collect())
    })?;
    let (mut total, _) = span_loss(&pass.scores, &groups)?;
    let l_original = total.value;
    let mut l_fc = 0.0;
    if let Some(base_scores) = base_scores {
        let fc = forgetting_cost(&pass.scores, &base_scores)?;
        l_fc = fc.value;
        total.add_scaled(&fc, c_fc);
    }
    let grads = crate::pipeline::backward_question(&pass, &total.d_start, &total.d_end, params)?;
    Ok((l_original, l_fc, grads))
}

/// Span loss of one question without dropout or regularizers.
pub fn example_loss(prep: &PreparedQuestion, params: &ModelParams) -> Result<f64> {
    let groups = gold_spans(&prep.question)?;
    let rows = required_starts(&groups, prep.n_snippets());
    let pass = forward_question(prep, params, None, |k, _| {
        EndRows::Starts(rows[k].iter().copied().collect())
    })?;
    Ok(span_loss(&pass.scores, &groups)?.0.value)
}

/// Batch objective: mean span loss plus `c_fc` times mean forgetting cost
/// plus `c_l2` times the L2 distance to `base`, with its gradient.
pub fn objective(
    batch: &[&PreparedQuestion],
    params: &ModelParams,
    base: Option<&ModelParams>,
    loss: &LossConfig,
    masks: Option<&[DropoutMasks]>,
) -> Result<(LossBreakdown, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let parts: Vec<(f64, f64, ModelParams)> = batch
        .par_iter()
        .enumerate()
        .map(|(b, prep)| example_gradient(prep, params, base, loss.c_fc, masks.map(|m| &m[b])))
        .collect::<Result<_>>()?;
    let inv_b = 1.0 / batch.len() as f64;
    let mut grads = params.zeros_like();
    let (mut l_original, mut l_fc) = (0.0, 0.0);
    for (o, f, g) in &parts {
        l_original += o * inv_b;
        l_fc += f * inv_b;
        grads.add_scaled(g, inv_b);
    }
    let mut l_l2 = 0.0;
    if let Some(b) = base {
        let (value, g) = l2_param_loss(params, b)?;
        l_l2 = value;
        grads.add_scaled(&g, loss.c_l2);
    }
    Ok((total_loss(l_original, l_fc, l_l2, loss), grads))
}

/// Checkpoint metric: mean dev span loss when pretraining; mean of factoid
/// MRR and list F1 (over the types present) when fine-tuning.
pub fn dev_metric(
    dev: &[PreparedQuestion],
    params: &ModelParams,
    cfg: &TrainConfig,
) -> Result<Option<f64>> {
    match cfg.phase {
        Phase::Pretrain => {
            let losses: Vec<Option<f64>> = dev
                .par_iter()
                .map(|p| match example_loss(p, params) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::NoExtractableAnswer(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<_>>()?;
            let kept: Vec<f64> = losses.into_iter().flatten().collect();
            Ok((!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64))
        }
        Phase::Finetune => {
            let records = predict_all(dev, params, &cfg.decoding)?;
            let questions: Vec<_> = dev.iter().map(|p| p.question.clone()).collect();
            Ok(evaluate(&answer_map(&records), &questions).combined_score())
        }
    }
}

/// Trains `init` on `train_set`.
///
/// With `mix_source`, batches alternate between `train_set` (drawn with
/// replacement) and the source set. Questions without an extractable gold
/// span are skipped. `base` is required when either regularizer is active.
pub fn train(
    train_set: &[PreparedQuestion],
    mix_source: Option<&[PreparedQuestion]>,
    dev: Option<&[PreparedQuestion]>,
    init: ModelParams,
    base: Option<&ModelParams>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.loss.needs_base() && base.is_none() {
        return Err(Error::ConfigMismatch(
            "forgetting cost or L2 pull requires base parameters".into(),
        ));
    }
    if let Some(b) = base {
        init.check_same_shapes(b)?;
    }
    let trainable = |set: &[PreparedQuestion]| -> Vec<usize> {
        (0..set.len())
            .filter(|&i| gold_spans(&set[i].question).is_ok())
            .collect()
    };
    let target_idx = trainable(train_set);
    let source_idx = mix_source.map(trainable).unwrap_or_default();
    let mut next: Box<dyn Iterator<Item = &PreparedQuestion>> = match mix_source {
        Some(src) => Box::new(
            mix_datasets(target_idx.len(), source_idx.len(), cfg.seed)?.map(move |d| match d {
                Draw::Target(i) => &train_set[target_idx[i]],
                Draw::Source(i) => &src[source_idx[i]],
            }),
        ),
        None => {
            Box::new(epochs(target_idx.len(), cfg.seed)?.map(move |i| &train_set[target_idx[i]]))
        }
    };

    let mut params = init;
    let mut schedule = TrainSchedule::new(cfg.phase, cfg.initial_lr(), cfg.checkpoint_every);
    let mut opt = OptimizerState::new(&params, schedule.lr);
    let mut mask_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let width = params.config().embedding.total_dim();
    let mut log = Vec::with_capacity(cfg.steps);

    for step in 1..=cfg.steps {
        let batch: Vec<&PreparedQuestion> = next.by_ref().take(cfg.batch_size).collect();
        let masks: Option<Vec<DropoutMasks>> = (cfg.loss.dropout_rate > 0.0).then(|| {
            batch
                .iter()
                .map(|_| variational_masks(width, cfg.loss.dropout_rate, &mut mask_rng))
                .collect()
        });
        let (parts, grads) = objective(&batch, &params, base, &cfg.loss, masks.as_deref())?;
        if !parts.l_final.is_finite() {
            return Err(Error::DivergedLoss {
                step,
                value: parts.l_final,
            });
        }
        let lr = opt.lr();
        opt.step(&mut params, &grads)?;
        let mut metric = None;
        if schedule.is_checkpoint(step) {
            if let Some(dev) = dev {
                metric = dev_metric(dev, &params, cfg)?;
                if let Some(m) = metric {
                    schedule = maybe_halve_lr(schedule, m);
                    opt.set_lr(schedule.lr);
                }
            }
        }
        log.push(TrainLogRow {
            step,
            l_original: parts.l_original,
            l_fc: parts.l_fc,
            l_l2: parts.l_l2,
            l_final: parts.l_final,
            lr,
            dev_metric: metric,
        });
    }
    Ok(TrainOutcome {
        params,
        log,
        schedule,
    })
}

/// Mean L_fc of `params` against `base` over `preps`, without dropout.
pub fn mean_forgetting_cost(
    preps: &[PreparedQuestion],
    params: &ModelParams,
    base: &ModelParams,
) -> Result<f64> {
    if preps.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let values: Vec<f64> = preps
        .par_iter()
        .map(|p| {
            let base_scores = forward_question(p, base, None, |_, _| EndRows::TopK(1))?.scores;
            let starts: Vec<BTreeSet<usize>> = base_scores
                .iter()
                .map(|s| BTreeSet::from([base_argmax_start(s)]))
                .collect();
            let current = forward_question(p, params, None, |k, _| {
                EndRows::Starts(starts[k].iter().copied().collect())
            })?
            .scores;
            Ok(forgetting_cost(&current, &base_scores)?.value)
        })
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
