use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Finetune,
}

impl Phase {
    pub fn default_lr(self) -> f64 {
        match self {
            Phase::Pretrain => 1e-3,
            Phase::Finetune => 1e-4,
        }
    }

    /// Pretraining watches dev loss; fine-tuning watches dev answer quality.
    pub fn lower_is_better(self) -> bool {
        self == Phase::Pretrain
    }
}

/// Learning-rate state: halves whenever a checkpoint's dev metric is worse
/// than the previous checkpoint's. The rate never increases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub phase: Phase,
    pub lr: f64,
    pub checkpoint_every: usize,
    pub history: Vec<f64>,
}

impl TrainSchedule {
    pub fn new(phase: Phase, lr: f64, checkpoint_every: usize) -> Self {
        assert!(lr > 0.0 && checkpoint_every > 0);
        TrainSchedule {
            phase,
            lr,
            checkpoint_every,
            history: Vec::new(),
        }
    }

    pub fn is_checkpoint(&self, step: usize) -> bool {
        step.is_multiple_of(self.checkpoint_every)
    }
}

/// Appends `dev_metric` to the history and halves the rate if it is worse
/// than the previous entry.
pub fn maybe_halve_lr(mut schedule: TrainSchedule, dev_metric: f64) -> TrainSchedule {
    if let Some(&prev) = schedule.history.last() {
        let worse = if schedule.phase.lower_is_better() {
            dev_metric > prev
        } else {
            dev_metric < prev
        };
        if worse {
            schedule.lr /= 2.0;
        }
    }
    schedule.history.push(dev_metric);
    schedule
}
