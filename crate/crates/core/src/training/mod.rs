//! Pretraining and fine-tuning: span loss, forgetting cost, L2 pull to the
//! base model, ADAM with learning-rate halving, variational dropout and
//! mixed-dataset sampling.

mod adam;
mod dropout;
mod loss;
mod mix;
mod schedule;
mod trainer;

pub use adam::{OptimizerState, BETA1, BETA2, EPSILON};
pub use dropout::variational_masks;
pub use loss::{
    base_argmax_start, forgetting_cost, gold_spans, l2_param_loss, required_starts, span_loss,
    span_nll, total_loss, GoldSpan, LossBreakdown, LossConfig, ScoreLoss,
};
pub use mix::{epochs, mix_datasets, Draw, EpochStream, MixedStream};
pub use schedule::{maybe_halve_lr, Phase, TrainSchedule};
pub use trainer::{
    dev_metric, example_gradient, example_loss, mean_forgetting_cost, objective, train,
    write_log_csv, TrainConfig, TrainLogRow, TrainOutcome,
};
