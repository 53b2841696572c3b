//! Optimization, evaluation and parameter accounting.

mod adam;
mod audit;
mod config;
mod fit;
mod metrics;
mod sweep;

pub use adam::{adam_step, AdamState, ADAM_EPS, BETA1, BETA2};
pub use audit::{count_params, format_millions, EncoderKind};
pub use config::TrainConfig;
pub use fit::{
    evaluate, load_model, predict_dataset, predict_record, save_model, train, Evaluation, History, HistoryRow,
    TrainOutcome,
};
pub use metrics::Metrics;
pub use sweep::{layer_sweep, SweepRow};
