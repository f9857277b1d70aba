//! Cross-validation, chance level, time-resolved accuracy, condition
//! contrasts and the causal pseudo-online replay.

mod chance;
mod contrast;
mod loro;
mod online;
mod report;

pub use chance::{binomial_upper_tail, chance_level};
pub use contrast::{
    condition_contrast, mann_whitney, trial_period_values, ContrastResult, Direction, MannWhitney, Period,
};
pub use loro::{loro_cv, loro_cv_features, permute_labels, train_dlda};
pub use online::{
    pseudo_online_replay, replay_run, run_reference, stream_covariances, train_mdm, training_covariances, FilterMode,
    PredictionTrace, ReplayOutput, WindowPrediction,
};
pub use report::{time_resolved_accuracy, AccuracyCurve, EvalReport, FoldResult, Pipeline, SkippedFold, Summary};
