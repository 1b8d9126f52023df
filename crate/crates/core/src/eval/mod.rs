//! Identification rates, significance tests, precision/recall/F1,
//! cross-validation folds and the raw-versus-segregated experiment.

mod experiment;
mod folds;
mod metrics;
mod plot;

pub use experiment::{
    noisy_copy, read_baselines, run_experiment, write_report, Baseline, ConditionResult, EvalReport, ExperimentConfig,
    System, TTest, Trial,
};
pub use folds::{kfold_split, Folds};
pub use metrics::{
    f1_score, per_class_prf, precision_recall_f1, sid_rate, student_t, ConfusionMatrix, Prf, T_CRITICAL,
};
pub use plot::grouped_bar_svg;
