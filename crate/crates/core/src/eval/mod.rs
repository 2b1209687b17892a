//! Detection evaluation: NMS, average precision, AP-versus-budget curves,
//! baseline policies and hyperparameter tuning.

pub mod curve;
pub mod metrics;
pub mod plot;
pub mod tune;

pub use curve::{
    budget_curve, curve_from_episodes, detections_at, evaluate_detections, exhaustive_episode, mean_curve,
    random_mean_curve, regular_checkpoints, run_policy, subsampling_baseline, BudgetCurve, Policy, SearchSetup,
};
pub use metrics::{average_precision, nms, nms_per_image, precision_recall, Detection, MATCH_IOU, NMS_THRESHOLD};
pub use tune::{tune_hyperparameters, FoldForest, GridScore, TuneConfig, TuneGrid, TuneResult};
