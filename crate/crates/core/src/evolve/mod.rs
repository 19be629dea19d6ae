//! Policy evolution: PPO over the consensus tunables, Shapley validation of
//! a distilled surrogate, and drift detection.

pub mod drift;
pub mod env;
pub mod policy;
pub mod ppo;
pub mod shapley;
pub mod validate;

pub use drift::{detect_drift, DriftState, PageHinkley, PageHinkleyConfig};
pub use env::{
    decisions, decisions_on, evaluate, evaluate_on, window_f1, window_f1_on, Evaluation, FeedbackEnv, FeedbackRecord,
    MemberThresholds, ScorePath, EPISODE_LEN,
};
pub use policy::{
    apply_action, reward, PolicyAction, PolicyState, RewardWeights, Tunables, ACTION_LIMIT, CLIP_RANGE, INITIAL_RHO,
    INITIAL_W1, RHO_RANGE, TAU_RANGE, W_RANGE,
};
pub use ppo::{
    clipped_surrogate, gae, gaussian_logprob, normalize, squash, surrogate_logp_grad, value_loss_grad, GaussianPolicy,
    PpoAgent, PpoConfig, PpoDiagnostics, ReplayBuffer, SurrogateSample, Transition,
};
pub use shapley::{
    select_features, shapley_exact, ShapleyReport, Stump, StumpEnsemble, EFFICIENCY_TOL, MAX_EXACT_FEATURES,
};
pub use validate::{validate_policy, RecentMetrics, RejectReason, Verdict, SIGNIFICANCE};

use crate::neural::NeuralError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvolveError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no transitions or samples available")]
    EmptyBuffer,
    #[error("exact Shapley supports at most {max} features, got {got}")]
    TooManyFeatures { max: usize, got: usize },
    #[error("need {needed} metric windows, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("environment stepped before reset")]
    NotReset,
    #[error("statistics: {0}")]
    Stats(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}
