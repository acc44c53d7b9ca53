//! Tabular actor-mimic laboratory: gridworld games, value-iteration experts,
//! guidance generation and mimic training.

mod expert;
mod game;
mod guidance;
mod train;


pub use expert::{argmax_set, expert_policy, greedy_action, ExpertPolicy, ARGMAX_TOLERANCE};
pub use game::{
    default_games, gridworld, value_iteration, value_iteration_with, TabularGame, GRID_ACTIONS,
    VALUE_ITERATION_CAP, VALUE_ITERATION_TOLERANCE,
};
pub use guidance::{
    generate_guidance, FeatureMap, GuidanceSample, GuidanceStream, DEFAULT_HORIZON,
    NEAR_CENTROID_GUIDANCE_DISTANCE,
};
pub use train::{
    evaluate_policy, greedy_agreement, mimic_loss, mimic_network, policy_table, train_mimic,
    ActionSelection, EvalOptions, MimicConfig, MimicLoss, MimicMetrics, MimicMode, MimicOutcome,
};
