//! Optimal energy-transfer strategy and the adaptive energy-management
//! controller.

mod controller;
mod strategy;

pub use controller::{
    classify, control_map, delta, epoch_decision, estimate_channel, kappas, live_upsilon_hat,
    pi_update, x_max, ChannelEstimate, ControllerConfig, ControllerState, Decision, Scheme,
    SensorReport,
};
pub use strategy::{
    brute_force_optimum, dual_bound_check, end_to_end_efficiency, lagrangian,
    max_efficiency_point, optimal_strategy, CaseLabel, ControlTuple, DualCheck, GridOptimum,
    MaxEfficiencyPoint, StrategyOutcome,
};
