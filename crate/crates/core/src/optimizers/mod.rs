//! Centralized upper bound and the Stackelberg (leader/follower) mechanism.

mod centralized;
pub mod knapsack;
mod leader;
mod preference;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{compute_capacities, SubcarrierAssignment};
use crate::error::{Error, Result};
use crate::outcome::{Diagnostics, MechanismOutcome, Mode};
use crate::scenario::Scenario;
use crate::sensing::{self, ParticipationMatrix};

pub use centralized::{run_centralized, run_centralized_with, CentralizedConfig, EXACT_CENTRALIZED_CAP};
pub use knapsack::{
    follower_exact_knapsack, follower_objective, follower_prefix_selection, follower_rational_prefix, knapsack_exact,
    Item, EXACT_KNAPSACK_CAP,
};
pub use leader::{is_move_local_optimum, leader_allocate, predicted_objective, LeaderConfig, EXHAUSTIVE_LEADER_CAP};
pub use preference::{build_preference_matrix, preference_ratio, PreferenceMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimality {
    Exact,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: u64,
    pub nodes_explored: u64,
    /// Not serialized so that outcome files stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: f64,
    pub optimality: Optimality,
}

/// How followers pick tasks once their budget is known.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FollowerRule {
    /// Preference-order prefix that stops at the first unaffordable or
    /// unprofitable task.
    #[default]
    Prefix,
    /// Preference-order prefix that ignores item values.
    LiteralPrefix,
    /// Exact 0-1 knapsack best response.
    Knapsack,
}

impl fmt::Display for FollowerRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FollowerRule::Prefix => "prefix",
            FollowerRule::LiteralPrefix => "literal-prefix",
            FollowerRule::Knapsack => "knapsack",
        })
    }
}

impl FromStr for FollowerRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prefix" => Ok(FollowerRule::Prefix),
            "literal-prefix" => Ok(FollowerRule::LiteralPrefix),
            "knapsack" => Ok(FollowerRule::Knapsack),
            other => Err(Error::Config(format!("unknown follower rule `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoncoopConfig {
    pub leader: LeaderConfig,
    pub followers: FollowerRule,
}

/// Phase-2 follower play for a fixed assignment.
pub fn follower_participation(
    scenario: &Scenario,
    prefs: &PreferenceMatrix,
    budgets: &[f64],
    rule: FollowerRule,
) -> Result<ParticipationMatrix> {
    let mut x = ParticipationMatrix::new(scenario.n_tasks(), scenario.n_users());
    for (j, &budget) in budgets.iter().enumerate() {
        let column = match rule {
            FollowerRule::Prefix => follower_rational_prefix(scenario, prefs, budget, j),
            FollowerRule::LiteralPrefix => follower_prefix_selection(prefs, budget, &scenario.tasks, j),
            FollowerRule::Knapsack => follower_exact_knapsack(scenario, budget, j)?.0,
        };
        x.set_strategy(j, &column);
    }
    Ok(x)
}

/// Leader allocates subcarriers against the predicted prefix play, then
/// followers choose tasks under the resulting budgets.
pub fn run_noncooperative(scenario: &Scenario, config: &NoncoopConfig) -> Result<MechanismOutcome> {
    let caps = compute_capacities(scenario);
    let prefs = build_preference_matrix(scenario);
    let mut leader_cfg = config.leader.clone();
    if leader_cfg.predictor == FollowerRule::Knapsack {
        leader_cfg.predictor = FollowerRule::Prefix;
    }
    let (assignment, solver) = leader_allocate(scenario, &caps, &prefs, &leader_cfg);
    let budgets = assignment.budgets(&caps);
    let participation = follower_participation(scenario, &prefs, &budgets, config.followers)?;
    let utilities = sensing::report_noncoop(scenario, &participation);
    Ok(MechanismOutcome::new(
        Mode::Noncoop,
        scenario,
        Some(scenario.params.incentive_alpha1),
        assignment,
        participation,
        utilities,
        None,
        Diagnostics { solver: Some(solver), ocf: None },
    ))
}

/// Builds the outcome record for an externally chosen `(S, X)` evaluated as
/// the centralized objective.
pub fn centralized_outcome(
    scenario: &Scenario,
    assignment: SubcarrierAssignment,
    participation: ParticipationMatrix,
    solver: SolverDiagnostics,
) -> MechanismOutcome {
    let utilities = sensing::report_centralized(scenario, &participation);
    MechanismOutcome::new(
        Mode::Centralized,
        scenario,
        None,
        assignment,
        participation,
        utilities,
        None,
        Diagnostics { solver: Some(solver), ocf: None },
    )
}
