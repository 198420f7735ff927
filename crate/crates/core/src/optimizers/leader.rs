//! The base station's subcarrier allocation against predicted follower play.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{self, CapacityMatrix, SubcarrierAssignment};
use crate::optimizers::{FollowerRule, Optimality, PreferenceMatrix, SolverDiagnostics};
use crate::scenario::Scenario;
use crate::sensing::{performance_from_total, EPS};

/// Largest `M^K` searched exhaustively.
pub const EXHAUSTIVE_LEADER_CAP: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderConfig {
    pub restarts: usize,
    pub predictor: FollowerRule,
    pub exhaustive_cap: u128,
}

impl Default for LeaderConfig {
    fn default() -> Self {
        LeaderConfig { restarts: 20, predictor: FollowerRule::Prefix, exhaustive_cap: EXHAUSTIVE_LEADER_CAP }
    }
}

/// Per-user prediction: the user takes the first `level` entries of `ladder`,
/// where `level` is how many cumulative rates fit its budget.
#[derive(Clone, Debug)]
pub(crate) struct Predictor {
    ladders: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
    /// `γ β r_i − α₁ Q_{i,j}` per ladder entry.
    linear: Vec<Vec<f64>>,
}

impl Predictor {
    pub(crate) fn new(scenario: &Scenario, prefs: &PreferenceMatrix, rule: FollowerRule) -> Self {
        let gamma = scenario.params.revenue_split;
        let alpha1 = scenario.params.incentive_alpha1;
        let mut ladders = Vec::with_capacity(scenario.n_users());
        let mut cumulative = Vec::with_capacity(scenario.n_users());
        let mut linear = Vec::with_capacity(scenario.n_users());
        for j in 0..scenario.n_users() {
            let mut ladder = Vec::new();
            let mut cum = Vec::new();
            let mut lin = Vec::new();
            let mut used = 0.0;
            for i in prefs.order(j) {
                if rule != FollowerRule::LiteralPrefix
                    && crate::optimizers::knapsack::follower_item_value(scenario, i, j) <= 0.0
                {
                    break;
                }
                used += scenario.tasks[i].r;
                ladder.push(i);
                cum.push(used);
                lin.push(gamma * scenario.charge(i) - alpha1 * scenario.q(i, j));
            }
            ladders.push(ladder);
            cumulative.push(cum);
            linear.push(lin);
        }
        Predictor { ladders, cumulative, linear }
    }

    #[inline]
    pub(crate) fn level(&self, user: usize, budget: f64) -> usize {
        self.cumulative[user].partition_point(|&c| c <= budget)
    }
}

/// Incremental evaluation of `U_nonco(X(S))` under single-subcarrier moves.
struct LeaderState<'a> {
    scenario: &'a Scenario,
    caps: &'a CapacityMatrix,
    pred: &'a Predictor,
    assign: SubcarrierAssignment,
    budgets: Vec<f64>,
    levels: Vec<usize>,
    totals: Vec<f64>,
    perf: Vec<f64>,
    linear_sum: f64,
}

impl<'a> LeaderState<'a> {
    fn new(
        scenario: &'a Scenario,
        caps: &'a CapacityMatrix,
        pred: &'a Predictor,
        assign: SubcarrierAssignment,
    ) -> Self {
        let budgets = assign.budgets(caps);
        let mut st = LeaderState {
            scenario,
            caps,
            pred,
            assign,
            levels: vec![0; budgets.len()],
            budgets,
            totals: vec![0.0; scenario.n_tasks()],
            perf: vec![0.0; scenario.n_tasks()],
            linear_sum: 0.0,
        };
        for j in 0..st.budgets.len() {
            let lvl = pred.level(j, st.budgets[j]);
            st.shift_level(j, lvl);
        }
        st
    }

    fn objective(&self) -> f64 {
        self.perf.iter().sum::<f64>() + self.linear_sum
    }

    /// Moves user `j` to `new_level`, returning the objective change.
    fn shift_level(&mut self, j: usize, new_level: usize) -> f64 {
        let old = self.levels[j];
        if old == new_level {
            return 0.0;
        }
        let (range, sign) = if new_level > old { (old..new_level, 1.0) } else { (new_level..old, -1.0) };
        let mut delta = 0.0;
        for pos in range {
            let i = self.pred.ladders[j][pos];
            self.totals[i] += sign * self.scenario.q(i, j);
            let p = performance_from_total(&self.scenario.tasks[i], self.totals[i].max(0.0));
            delta += p - self.perf[i];
            self.perf[i] = p;
            let lin = sign * self.pred.linear[j][pos];
            self.linear_sum += lin;
            delta += lin;
        }
        self.levels[j] = new_level;
        delta
    }

    /// Tries moving subcarrier `k` to `to`; keeps the move if it improves the
    /// objective by more than `EPS`.
    fn try_move(&mut self, k: usize, to: usize) -> bool {
        let from = self.assign.owner(k);
        let new_to_budget = self.budgets[to] + self.caps.at(k, to);
        let to_level = self.pred.level(to, new_to_budget);
        let (from_level, new_from_budget) = match from {
            Some(f) => {
                let b = self.budgets[f] - self.caps.at(k, f);
                (self.pred.level(f, b), b)
            }
            None => (0, 0.0),
        };
        let unchanged_to = to_level == self.levels[to];
        let unchanged_from = from.is_none_or(|f| from_level == self.levels[f]);
        if unchanged_to && unchanged_from {
            return false;
        }
        let old_to_level = self.levels[to];
        let old_from_level = from.map(|f| self.levels[f]);
        let mut delta = 0.0;
        if let Some(f) = from {
            delta += self.shift_level(f, from_level);
        }
        delta += self.shift_level(to, to_level);
        if delta > EPS {
            if let Some(f) = from {
                self.budgets[f] = new_from_budget;
            }
            self.budgets[to] = new_to_budget;
            self.assign.assign(k, Some(to));
            true
        } else {
            self.shift_level(to, old_to_level);
            if let (Some(f), Some(l)) = (from, old_from_level) {
                self.shift_level(f, l);
            }
            false
        }
    }

    /// First-improvement descent; returns the number of move evaluations.
    fn descend(&mut self) -> u64 {
        let m = self.budgets.len();
        let k_total = self.assign.n_subcarriers();
        let mut evaluations = 0;
        loop {
            let mut improved = false;
            for k in 0..k_total {
                for to in 0..m {
                    if self.assign.owner(k) == Some(to) {
                        continue;
                    }
                    evaluations += 1;
                    if self.try_move(k, to) {
                        improved = true;
                    }
                }
            }
            if !improved {
                return evaluations;
            }
        }
    }
}

/// Evaluates `U_nonco` of the predicted participation under `assign`.
pub fn predicted_objective(
    scenario: &Scenario,
    caps: &CapacityMatrix,
    prefs: &PreferenceMatrix,
    rule: FollowerRule,
    assign: &SubcarrierAssignment,
) -> f64 {
    let pred = Predictor::new(scenario, prefs, rule);
    LeaderState::new(scenario, caps, &pred, assign.clone()).objective()
}

pub fn leader_allocate(
    scenario: &Scenario,
    caps: &CapacityMatrix,
    prefs: &PreferenceMatrix,
    config: &LeaderConfig,
) -> (SubcarrierAssignment, SolverDiagnostics) {
    let started = Instant::now();
    let m = scenario.n_users();
    let k_total = scenario.n_subcarriers();
    if m == 0 {
        let diag =
            SolverDiagnostics { iterations: 0, nodes_explored: 0, wall_time: 0.0, optimality: Optimality::Exact };
        return (SubcarrierAssignment::empty(k_total, 0), diag);
    }
    let pred = Predictor::new(scenario, prefs, config.predictor);
    let space = (m as u128).checked_pow(k_total as u32);

    if space.is_some_and(|s| s <= config.exhaustive_cap) {
        let mut owners = vec![0usize; k_total];
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut nodes = 0u64;
        loop {
            nodes += 1;
            let assign = SubcarrierAssignment::from_owners(owners.iter().map(|&j| Some(j)).collect(), m)
                .expect("owners in range");
            let value = LeaderState::new(scenario, caps, &pred, assign).objective();
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, owners.clone()));
            }
            // odometer increment, last subcarrier fastest
            let mut pos = k_total;
            loop {
                if pos == 0 {
                    let (_, owners) = best.expect("at least one assignment");
                    let assign = SubcarrierAssignment::from_owners(owners.into_iter().map(Some).collect(), m)
                        .expect("owners in range");
                    let diag = SolverDiagnostics {
                        iterations: nodes,
                        nodes_explored: nodes,
                        wall_time: started.elapsed().as_secs_f64(),
                        optimality: Optimality::Exact,
                    };
                    return (assign, diag);
                }
                pos -= 1;
                owners[pos] += 1;
                if owners[pos] < m {
                    break;
                }
                owners[pos] = 0;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed() ^ 0x4c45_4144_4552);
    let mut best: Option<(f64, SubcarrierAssignment)> = None;
    let mut evaluations = 0;
    for restart in 0..config.restarts.max(1) {
        let start = if restart == 0 {
            channel::allocate_priority(scenario, caps)
        } else {
            channel::allocate_random(scenario, &mut rng)
        };
        let mut st = LeaderState::new(scenario, caps, &pred, start);
        evaluations += st.descend();
        let value = st.objective();
        if best.as_ref().is_none_or(|(b, _)| value > *b + EPS) {
            best = Some((value, st.assign));
        }
    }
    let diag = SolverDiagnostics {
        iterations: evaluations,
        nodes_explored: evaluations,
        wall_time: started.elapsed().as_secs_f64(),
        optimality: Optimality::Heuristic,
    };
    (best.expect("at least one restart").1, diag)
}

/// True when no single subcarrier reassignment improves the predicted objective.
pub fn is_move_local_optimum(
    scenario: &Scenario,
    caps: &CapacityMatrix,
    prefs: &PreferenceMatrix,
    rule: FollowerRule,
    assign: &SubcarrierAssignment,
) -> bool {
    let base = predicted_objective(scenario, caps, prefs, rule, assign);
    for k in 0..assign.n_subcarriers() {
        for to in 0..assign.n_users() {
            if assign.owner(k) == Some(to) {
                continue;
            }
            let mut moved = assign.clone();
            moved.assign(k, Some(to));
            if predicted_objective(scenario, caps, prefs, rule, &moved) > base + EPS {
                return false;
            }
        }
    }
    true
}
