//! Joint choice of subcarriers and participation with no incentive payments.

use std::time::Instant;

use crate::channel::{compute_capacities, CapacityMatrix, SubcarrierAssignment};
use crate::error::Result;
use crate::optimizers::{centralized_outcome, knapsack_exact, Item, Optimality, SolverDiagnostics};
use crate::outcome::MechanismOutcome;
use crate::scenario::Scenario;
use crate::sensing::{performance_from_total, utility_centralized, ParticipationMatrix, EPS};

/// Largest `M^K · 2^{N·M}` searched exhaustively.
pub const EXACT_CENTRALIZED_CAP: u128 = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub struct CentralizedConfig {
    pub exact_cap: u128,
    /// Upper limit on alternating rounds per start.
    pub max_rounds: usize,
}

impl Default for CentralizedConfig {
    fn default() -> Self {
        CentralizedConfig { exact_cap: EXACT_CENTRALIZED_CAP, max_rounds: 50 }
    }
}

pub fn run_centralized(scenario: &Scenario) -> Result<MechanismOutcome> {
    run_centralized_with(scenario, &CentralizedConfig::default(), &[])
}

/// `warm_starts` are extra subcarrier assignments the heuristic also starts from.
pub fn run_centralized_with(
    scenario: &Scenario,
    config: &CentralizedConfig,
    warm_starts: &[SubcarrierAssignment],
) -> Result<MechanismOutcome> {
    let started = Instant::now();
    let caps = compute_capacities(scenario);
    let n = scenario.n_tasks();
    let m = scenario.n_users();
    let k_total = scenario.n_subcarriers();

    let space = (m as u128)
        .checked_pow(k_total as u32)
        .and_then(|s| 1u128.checked_shl((n * m) as u32).and_then(|x| s.checked_mul(x)));
    if m == 0 || space.is_some_and(|s| s <= config.exact_cap) {
        let (assign, x, nodes) = exhaustive(scenario, &caps);
        let diag = SolverDiagnostics {
            iterations: nodes,
            nodes_explored: nodes,
            wall_time: started.elapsed().as_secs_f64(),
            optimality: Optimality::Exact,
        };
        return Ok(centralized_outcome(scenario, assign, x, diag));
    }

    let mut starts = vec![crate::channel::allocate_priority(scenario, &caps), strongest_link_allocation(&caps)];
    starts.extend(warm_starts.iter().cloned());
    let mut best: Option<(f64, SubcarrierAssignment, ParticipationMatrix)> = None;
    let mut evaluations = 0;
    for start in starts {
        let mut st = JointState::new(scenario, &caps, start);
        evaluations += st.improve(config.max_rounds)?;
        let value = utility_centralized(scenario, &st.x);
        if best.as_ref().is_none_or(|(b, _, _)| value > *b + EPS) {
            best = Some((value, st.assign, st.x));
        }
    }
    let (_, assign, x) = best.expect("at least one start");
    let diag = SolverDiagnostics {
        iterations: evaluations,
        nodes_explored: evaluations,
        wall_time: started.elapsed().as_secs_f64(),
        optimality: Optimality::Heuristic,
    };
    Ok(centralized_outcome(scenario, assign, x, diag))
}

/// Every subcarrier to the user with the best channel on it.
fn strongest_link_allocation(caps: &CapacityMatrix) -> SubcarrierAssignment {
    let mut assign = SubcarrierAssignment::empty(caps.n_subcarriers(), caps.n_users());
    for k in 0..caps.n_subcarriers() {
        let best = (0..caps.n_users()).fold(0, |b, j| if caps.at(k, j) > caps.at(k, b) { j } else { b });
        assign.assign(k, Some(best));
    }
    assign
}

fn exhaustive(scenario: &Scenario, caps: &CapacityMatrix) -> (SubcarrierAssignment, ParticipationMatrix, u64) {
    let n = scenario.n_tasks();
    let m = scenario.n_users();
    let k_total = scenario.n_subcarriers();
    if m == 0 {
        return (SubcarrierAssignment::empty(k_total, 0), ParticipationMatrix::new(n, 0), 1);
    }
    let mut owners = vec![0usize; k_total];
    let mut best: Option<(f64, SubcarrierAssignment, ParticipationMatrix)> = None;
    let mut nodes = 0u64;
    'assignments: loop {
        let assign = SubcarrierAssignment::from_owners(owners.iter().map(|&j| Some(j)).collect(), m).expect("in range");
        let budgets = assign.budgets(caps);
        for mask in 0u64..(1u64 << (n * m)) {
            nodes += 1;
            let x = ParticipationMatrix::from_fn(n, m, |i, j| mask & (1 << (j * n + i)) != 0);
            let feasible = (0..m).all(|j| x.tasks_of(j).map(|i| scenario.tasks[i].r).sum::<f64>() <= budgets[j]);
            if !feasible {
                continue;
            }
            let value = utility_centralized(scenario, &x);
            if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                best = Some((value, assign.clone(), x));
            }
        }
        let mut pos = k_total;
        loop {
            if pos == 0 {
                break 'assignments;
            }
            pos -= 1;
            owners[pos] += 1;
            if owners[pos] < m {
                break;
            }
            owners[pos] = 0;
        }
    }
    let (_, assign, x) = best.expect("empty participation is always feasible");
    (assign, x, nodes)
}

/// Alternating improvement: per-user knapsack best responses for `X`, then
/// single-subcarrier moves for `S` with the two affected users re-solving.
struct JointState<'a> {
    scenario: &'a Scenario,
    caps: &'a CapacityMatrix,
    assign: SubcarrierAssignment,
    budgets: Vec<f64>,
    used: Vec<f64>,
    x: ParticipationMatrix,
    totals: Vec<f64>,
}

impl<'a> JointState<'a> {
    fn new(scenario: &'a Scenario, caps: &'a CapacityMatrix, assign: SubcarrierAssignment) -> Self {
        let budgets = assign.budgets(caps);
        JointState {
            scenario,
            caps,
            used: vec![0.0; budgets.len()],
            budgets,
            assign,
            x: ParticipationMatrix::new(scenario.n_tasks(), scenario.n_users()),
            totals: vec![0.0; scenario.n_tasks()],
        }
    }

    /// User `j`'s marginal contribution to the objective with its current column.
    fn user_value(&self, j: usize, column: &[bool]) -> f64 {
        let gamma = self.scenario.params.revenue_split;
        column
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| {
                let others = self.totals[i] - if self.x.get(i, j) { self.scenario.q(i, j) } else { 0.0 };
                let task = &self.scenario.tasks[i];
                performance_from_total(task, others + self.scenario.q(i, j))
                    - performance_from_total(task, others.max(0.0))
                    + gamma * self.scenario.charge(i)
            })
            .sum()
    }

    /// Best response of user `j` under `budget`, with its current column
    /// removed from the totals. Returns the column and its value.
    fn best_response(&self, j: usize, budget: f64) -> Result<(Vec<bool>, f64)> {
        let gamma = self.scenario.params.revenue_split;
        let items: Vec<Item> = (0..self.scenario.n_tasks())
            .map(|i| {
                let task = &self.scenario.tasks[i];
                let q = self.scenario.q(i, j);
                let others = (self.totals[i] - if self.x.get(i, j) { q } else { 0.0 }).max(0.0);
                Item {
                    weight: task.r,
                    value: performance_from_total(task, others + q) - performance_from_total(task, others)
                        + gamma * self.scenario.charge(i),
                }
            })
            .collect();
        knapsack_exact(&items, budget)
    }

    fn set_column(&mut self, j: usize, column: &[bool]) {
        for (i, &b) in column.iter().enumerate() {
            let had = self.x.get(i, j);
            if had != b {
                let q = self.scenario.q(i, j);
                self.totals[i] += if b { q } else { -q };
                self.used[j] += if b { self.scenario.tasks[i].r } else { -self.scenario.tasks[i].r };
                self.x.set(i, j, b);
            }
        }
        if self.x.tasks_of(j).next().is_none() {
            self.used[j] = 0.0;
        }
    }

    /// Gauss-Seidel best responses until no user improves.
    fn settle_participation(&mut self) -> Result<u64> {
        let mut evaluations = 0;
        loop {
            let mut improved = false;
            for j in 0..self.budgets.len() {
                evaluations += 1;
                let current = self.x.strategy(j);
                let old = self.user_value(j, &current);
                let (column, value) = self.best_response(j, self.budgets[j])?;
                if value > old + EPS {
                    self.set_column(j, &column);
                    improved = true;
                }
            }
            if !improved {
                return Ok(evaluations);
            }
        }
    }

    fn min_missing_rate(&self, j: usize) -> f64 {
        (0..self.scenario.n_tasks())
            .filter(|&i| !self.x.get(i, j))
            .map(|i| self.scenario.tasks[i].r)
            .fold(f64::INFINITY, f64::min)
    }

    fn try_move(&mut self, k: usize, to: usize) -> Result<bool> {
        let from = self.assign.owner(k);
        let to_budget = self.budgets[to] + self.caps.at(k, to);
        if to_budget - self.used[to] < self.min_missing_rate(to) {
            return Ok(false);
        }
        let from_budget = from.map(|f| self.budgets[f] - self.caps.at(k, f));

        let saved_from = from.map(|f| self.x.strategy(f));
        let saved_to = self.x.strategy(to);
        let mut delta = 0.0;
        if let (Some(f), Some(fb)) = (from, from_budget) {
            if self.used[f] > fb {
                let old = self.user_value(f, saved_from.as_deref().expect("from column"));
                let (column, value) = self.best_response(f, fb)?;
                delta += value - old;
                self.set_column(f, &column);
            }
        }
        let old = self.user_value(to, &saved_to);
        let (column, value) = self.best_response(to, to_budget)?;
        delta += value - old;
        if delta > EPS {
            self.set_column(to, &column);
            if let (Some(f), Some(fb)) = (from, from_budget) {
                self.budgets[f] = fb;
            }
            self.budgets[to] = to_budget;
            self.assign.assign(k, Some(to));
            Ok(true)
        } else {
            if let (Some(f), Some(col)) = (from, saved_from) {
                self.set_column(f, &col);
            }
            Ok(false)
        }
    }

    fn improve(&mut self, max_rounds: usize) -> Result<u64> {
        let mut evaluations = self.settle_participation()?;
        for _ in 0..max_rounds {
            let mut moved = false;
            for k in 0..self.assign.n_subcarriers() {
                for to in 0..self.budgets.len() {
                    if self.assign.owner(k) == Some(to) {
                        continue;
                    }
                    evaluations += 1;
                    if self.try_move(k, to)? {
                        moved = true;
                    }
                }
            }
            evaluations += self.settle_participation()?;
            if !moved {
                break;
            }
        }
        Ok(evaluations)
    }
}
