//! Overlapping coalition formation among users.
//!
//! Each task is a coalition; a user may sit in several at once as long as the
//! rates it invests fit its uplink budget. Users repeatedly quit, transfer and
//! join until nobody's strategy changes over a full pass.

use std::collections::HashSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, compute_capacities, SubcarrierAssignment};
use crate::error::{Error, Result};
use crate::optimizers::{build_preference_matrix, follower_participation, FollowerRule};
use crate::outcome::{Diagnostics, MechanismOutcome, Mode};
use crate::scenario::Scenario;
use crate::sensing::{self, member_payoff, ParticipationMatrix, PayoffDistribution, EPS};

pub const DEFAULT_ITERATION_CAP: u64 = 10_000;

/// Salt mixed into the scenario seed for the random subcarrier allocation.
const RANDOM_ALLOCATION_SALT: u64 = 0x5241_4e44_414c_4c4f;

#[derive(Clone, Debug, PartialEq)]
pub struct OcfConfig {
    /// How users pick their initial coalitions.
    pub init_rule: FollowerRule,
    /// Abort after this many executed operations.
    pub iteration_cap: u64,
    /// Messages per transmitted value or location.
    pub eta_unit: u64,
    /// Messages per transmitted id.
    pub mu_unit: u64,
    pub trace: bool,
}

impl Default for OcfConfig {
    fn default() -> Self {
        OcfConfig {
            init_rule: FollowerRule::LiteralPrefix,
            iteration_cap: DEFAULT_ITERATION_CAP,
            eta_unit: 1,
            mu_unit: 1,
            trace: false,
        }
    }
}

/// The overlapping coalition structure plus per-user budgets.
#[derive(Clone, Debug)]
pub struct CoalitionState {
    ocs: ParticipationMatrix,
    budgets: Vec<f64>,
    /// `Σ_{j ∈ b^i} Q_{i,j}`, recomputed after every change.
    totals: Vec<f64>,
    tried_pairs: Vec<HashSet<(usize, usize)>>,
    iteration: u64,
}

impl CoalitionState {
    /// Fails if some user invests more than its budget.
    pub fn new(scenario: &Scenario, ocs: ParticipationMatrix, budgets: Vec<f64>) -> Result<Self> {
        if ocs.n_tasks() != scenario.n_tasks() || ocs.n_users() != scenario.n_users() || budgets.len() != ocs.n_users()
        {
            return Err(Error::Dimension("coalition structure does not match the scenario".into()));
        }
        let totals = (0..ocs.n_tasks()).map(|i| sensing::total_contribution(scenario, i, ocs.row(i))).collect();
        let state =
            CoalitionState { tried_pairs: vec![HashSet::new(); budgets.len()], ocs, budgets, totals, iteration: 0 };
        for j in 0..state.budgets.len() {
            if state.invested(scenario, j) > state.budgets[j] {
                return Err(Error::Precondition(format!("user {j} invests more than its budget")));
            }
        }
        Ok(state)
    }

    pub fn ocs(&self) -> &ParticipationMatrix {
        &self.ocs
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn total(&self, task: usize) -> f64 {
        self.totals[task]
    }

    /// `Σ_i b_j^i r_i`.
    pub fn invested(&self, scenario: &Scenario, user: usize) -> f64 {
        self.ocs.tasks_of(user).map(|i| scenario.tasks[i].r).sum()
    }

    pub fn is_valid(&self, scenario: &Scenario) -> bool {
        (0..self.budgets.len()).all(|j| self.invested(scenario, j) <= self.budgets[j])
    }

    /// Current payoff of `user` from coalition `task`, zero if not a member.
    pub fn payoff(&self, scenario: &Scenario, task: usize, user: usize) -> f64 {
        if !self.ocs.get(task, user) {
            return 0.0;
        }
        member_payoff(scenario, task, self.totals[task], scenario.q(task, user))
    }

    /// `p_{i,j} − R_{i,j}` for a current member.
    fn net(&self, scenario: &Scenario, task: usize, user: usize) -> f64 {
        self.payoff(scenario, task, user) - scenario.charge(task)
    }

    /// Net gain `user` would get from coalition `task` after entering it.
    fn prospective_net(&self, scenario: &Scenario, task: usize, user: usize) -> f64 {
        let q = scenario.q(task, user);
        member_payoff(scenario, task, self.totals[task] + q, q) - scenario.charge(task)
    }

    /// `C_j^co`.
    pub fn user_utility(&self, scenario: &Scenario, user: usize) -> f64 {
        self.ocs.tasks_of(user).map(|i| self.net(scenario, i, user)).sum()
    }

    pub fn total_user_utility(&self, scenario: &Scenario) -> f64 {
        crate::sensing::plus_sum((0..self.budgets.len()).map(|j| self.user_utility(scenario, j)))
    }

    fn set(&mut self, scenario: &Scenario, task: usize, user: usize, member: bool) {
        self.ocs.set(task, user, member);
        self.totals[task] = sensing::total_contribution(scenario, task, self.ocs.row(task));
    }

    /// True if every member of `task` other than `user` keeps at least its
    /// payoff (within `EPS`) when `user` enters.
    fn entry_permitted(&self, scenario: &Scenario, task: usize, user: usize) -> bool {
        let before = self.totals[task];
        let after = before + scenario.q(task, user);
        self.ocs.members(task).filter(|&k| k != user).all(|k| {
            let qk = scenario.q(task, k);
            member_payoff(scenario, task, after, qk) >= member_payoff(scenario, task, before, qk) - EPS
        })
    }

    /// Members of `task` other than `user` whose payoff would drop if `user` left.
    fn harmed_by_exit(&self, scenario: &Scenario, task: usize, user: usize) -> usize {
        let before = self.totals[task];
        let mut row = self.ocs.row(task).to_vec();
        row[user] = false;
        let after = sensing::total_contribution(scenario, task, &row);
        self.ocs
            .members(task)
            .filter(|&k| k != user)
            .filter(|&k| {
                let qk = scenario.q(task, k);
                member_payoff(scenario, task, after, qk) < member_payoff(scenario, task, before, qk) - EPS
            })
            .count()
    }
}

/// Why an operation is not feasible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    /// The user's rates would exceed its budget.
    Budget,
    /// The user would not gain.
    Unprofitable,
    /// Some incumbent member would lose payoff.
    NotPermitted,
}

impl Verdict {
    pub fn is_feasible(self) -> bool {
        self == Verdict::Feasible
    }
}

/// Checks moving `user`'s investment from coalition `p` to coalition `q`.
/// Conditions are tested in order: budget, profit, permission.
pub fn transfer_feasible(
    state: &CoalitionState,
    scenario: &Scenario,
    user: usize,
    p: usize,
    q: usize,
) -> Result<Verdict> {
    if p == q || !state.ocs.get(p, user) || state.ocs.get(q, user) {
        return Err(Error::Precondition(format!("transfer of user {user} needs membership in {p} and not in {q}")));
    }
    let rest: f64 = state.ocs.tasks_of(user).filter(|&i| i != p).map(|i| scenario.tasks[i].r).sum();
    if rest + scenario.tasks[q].r > state.budgets[user] {
        return Ok(Verdict::Budget);
    }
    let gain = state.prospective_net(scenario, q, user);
    let keep = state.net(scenario, p, user).max(0.0);
    if gain <= keep + EPS {
        return Ok(Verdict::Unprofitable);
    }
    if !state.entry_permitted(scenario, q, user) {
        return Ok(Verdict::NotPermitted);
    }
    Ok(Verdict::Feasible)
}

/// `user` may quit `p` when membership does not pay and no feasible transfer
/// out of `p` exists. The incumbents' check is evaluated too even though it
/// cannot fail.
pub fn quit_feasible(state: &CoalitionState, scenario: &Scenario, user: usize, p: usize) -> Result<bool> {
    if !state.ocs.get(p, user) {
        return Err(Error::Precondition(format!("user {user} is not a member of coalition {p}")));
    }
    if state.net(scenario, p, user) > EPS {
        return Ok(false);
    }
    if best_transfer(state, scenario, user, p)?.is_some() {
        return Ok(false);
    }
    Ok(state.harmed_by_exit(scenario, p, user) == 0)
}

/// Checks `user` entering coalition `q` with spare budget.
pub fn join_feasible(state: &CoalitionState, scenario: &Scenario, user: usize, q: usize) -> Result<Verdict> {
    if state.ocs.get(q, user) {
        return Err(Error::Precondition(format!("user {user} is already in coalition {q}")));
    }
    if state.invested(scenario, user) + scenario.tasks[q].r > state.budgets[user] {
        return Ok(Verdict::Budget);
    }
    if state.prospective_net(scenario, q, user) <= EPS {
        return Ok(Verdict::Unprofitable);
    }
    if !state.entry_permitted(scenario, q, user) {
        return Ok(Verdict::NotPermitted);
    }
    Ok(Verdict::Feasible)
}

/// Feasible transfer out of `p` with the largest gain; ties go to the lower task id.
fn best_transfer(state: &CoalitionState, scenario: &Scenario, user: usize, p: usize) -> Result<Option<usize>> {
    let mut best: Option<(f64, usize)> = None;
    for q in 0..scenario.n_tasks() {
        if state.ocs.get(q, user) {
            continue;
        }
        if transfer_feasible(state, scenario, user, p, q)?.is_feasible() {
            let gain = state.prospective_net(scenario, q, user);
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, q));
            }
        }
    }
    Ok(best.map(|(_, q)| q))
}

/// Initial structure: every user applies the follower rule to its own budget.
pub fn init_ocs(scenario: &Scenario, assignment: &SubcarrierAssignment, rule: FollowerRule) -> Result<CoalitionState> {
    let caps = compute_capacities(scenario);
    let budgets = assignment.budgets(&caps);
    let prefs = build_preference_matrix(scenario);
    let ocs = follower_participation(scenario, &prefs, &budgets, rule)?;
    CoalitionState::new(scenario, ocs, budgets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Transfer,
    Quit,
    Join,
}

/// One executed operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u64,
    pub user: usize,
    pub op: OpKind,
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub utility_before: f64,
    pub utility_after: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OcfDiagnostics {
    /// Executed operations (transfers, quits and joins) until the structure settled.
    pub iterations_to_converge: u64,
    /// Full passes over all users, including the final unchanged one.
    pub rounds: u64,
    pub transfer_attempts: u64,
    pub attempts_per_round: Vec<u64>,
    pub transfers_executed: u64,
    pub quits: u64,
    pub joins: u64,
    pub messages_estimate: u64,
    /// `Σ_j C_j^co` at the start and after every round.
    pub total_user_utility_trace: Vec<f64>,
    /// Quits or exits that would have cut an incumbent's payoff. Expected zero.
    pub exit_harm_violations: u64,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalingCost {
    pub phase1: u64,
    pub per_iteration_worst: u64,
    pub settlement: u64,
}

/// `M ⌈N/2⌉ (N − ⌈N/2⌉)`.
pub fn worst_case_attempts(n_users: u64, n_tasks: u64) -> u64 {
    let half = n_tasks.div_ceil(2);
    n_users * half * (n_tasks - half)
}

pub fn signaling_cost_estimate(n_users: u64, n_tasks: u64, eta: u64, mu: u64) -> SignalingCost {
    SignalingCost {
        phase1: n_users * n_tasks * eta + n_users * mu,
        per_iteration_worst: worst_case_attempts(n_users, n_tasks)
            * ((n_users + 1) * eta + n_users.saturating_sub(1) * mu),
        settlement: 2 * n_users * n_tasks * mu,
    }
}

struct Runner<'a> {
    scenario: &'a Scenario,
    config: &'a OcfConfig,
    state: CoalitionState,
    diag: OcfDiagnostics,
    trace: Vec<TraceRecord>,
    executed: u64,
}

impl Runner<'_> {
    fn check_cap(&self) -> Result<()> {
        if self.executed > self.config.iteration_cap {
            let dump = serde_json::to_string(self.state.ocs())?;
            return Err(Error::IterationCap { cap: self.config.iteration_cap as usize, dump });
        }
        Ok(())
    }

    /// Messages for one user learning a coalition's membership.
    fn probe_cost(&self, task: usize, user: usize) -> u64 {
        let others = self.state.ocs.members(task).filter(|&k| k != user).count() as u64;
        (others + 2) * self.config.eta_unit + others * self.config.mu_unit
    }

    fn record(&mut self, user: usize, op: OpKind, from: Option<usize>, to: Option<usize>, before: f64) -> Result<()> {
        self.executed += 1;
        match op {
            OpKind::Transfer => self.diag.transfers_executed += 1,
            OpKind::Quit => self.diag.quits += 1,
            OpKind::Join => self.diag.joins += 1,
        }
        debug_assert!(self.state.invested(self.scenario, user) <= self.state.budgets[user]);
        if self.config.trace {
            let after = self.state.user_utility(self.scenario, user);
            self.trace.push(TraceRecord {
                iteration: self.state.iteration,
                user,
                op,
                from,
                to,
                utility_before: before,
                utility_after: after,
            });
        }
        self.check_cap()
    }

    fn transfer(&mut self, user: usize, p: usize, q: usize) -> Result<()> {
        let before = self.state.user_utility(self.scenario, user);
        if self.state.harmed_by_exit(self.scenario, p, user) > 0 {
            self.diag.exit_harm_violations += 1;
        }
        self.state.set(self.scenario, p, user, false);
        self.state.set(self.scenario, q, user, true);
        self.record(user, OpKind::Transfer, Some(p), Some(q), before)
    }

    /// Members whose coalition does not pay look for a transfer,
    /// otherwise quit.
    fn quit_or_transfer(&mut self, user: usize) -> Result<()> {
        for p in 0..self.scenario.n_tasks() {
            if !self.state.ocs.get(p, user) || self.state.net(self.scenario, p, user) > EPS {
                continue;
            }
            if let Some(q) = best_transfer(&self.state, self.scenario, user, p)? {
                self.diag.messages_estimate += self.probe_cost(q, user);
                self.transfer(user, p, q)?;
            } else if self.state.harmed_by_exit(self.scenario, p, user) == 0 {
                let before = self.state.user_utility(self.scenario, user);
                self.state.set(self.scenario, p, user, false);
                self.record(user, OpKind::Quit, Some(p), None, before)?;
            } else {
                self.diag.exit_harm_violations += 1;
            }
        }
        Ok(())
    }

    /// Transfer loop over untried coalition pairs, then the join scan.
    /// Returns the number of transfer attempts.
    fn transfer_then_join(&mut self, user: usize) -> Result<u64> {
        let n = self.scenario.n_tasks();
        let mut attempts = 0;
        'scan: loop {
            let held: Vec<usize> = self.state.ocs.tasks_of(user).collect();
            let mut targets: Vec<(f64, usize)> = (0..n)
                .filter(|&q| !self.state.ocs.get(q, user))
                .map(|q| (self.state.prospective_net(self.scenario, q, user), q))
                .collect();
            targets.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &p in &held {
                for &(_, q) in &targets {
                    if !self.state.tried_pairs[user].insert((p, q)) {
                        continue;
                    }
                    attempts += 1;
                    self.diag.messages_estimate += self.probe_cost(q, user);
                    if transfer_feasible(&self.state, self.scenario, user, p, q)?.is_feasible() {
                        self.transfer(user, p, q)?;
                        continue 'scan;
                    }
                }
            }
            break;
        }
        for q in 0..n {
            if self.state.ocs.get(q, user) {
                continue;
            }
            self.diag.messages_estimate += self.probe_cost(q, user);
            if join_feasible(&self.state, self.scenario, user, q)?.is_feasible() {
                let before = self.state.user_utility(self.scenario, user);
                self.state.set(self.scenario, q, user, true);
                self.record(user, OpKind::Join, None, Some(q), before)?;
            }
        }
        Ok(attempts)
    }

    fn run(&mut self) -> Result<()> {
        let m = self.scenario.n_users();
        self.diag.total_user_utility_trace.push(self.state.total_user_utility(self.scenario));
        loop {
            self.state.iteration += 1;
            for tried in &mut self.state.tried_pairs {
                tried.clear();
            }
            let recorded: Vec<Vec<bool>> = (0..m).map(|j| self.state.ocs.strategy(j)).collect();
            for j in 0..m {
                self.quit_or_transfer(j)?;
            }
            let mut attempts = 0;
            for j in 0..m {
                attempts += self.transfer_then_join(j)?;
            }
            self.diag.attempts_per_round.push(attempts);
            self.diag.transfer_attempts += attempts;
            self.diag.total_user_utility_trace.push(self.state.total_user_utility(self.scenario));
            let eta = (0..m).filter(|&j| self.state.ocs.strategy(j) == recorded[j]).count();
            if eta == m {
                break;
            }
        }
        self.diag.rounds = self.state.iteration;
        self.diag.iterations_to_converge = self.executed;
        Ok(())
    }
}

/// Result of [`run_ocf_detailed`].
#[derive(Clone, Debug)]
pub struct OcfRun {
    pub outcome: MechanismOutcome,
    pub state: CoalitionState,
    pub diagnostics: OcfDiagnostics,
    pub trace: Vec<TraceRecord>,
}

/// Runs coalition formation from a fixed subcarrier assignment.
pub fn run_ocf_detailed(
    scenario: &Scenario,
    assignment: &SubcarrierAssignment,
    mode: Mode,
    config: &OcfConfig,
) -> Result<OcfRun> {
    let started = Instant::now();
    let state = init_ocs(scenario, assignment, config.init_rule)?;
    let (m, n) = (scenario.n_users() as u64, scenario.n_tasks() as u64);
    let signaling = signaling_cost_estimate(m, n, config.eta_unit, config.mu_unit);
    let mut runner = Runner {
        scenario,
        config,
        state,
        diag: OcfDiagnostics { messages_estimate: signaling.phase1, ..OcfDiagnostics::default() },
        trace: Vec::new(),
        executed: 0,
    };
    runner.run()?;
    let Runner { state, mut diag, trace, .. } = runner;
    diag.messages_estimate += 2 * state.ocs.count() as u64 * config.mu_unit;
    diag.wall_time = started.elapsed().as_secs_f64();

    let payoffs = PayoffDistribution::proportional(scenario, &state.ocs);
    let utilities = sensing::report_coop(scenario, &state.ocs, &payoffs);
    let outcome = MechanismOutcome::new(
        mode,
        scenario,
        Some(scenario.params.incentive_alpha2),
        assignment.clone(),
        state.ocs.clone(),
        utilities,
        Some(payoffs),
        Diagnostics { solver: None, ocf: Some(diag.clone()) },
    );
    Ok(OcfRun { outcome, state, diagnostics: diag, trace })
}

pub fn run_ocf(
    scenario: &Scenario,
    assignment: &SubcarrierAssignment,
    config: &OcfConfig,
) -> Result<(MechanismOutcome, OcfDiagnostics)> {
    let run = run_ocf_detailed(scenario, assignment, Mode::OcfPriority, config)?;
    Ok((run.outcome, run.diagnostics))
}

/// Subcarrier assignment used by the two cooperative modes.
pub fn ocf_assignment(scenario: &Scenario, mode: Mode) -> Result<SubcarrierAssignment> {
    match mode {
        Mode::OcfRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed() ^ RANDOM_ALLOCATION_SALT);
            Ok(channel::allocate_random(scenario, &mut rng))
        }
        Mode::OcfPriority => Ok(channel::allocate_priority(scenario, &compute_capacities(scenario))),
        other => Err(Error::UnknownMode(format!("{other} is not a coalition-formation mode"))),
    }
}

/// Phase 1 (random or priority subcarrier allocation) followed by coalition formation.
pub fn run_ocf_mode(scenario: &Scenario, mode: Mode, config: &OcfConfig) -> Result<OcfRun> {
    let assignment = ocf_assignment(scenario, mode)?;
    run_ocf_detailed(scenario, &assignment, mode, config)
}

/// A move that shows a structure is not stable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub user: usize,
    pub op: OpKind,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

/// Exhaustively looks for a feasible transfer, quit or join. `None` means stable.
pub fn verify_t_stable(state: &CoalitionState, scenario: &Scenario) -> Result<Option<Counterexample>> {
    let n = scenario.n_tasks();
    for user in 0..scenario.n_users() {
        for p in 0..n {
            if !state.ocs.get(p, user) {
                continue;
            }
            for q in 0..n {
                if !state.ocs.get(q, user) && transfer_feasible(state, scenario, user, p, q)?.is_feasible() {
                    return Ok(Some(Counterexample { user, op: OpKind::Transfer, from: Some(p), to: Some(q) }));
                }
            }
            if quit_feasible(state, scenario, user, p)? {
                return Ok(Some(Counterexample { user, op: OpKind::Quit, from: Some(p), to: None }));
            }
        }
        for q in 0..n {
            if !state.ocs.get(q, user) && join_feasible(state, scenario, user, q)?.is_feasible() {
                return Ok(Some(Counterexample { user, op: OpKind::Join, from: None, to: Some(q) }));
            }
        }
    }
    Ok(None)
}

/// Writes the trace as line-delimited JSON.
pub fn write_trace<W: std::io::Write>(mut out: W, trace: &[TraceRecord]) -> Result<()> {
    for rec in trace {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
