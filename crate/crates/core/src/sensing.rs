//! Contributions, task performance, charges, utilities and the proportional
//! payoff split inside coalitions.

use serde::{Deserialize, Serialize};

use crate::grid::Matrix;
use crate::scenario::{Scenario, Task, User, DISTANCE_FLOOR_KM};

/// Tolerance on every comparison that gates a discrete decision.
pub const EPS: f64 = 1e-9;

/// `x_{i,j}`, tasks × users. Row `i` is coalition `b^i`, column `j` is user
/// `j`'s strategy `b_j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParticipationMatrix {
    x: Matrix<bool>,
}

impl ParticipationMatrix {
    pub fn new(n_tasks: usize, n_users: usize) -> Self {
        ParticipationMatrix { x: Matrix::filled(n_tasks, n_users, false) }
    }

    pub fn from_fn(n_tasks: usize, n_users: usize, f: impl FnMut(usize, usize) -> bool) -> Self {
        ParticipationMatrix { x: Matrix::from_fn(n_tasks, n_users, f) }
    }

    pub fn n_tasks(&self) -> usize {
        self.x.rows()
    }

    pub fn n_users(&self) -> usize {
        self.x.cols()
    }

    #[inline]
    pub fn get(&self, task: usize, user: usize) -> bool {
        *self.x.get(task, user)
    }

    #[inline]
    pub fn set(&mut self, task: usize, user: usize, v: bool) {
        self.x.set(task, user, v);
    }

    /// Members of coalition `task` (its support).
    pub fn members(&self, task: usize) -> impl Iterator<Item = usize> + '_ {
        self.x.row(task).iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j)
    }

    pub fn row(&self, task: usize) -> &[bool] {
        self.x.row(task)
    }

    /// Tasks joined by `user`.
    pub fn tasks_of(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_tasks()).filter(move |&i| self.get(i, user))
    }

    /// User `j`'s strategy vector.
    pub fn strategy(&self, user: usize) -> Vec<bool> {
        self.x.column(user).copied().collect()
    }

    pub fn set_strategy(&mut self, user: usize, column: &[bool]) {
        for (i, &b) in column.iter().enumerate() {
            self.set(i, user, b);
        }
    }

    pub fn count(&self) -> usize {
        self.x.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

impl Serialize for ParticipationMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<u8>> =
            (0..self.n_tasks()).map(|i| self.row(i).iter().map(|&b| u8::from(b)).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParticipationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rows = Vec::<Vec<u8>>::deserialize(d)?;
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(D::Error::custom("participation entries must be 0 or 1"));
        }
        let rows = rows.into_iter().map(|r| r.into_iter().map(|v| v == 1).collect()).collect();
        Matrix::from_rows(rows)
            .map(|x| ParticipationMatrix { x })
            .ok_or_else(|| D::Error::custom("ragged participation matrix"))
    }
}

/// `Q_{i,j}`: flat inside the area of interest, power-law decay outside.
pub fn contribution(task: &Task, user: &User, lambda: f64) -> f64 {
    let d = user.distances_to_tasks[task.id];
    if d <= task.d0 {
        task.a / task.d0.powf(lambda)
    } else {
        task.a / d.max(DISTANCE_FLOOR_KM).powf(lambda)
    }
}

/// `Γ_i` as a function of the total contribution the task receives.
#[inline]
pub fn performance_from_total(task: &Task, total: f64) -> f64 {
    if total <= task.rho {
        task.phi / task.rho * total
    } else {
        task.phi
    }
}

/// Adds from `+0.0`; `Iterator::sum` yields `-0.0` on empty input.
pub(crate) fn plus_sum(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, |acc, x| acc + x)
}

pub fn total_contribution(scenario: &Scenario, task: usize, row: &[bool]) -> f64 {
    plus_sum(row.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| scenario.q(task, j)))
}

pub fn task_performance(scenario: &Scenario, x: &ParticipationMatrix, task: usize) -> f64 {
    performance_from_total(&scenario.tasks[task], total_contribution(scenario, task, x.row(task)))
}

/// PFM: sum of task performances.
pub fn platform_performance(scenario: &Scenario, x: &ParticipationMatrix) -> f64 {
    plus_sum((0..scenario.n_tasks()).map(|i| task_performance(scenario, x, i)))
}

/// `R_{i,j} = β r_i x_{i,j}` with `beta` expressed per unit of `rate`.
#[inline]
pub fn rate_charge(beta: f64, rate: f64, participates: bool) -> f64 {
    if participates {
        beta * rate
    } else {
        0.0
    }
}

/// `Σ_{i,j} R_{i,j}`.
pub fn total_charges(scenario: &Scenario, x: &ParticipationMatrix) -> f64 {
    (0..scenario.n_tasks()).map(|i| scenario.charge(i) * x.members(i).count() as f64).sum()
}

/// `v(b^i) = α₂ Γ_i(b^i)`.
pub fn coalition_value(scenario: &Scenario, task: usize, row: &[bool]) -> f64 {
    let total = total_contribution(scenario, task, row);
    value_from_total(scenario, task, total)
}

#[inline]
pub fn value_from_total(scenario: &Scenario, task: usize, total: f64) -> f64 {
    scenario.params.incentive_alpha2 * performance_from_total(&scenario.tasks[task], total)
}

/// Payoff of a member contributing `q` to a coalition whose members contribute
/// `total` in all (the member included).
#[inline]
pub fn member_payoff(scenario: &Scenario, task: usize, total: f64, q: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    value_from_total(scenario, task, total) * (q / total)
}

/// Proportional split of `v(b^i)` among the coalition's members.
pub fn divide_payoff(scenario: &Scenario, task: usize, row: &[bool]) -> Vec<f64> {
    let total = total_contribution(scenario, task, row);
    row.iter()
        .enumerate()
        .map(|(j, &member)| if member { member_payoff(scenario, task, total, scenario.q(task, j)) } else { 0.0 })
        .collect()
}

/// `p_{i,j}` for every coalition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffDistribution {
    pub p: Matrix<f64>,
}

impl PayoffDistribution {
    pub fn proportional(scenario: &Scenario, x: &ParticipationMatrix) -> Self {
        let rows = (0..x.n_tasks()).map(|i| divide_payoff(scenario, i, x.row(i))).collect();
        PayoffDistribution {
            p: Matrix::from_rows(rows).unwrap_or_else(|| Matrix::filled(x.n_tasks(), x.n_users(), 0.0)),
        }
    }

    pub fn user_total(&self, user: usize) -> f64 {
        self.p.column(user).sum()
    }
}

/// Platform- and user-side figures for one mechanism outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub seed: u64,
    pub platform_utility: f64,
    pub pfm: f64,
    pub per_user_utility: Vec<f64>,
    pub incentive_cost: f64,
    pub bs_revenue_split: f64,
}

impl UtilityReport {
    pub fn total_user_utility(&self) -> f64 {
        plus_sum(self.per_user_utility.iter().copied())
    }
}

fn user_charges(scenario: &Scenario, x: &ParticipationMatrix, user: usize) -> f64 {
    plus_sum(x.tasks_of(user).map(|i| scenario.charge(i)))
}

fn weighted_contribution(scenario: &Scenario, x: &ParticipationMatrix) -> f64 {
    (0..x.n_tasks()).map(|i| x.members(i).map(|j| scenario.q(i, j)).sum::<f64>()).sum()
}

/// Platform utility when users are scheduled centrally and paid nothing.
pub fn utility_centralized(scenario: &Scenario, x: &ParticipationMatrix) -> f64 {
    platform_performance(scenario, x) + scenario.params.revenue_split * total_charges(scenario, x)
}

pub fn utility_noncoop_platform(scenario: &Scenario, x: &ParticipationMatrix) -> f64 {
    utility_centralized(scenario, x) - scenario.params.incentive_alpha1 * weighted_contribution(scenario, x)
}

pub fn utility_noncoop_user(scenario: &Scenario, x: &ParticipationMatrix, user: usize) -> f64 {
    let reward: f64 = x.tasks_of(user).map(|i| scenario.q(i, user)).sum::<f64>() * scenario.params.incentive_alpha1;
    reward - user_charges(scenario, x, user)
}

pub fn utility_coop_platform(scenario: &Scenario, x: &ParticipationMatrix) -> f64 {
    (1.0 - scenario.params.incentive_alpha2) * platform_performance(scenario, x)
        + scenario.params.revenue_split * total_charges(scenario, x)
}

pub fn utility_coop_user(
    scenario: &Scenario,
    x: &ParticipationMatrix,
    payoffs: &PayoffDistribution,
    user: usize,
) -> f64 {
    payoffs.user_total(user) - user_charges(scenario, x, user)
}

pub fn report_centralized(scenario: &Scenario, x: &ParticipationMatrix) -> UtilityReport {
    UtilityReport {
        seed: scenario.seed(),
        platform_utility: utility_centralized(scenario, x),
        pfm: platform_performance(scenario, x),
        per_user_utility: (0..x.n_users()).map(|j| -user_charges(scenario, x, j)).collect(),
        incentive_cost: 0.0,
        bs_revenue_split: scenario.params.revenue_split * total_charges(scenario, x),
    }
}

pub fn report_noncoop(scenario: &Scenario, x: &ParticipationMatrix) -> UtilityReport {
    UtilityReport {
        seed: scenario.seed(),
        platform_utility: utility_noncoop_platform(scenario, x),
        pfm: platform_performance(scenario, x),
        per_user_utility: (0..x.n_users()).map(|j| utility_noncoop_user(scenario, x, j)).collect(),
        incentive_cost: scenario.params.incentive_alpha1 * weighted_contribution(scenario, x),
        bs_revenue_split: scenario.params.revenue_split * total_charges(scenario, x),
    }
}

pub fn report_coop(scenario: &Scenario, x: &ParticipationMatrix, payoffs: &PayoffDistribution) -> UtilityReport {
    let pfm = platform_performance(scenario, x);
    UtilityReport {
        seed: scenario.seed(),
        platform_utility: utility_coop_platform(scenario, x),
        pfm,
        per_user_utility: (0..x.n_users()).map(|j| utility_coop_user(scenario, x, payoffs, j)).collect(),
        incentive_cost: scenario.params.incentive_alpha2 * pfm,
        bs_revenue_split: scenario.params.revenue_split * total_charges(scenario, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, GlobalParams, Point};

    fn task(a: f64, d0: f64) -> Task {
        Task { id: 0, location: Point::new(0.0, 0.0), a, d0, r: 3.0e5, rho: 40.0, phi: 100.0 }
    }

    fn user_at(d: f64) -> User {
        User { id: 0, location: Point::new(d, 0.0), distance_to_bs: 1.0, distances_to_tasks: vec![d] }
    }

    fn scenario(seed: u64, n: usize, m: usize) -> Scenario {
        generate_scenario(&GlobalParams { rng_seed: seed, ..Default::default() }, n, m).unwrap()
    }

    #[test]
    fn contribution_examples() {
        assert_eq!(contribution(&task(5.0, 1.0), &user_at(0.5), 0.8), 5.0);
        assert_eq!(contribution(&task(5.0, 1.0), &user_at(1.0), 0.8), 5.0);
        assert_eq!(contribution(&task(4.0, 1.0), &user_at(2.0), 1.0), 2.0);
    }

    #[test]
    fn contribution_is_continuous_at_aoi_edge() {
        let t = task(6.0, 1.7);
        let inside = contribution(&t, &user_at(1.7), 0.8);
        let outside = contribution(&t, &user_at(1.7 + 1e-12), 0.8);
        assert!((inside - outside).abs() < 1e-9);
    }

    #[test]
    fn performance_branches() {
        let t = task(5.0, 1.0);
        assert_eq!(performance_from_total(&t, 0.0), 0.0);
        assert_eq!(performance_from_total(&t, t.rho), t.phi);
        assert_eq!(performance_from_total(&t, 2.0 * t.rho), t.phi);
        assert_eq!(performance_from_total(&t, 10.0), 25.0);
    }

    #[test]
    fn pfm_examples() {
        let s = scenario(1, 3, 4);
        let mut x = ParticipationMatrix::new(3, 4);
        assert_eq!(platform_performance(&s, &x), 0.0);
        x.set(0, 1, true);
        x.set(2, 3, true);
        let expect = task_performance(&s, &x, 0) + task_performance(&s, &x, 2);
        assert_eq!(platform_performance(&s, &x), expect);
        assert_eq!(task_performance(&s, &x, 1), 0.0);
    }

    #[test]
    fn rate_charge_examples() {
        assert_eq!(rate_charge(7.0, 300_000.0, false), 0.0);
        assert_eq!(rate_charge(7.0, 300_000.0, true), 2_100_000.0);
        assert_eq!(rate_charge(14.0, 300_000.0, true), 2.0 * rate_charge(7.0, 300_000.0, true));
    }

    #[test]
    fn coalition_value_examples() {
        let s = scenario(2, 2, 3);
        assert_eq!(coalition_value(&s, 0, &[false, false, false]), 0.0);
        let row = [true, false, true];
        let one = s.with_alphas(0.0, 1.0);
        let x = ParticipationMatrix::from_fn(2, 3, |i, j| i == 0 && row[j]);
        assert_eq!(coalition_value(&one, 0, &row), task_performance(&one, &x, 0));
        let half = s.with_alphas(0.0, 0.5);
        let total = total_contribution(&half, 0, &row);
        let tiny_rho = half.tasks[0].rho.min(total * 0.5);
        let mut saturated = half.tasks[0].clone();
        saturated.rho = tiny_rho;
        assert_eq!(0.5 * performance_from_total(&saturated, total), 0.5 * saturated.phi);
    }

    #[test]
    fn divide_payoff_examples() {
        let s = scenario(3, 1, 3);
        let v = coalition_value(&s, 0, &[false, true, false]);
        assert_eq!(divide_payoff(&s, 0, &[false, true, false]), vec![0.0, v, 0.0]);
        assert_eq!(divide_payoff(&s, 0, &[false; 3]), vec![0.0; 3]);
    }

    #[test]
    fn divide_payoff_equal_and_proportional_shares() {
        // Hand-built geometry: three users with contributions 1, 2, 3.
        let params = GlobalParams { contribution_exponent: 1.0, incentive_alpha2: 1.0, ..Default::default() };
        let t = Task { id: 0, location: Point::new(0.0, 0.0), a: 6.0, d0: 0.1, r: 3.0e5, rho: 100.0, phi: 100.0 };
        let bs = params.base_station();
        let users: Vec<User> = [6.0, 3.0, 2.0]
            .iter()
            .enumerate()
            .map(|(j, &d)| User::new(j, Point::new(d, 0.0), bs, std::slice::from_ref(&t)))
            .collect();
        let gains = crate::grid::Matrix::filled(params.n_subcarriers, 3, 1e-6);
        let s = Scenario::new(params, vec![t], users, gains).unwrap();
        let p = divide_payoff(&s, 0, &[true, true, true]);
        for (got, want) in p.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        // Users 0 and 0' with equal Q split evenly: reuse user 1 twice via a 2-user row.
        let p = divide_payoff(&s, 0, &[false, true, false]);
        assert!((p[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn utility_identities() {
        let s = scenario(4, 5, 6).with_alphas(0.7, 0.4);
        let x = ParticipationMatrix::from_fn(5, 6, |i, j| (i * 7 + j * 3) % 4 == 0);
        let charges = total_charges(&s, &x);
        let pfm = platform_performance(&s, &x);
        let gamma = s.params.revenue_split;

        let nonco_users: f64 = (0..6).map(|j| utility_noncoop_user(&s, &x, j)).sum();
        let lhs = utility_noncoop_platform(&s, &x) + nonco_users;
        assert!((lhs - (pfm - (1.0 - gamma) * charges)).abs() < 1e-9 * lhs.abs().max(1.0));

        let payoffs = PayoffDistribution::proportional(&s, &x);
        let co_users: f64 = (0..6).map(|j| utility_coop_user(&s, &x, &payoffs, j)).sum();
        let lhs = utility_coop_platform(&s, &x) + co_users;
        assert!((lhs - (pfm - (1.0 - gamma) * charges)).abs() < 1e-9 * lhs.abs().max(1.0));
        assert!((co_users - (0.4 * pfm - charges)).abs() < 1e-9 * co_users.abs().max(1.0));
    }

    #[test]
    fn utility_special_cases() {
        let s = scenario(5, 3, 3);
        let empty = ParticipationMatrix::new(3, 3);
        assert_eq!(utility_centralized(&s, &empty), 0.0);
        assert_eq!(utility_noncoop_platform(&s, &empty), 0.0);
        assert_eq!(utility_coop_platform(&s, &empty), 0.0);
        assert_eq!(utility_noncoop_user(&s, &empty, 1), 0.0);
        let payoffs = PayoffDistribution::proportional(&s, &empty);
        assert_eq!(utility_coop_user(&s, &empty, &payoffs, 0), 0.0);

        let x = ParticipationMatrix::from_fn(3, 3, |i, j| i == j);
        let zero = s.with_alphas(0.0, 0.0);
        assert_eq!(utility_noncoop_platform(&zero, &x), utility_centralized(&zero, &x));
        assert_eq!(utility_coop_platform(&zero, &x), utility_centralized(&zero, &x));
        let full = s.with_alphas(0.0, 1.0);
        assert!(
            (utility_coop_platform(&full, &x) - full.params.revenue_split * total_charges(&full, &x)).abs() < 1e-12
        );
        assert!(
            utility_noncoop_platform(&s.with_alphas(1.0, 0.0), &x)
                < utility_noncoop_platform(&s.with_alphas(0.5, 0.0), &x)
        );

        // single user, single task: reward minus charge
        let one = ParticipationMatrix::from_fn(3, 3, |i, j| i == 0 && j == 0);
        let payoffs = PayoffDistribution::proportional(&s, &one);
        let expect = coalition_value(&s, 0, one.row(0)) - s.charge(0);
        assert!((utility_coop_user(&s, &one, &payoffs, 0) - expect).abs() < 1e-12);
        let expect = s.params.incentive_alpha1 * s.q(0, 0) - s.charge(0);
        assert!((utility_noncoop_user(&s, &one, 0) - expect).abs() < 1e-12);
    }

    #[test]
    fn participation_json_shape() {
        let x = ParticipationMatrix::from_fn(2, 3, |i, j| i == 1 && j != 1);
        let text = serde_json::to_string(&x).unwrap();
        assert_eq!(text, "[[0,0,0],[1,0,1]]");
        assert_eq!(serde_json::from_str::<ParticipationMatrix>(&text).unwrap(), x);
        assert!(serde_json::from_str::<ParticipationMatrix>("[[2]]").is_err());
    }
}
