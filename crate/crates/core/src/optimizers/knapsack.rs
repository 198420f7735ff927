//! Follower task selection: the prefix rule and an exact 0-1 knapsack.

use crate::error::{Error, Result};
use crate::optimizers::PreferenceMatrix;
use crate::scenario::{Scenario, Task};

/// Largest item count the exact solver accepts.
pub const EXACT_KNAPSACK_CAP: usize = 64;

/// Takes tasks in preference order while the cumulative rate fits `budget`.
/// Stops at the first task that does not fit; later, cheaper tasks are not
/// considered.
pub fn follower_prefix_selection(prefs: &PreferenceMatrix, budget: f64, tasks: &[Task], user: usize) -> Vec<bool> {
    let mut column = vec![false; tasks.len()];
    let mut used = 0.0;
    for i in prefs.order(user) {
        used += tasks[i].r;
        if used > budget {
            break;
        }
        column[i] = true;
    }
    column
}

/// Prefix rule that additionally stops at the first task whose item value
/// `α₁ Q_{i,j} − β r_i` is not positive. Preference order is value-density
/// order, so this is the linear-relaxation greedy for the follower knapsack.
pub fn follower_rational_prefix(scenario: &Scenario, prefs: &PreferenceMatrix, budget: f64, user: usize) -> Vec<bool> {
    let mut column = vec![false; scenario.n_tasks()];
    let mut used = 0.0;
    for i in prefs.order(user) {
        if follower_item_value(scenario, i, user) <= 0.0 {
            break;
        }
        used += scenario.tasks[i].r;
        if used > budget {
            break;
        }
        column[i] = true;
    }
    column
}

/// `α₁ Q_{i,j} − β r_i`.
#[inline]
pub fn follower_item_value(scenario: &Scenario, task: usize, user: usize) -> f64 {
    scenario.params.incentive_alpha1 * scenario.q(task, user) - scenario.charge(task)
}

/// Objective of a follower's selection.
pub fn follower_objective(scenario: &Scenario, column: &[bool], user: usize) -> f64 {
    column.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| follower_item_value(scenario, i, user)).sum()
}

/// Optimal follower selection under budget.
pub fn follower_exact_knapsack(scenario: &Scenario, budget: f64, user: usize) -> Result<(Vec<bool>, f64)> {
    let items: Vec<Item> = (0..scenario.n_tasks())
        .map(|i| Item { weight: scenario.tasks[i].r, value: follower_item_value(scenario, i, user) })
        .collect();
    knapsack_exact(&items, budget)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Item {
    pub weight: f64,
    pub value: f64,
}

/// Depth-first branch and bound with the fractional (Dantzig) bound.
///
/// Items with nonpositive value are never taken. Weights must be positive.
pub fn knapsack_exact(items: &[Item], capacity: f64) -> Result<(Vec<bool>, f64)> {
    if items.len() > EXACT_KNAPSACK_CAP {
        return Err(Error::KnapsackTooLarge { n: items.len(), cap: EXACT_KNAPSACK_CAP });
    }
    let mut take = vec![false; items.len()];
    if capacity < 0.0 {
        return Ok((take, 0.0));
    }
    let mut order: Vec<usize> =
        (0..items.len()).filter(|&i| items[i].value > 0.0 && items[i].weight <= capacity).collect();
    order.sort_by(|&a, &b| {
        let da = items[a].value / items[a].weight;
        let db = items[b].value / items[b].weight;
        db.total_cmp(&da).then(a.cmp(&b))
    });
    let sorted: Vec<Item> = order.iter().map(|&i| items[i]).collect();

    let mut search = Search { items: &sorted, best_value: 0.0, best: 0, current: 0 };
    search.descend(0, capacity, 0.0);
    let mut value = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        if search.best & (1u64 << pos) != 0 {
            take[i] = true;
            value += items[i].value;
        }
    }
    Ok((take, value))
}

struct Search<'a> {
    items: &'a [Item],
    best_value: f64,
    best: u64,
    current: u64,
}

impl Search<'_> {
    fn bound(&self, from: usize, mut room: f64, mut value: f64) -> f64 {
        for it in &self.items[from..] {
            if it.weight <= room {
                room -= it.weight;
                value += it.value;
            } else {
                return value + it.value * room / it.weight;
            }
        }
        value
    }

    fn descend(&mut self, pos: usize, room: f64, value: f64) {
        if value > self.best_value {
            self.best_value = value;
            self.best = self.current;
        }
        if pos == self.items.len() || self.bound(pos, room, value) <= self.best_value {
            return;
        }
        let it = self.items[pos];
        if it.weight <= room {
            self.current |= 1u64 << pos;
            self.descend(pos + 1, room - it.weight, value + it.value);
            self.current &= !(1u64 << pos);
        }
        self.descend(pos + 1, room, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Matrix;
    use crate::scenario::{GlobalParams, Point, User};

    fn prefs_identity(n: usize) -> PreferenceMatrix {
        PreferenceMatrix { t: Matrix::from_fn(n, 1, |p, _| p) }
    }

    fn tasks_with_rates(rates: &[f64]) -> Vec<Task> {
        rates
            .iter()
            .enumerate()
            .map(|(id, &r)| Task { id, location: Point::new(0.0, 0.0), a: 1.0, d0: 1.0, r, rho: 10.0, phi: 10.0 })
            .collect()
    }

    #[test]
    fn prefix_examples() {
        let tasks = tasks_with_rates(&[3.0, 5.0, 2.0]);
        let prefs = prefs_identity(3);
        assert_eq!(follower_prefix_selection(&prefs, 0.0, &tasks, 0), vec![false; 3]);
        assert_eq!(follower_prefix_selection(&prefs, 8.0, &tasks, 0), vec![true, true, false]);
        assert_eq!(follower_prefix_selection(&prefs, 10.0, &tasks, 0), vec![true; 3]);
        // Stops at the first misfit even though the third task alone would fit.
        assert_eq!(follower_prefix_selection(&prefs, 7.0, &tasks, 0), vec![true, false, false]);
    }

    #[test]
    fn knapsack_small_cases() {
        let neg = [Item { weight: 1.0, value: -1.0 }, Item { weight: 2.0, value: -0.5 }];
        assert_eq!(knapsack_exact(&neg, 10.0).unwrap(), (vec![false, false], 0.0));
        let one = [Item { weight: 1.0, value: 3.0 }];
        assert_eq!(knapsack_exact(&one, 1.0).unwrap(), (vec![true], 3.0));
        assert_eq!(knapsack_exact(&one, 0.5).unwrap(), (vec![false], 0.0));
        // Greedy by density takes item 0 and misses the optimum {1, 2}.
        let items =
            [Item { weight: 6.0, value: 12.0 }, Item { weight: 5.0, value: 9.0 }, Item { weight: 5.0, value: 9.0 }];
        assert_eq!(knapsack_exact(&items, 10.0).unwrap(), (vec![false, true, true], 18.0));
    }

    #[test]
    fn knapsack_rejects_oversized_input() {
        let items = vec![Item { weight: 1.0, value: 1.0 }; EXACT_KNAPSACK_CAP + 1];
        assert!(matches!(knapsack_exact(&items, 5.0), Err(Error::KnapsackTooLarge { .. })));
    }

    #[test]
    fn rational_prefix_stops_at_unprofitable_task() {
        let params = GlobalParams { incentive_alpha1: 0.0, ..Default::default() };
        let tasks = tasks_with_rates(&[3.0e5, 4.0e5]);
        let users = vec![User::new(0, Point::new(0.0, 0.0), params.base_station(), &tasks)];
        let gains = Matrix::filled(params.n_subcarriers, 1, 1e-6);
        let s = Scenario::new(params, tasks, users, gains).unwrap();
        let prefs = crate::optimizers::build_preference_matrix(&s);
        assert_eq!(follower_rational_prefix(&s, &prefs, 1.0e9, 0), vec![false, false]);
        assert_eq!(follower_prefix_selection(&prefs, 1.0e9, &s.tasks, 0), vec![true, true]);
        let rich = s.with_alphas(1.0e3, 0.0);
        assert_eq!(follower_rational_prefix(&rich, &prefs, 1.0e9, 0), vec![true, true]);
        let (col, value) = follower_exact_knapsack(&s, 1.0e9, 0).unwrap();
        assert_eq!(col, vec![false, false]);
        assert_eq!(value, 0.0);
    }
}
