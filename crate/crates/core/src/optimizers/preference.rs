use serde::{Deserialize, Serialize};

use crate::grid::Matrix;
use crate::scenario::Scenario;

/// `t_{p,j}`: the task user `j` ranks `p`-th, ordered by `Q_{i,j} / r_i`
/// descending with ties on ascending task id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    pub t: Matrix<usize>,
}

impl PreferenceMatrix {
    pub fn n_tasks(&self) -> usize {
        self.t.rows()
    }

    pub fn n_users(&self) -> usize {
        self.t.cols()
    }

    /// User `j`'s tasks from most to least preferred.
    pub fn order(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.t.column(user).copied()
    }
}

pub fn preference_ratio(scenario: &Scenario, task: usize, user: usize) -> f64 {
    scenario.q(task, user) / scenario.tasks[task].r
}

pub fn build_preference_matrix(scenario: &Scenario) -> PreferenceMatrix {
    let n = scenario.n_tasks();
    let m = scenario.n_users();
    let columns: Vec<Vec<usize>> = (0..m)
        .map(|j| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                preference_ratio(scenario, b, j).total_cmp(&preference_ratio(scenario, a, j)).then(a.cmp(&b))
            });
            order
        })
        .collect();
    PreferenceMatrix { t: Matrix::from_fn(n, m, |p, j| columns[j][p]) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, GlobalParams, Point, Task, User};

    fn two_task_scenario(q_over_r: [f64; 2]) -> Scenario {
        // One user at the origin inside both AoIs; a_i chosen so Q_i / r_i hits the target.
        let params = GlobalParams { contribution_exponent: 1.0, ..Default::default() };
        let tasks: Vec<Task> = q_over_r
            .iter()
            .enumerate()
            .map(|(id, &ratio)| Task {
                id,
                location: Point::new(0.0, 0.0),
                a: ratio * 4.0e5,
                d0: 1.0,
                r: 4.0e5,
                rho: 50.0,
                phi: 100.0,
            })
            .collect();
        let users = vec![User::new(0, Point::new(0.0, 0.0), params.base_station(), &tasks)];
        let gains = Matrix::filled(params.n_subcarriers, 1, 1e-6);
        Scenario::new(params, tasks, users, gains).unwrap()
    }

    #[test]
    fn sorts_by_ratio() {
        let p = build_preference_matrix(&two_task_scenario([2.0, 1.0]));
        assert_eq!(p.order(0).collect::<Vec<_>>(), vec![0, 1]);
        let p = build_preference_matrix(&two_task_scenario([1.0, 2.0]));
        assert_eq!(p.order(0).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn equal_ratios_keep_id_order() {
        let p = build_preference_matrix(&two_task_scenario([1.5, 1.5]));
        assert_eq!(p.order(0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn columns_are_permutations_with_monotone_ratios() {
        let s = generate_scenario(&GlobalParams { rng_seed: 12, ..Default::default() }, 9, 5).unwrap();
        let p = build_preference_matrix(&s);
        for j in 0..5 {
            let order: Vec<usize> = p.order(j).collect();
            let mut sorted = order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..9).collect::<Vec<_>>());
            for w in order.windows(2) {
                assert!(preference_ratio(&s, w[0], j) >= preference_ratio(&s, w[1], j));
            }
        }
    }
}
