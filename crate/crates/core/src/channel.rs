//! Subcarrier capacities and the two cooperative-mode allocation schemes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Matrix;
use crate::scenario::Scenario;
use crate::sensing::ParticipationMatrix;

/// `c_{k,j}` in b/s, subcarriers × users.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityMatrix {
    pub c: Matrix<f64>,
}

impl CapacityMatrix {
    #[inline]
    pub fn at(&self, k: usize, j: usize) -> f64 {
        self.c.at(k, j)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.c.rows()
    }

    pub fn n_users(&self) -> usize {
        self.c.cols()
    }
}

/// Shannon capacity of one subcarrier.
#[inline]
pub fn shannon_capacity(bandwidth: f64, tx_power: f64, gain: f64, noise: f64) -> f64 {
    bandwidth * (1.0 + tx_power * gain / noise).log2()
}

pub fn compute_capacities(scenario: &Scenario) -> CapacityMatrix {
    let p = &scenario.params;
    let g = &scenario.channel_gains;
    CapacityMatrix {
        c: Matrix::from_fn(g.rows(), g.cols(), |k, j| {
            shannon_capacity(p.bandwidth, p.tx_power, g.at(k, j), p.noise_variance)
        }),
    }
}

/// Owner of each subcarrier. Holding at most one owner per subcarrier makes
/// the exclusivity constraint structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubcarrierAssignment {
    owners: Vec<Option<usize>>,
    n_users: usize,
}

impl SubcarrierAssignment {
    pub fn empty(n_subcarriers: usize, n_users: usize) -> Self {
        SubcarrierAssignment { owners: vec![None; n_subcarriers], n_users }
    }

    pub fn from_owners(owners: Vec<Option<usize>>, n_users: usize) -> Result<Self> {
        if let Some(bad) = owners.iter().flatten().find(|&&j| j >= n_users) {
            return Err(Error::Dimension(format!("subcarrier owner {bad} out of range for {n_users} users")));
        }
        Ok(SubcarrierAssignment { owners, n_users })
    }

    pub fn n_subcarriers(&self) -> usize {
        self.owners.len()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    #[inline]
    pub fn owner(&self, k: usize) -> Option<usize> {
        self.owners[k]
    }

    pub fn owners(&self) -> &[Option<usize>] {
        &self.owners
    }

    pub fn assign(&mut self, k: usize, user: Option<usize>) {
        debug_assert!(user.is_none_or(|j| j < self.n_users));
        self.owners[k] = user;
    }

    pub fn subcarriers_of(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.owners.iter().enumerate().filter(move |(_, o)| **o == Some(user)).map(|(k, _)| k)
    }

    /// The K × M binary matrix `S`.
    pub fn to_matrix(&self) -> Matrix<bool> {
        Matrix::from_fn(self.owners.len(), self.n_users, |k, j| self.owners[k] == Some(j))
    }

    /// Number of subcarriers held per user.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_users];
        for j in self.owners.iter().flatten() {
            counts[*j] += 1;
        }
        counts
    }

    /// Every user's budget `Σ_k s_{k,j} c_{k,j}`.
    pub fn budgets(&self, caps: &CapacityMatrix) -> Vec<f64> {
        let mut b = vec![0.0; self.n_users];
        for (k, owner) in self.owners.iter().enumerate() {
            if let Some(j) = *owner {
                b[j] += caps.at(k, j);
            }
        }
        b
    }
}

#[derive(Serialize, Deserialize)]
struct AssignmentDoc {
    n_subcarriers: usize,
    n_users: usize,
    pairs: Vec<(usize, usize)>,
}

impl Serialize for SubcarrierAssignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AssignmentDoc {
            n_subcarriers: self.owners.len(),
            n_users: self.n_users,
            pairs: self.owners.iter().enumerate().filter_map(|(k, o)| o.map(|j| (k, j))).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubcarrierAssignment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = AssignmentDoc::deserialize(d)?;
        let mut owners = vec![None; doc.n_subcarriers];
        for (k, j) in doc.pairs {
            if k >= doc.n_subcarriers || j >= doc.n_users {
                return Err(D::Error::custom(format!("pair ({k}, {j}) out of range")));
            }
            if owners[k].replace(j).is_some() {
                return Err(D::Error::custom(format!("subcarrier {k} assigned twice")));
            }
        }
        Ok(SubcarrierAssignment { owners, n_users: doc.n_users })
    }
}

/// Left side of the per-user bandwidth constraint.
pub fn user_budget(caps: &CapacityMatrix, assign: &SubcarrierAssignment, j: usize) -> f64 {
    assign.subcarriers_of(j).map(|k| caps.at(k, j)).sum()
}

/// Per-user flag: does the allocated budget cover the rates of all joined tasks?
pub fn check_rate_feasible(
    caps: &CapacityMatrix,
    assign: &SubcarrierAssignment,
    participation: &ParticipationMatrix,
    scenario: &Scenario,
) -> Vec<bool> {
    let budgets = assign.budgets(caps);
    (0..participation.n_users())
        .map(|j| {
            let demand: f64 = participation.tasks_of(j).map(|i| scenario.tasks[i].r).sum();
            budgets[j] >= demand
        })
        .collect()
}

/// Every subcarrier goes to a uniformly random user.
pub fn allocate_random<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> SubcarrierAssignment {
    let m = scenario.n_users();
    let mut assign = SubcarrierAssignment::empty(scenario.n_subcarriers(), m);
    if m == 0 {
        return assign;
    }
    for k in 0..scenario.n_subcarriers() {
        assign.assign(k, Some(rng.random_range(0..m)));
    }
    assign
}

/// `RK_j = Σ_i Q_{i,j} / r_i`.
pub fn rank_keys(scenario: &Scenario) -> Vec<f64> {
    (0..scenario.n_users())
        .map(|j| (0..scenario.n_tasks()).map(|i| scenario.q(i, j) / scenario.tasks[i].r).sum())
        .collect()
}

/// Users sorted by rank key descending, ties by ascending id.
pub fn priority_order(scenario: &Scenario) -> Vec<usize> {
    let rk = rank_keys(scenario);
    let mut order: Vec<usize> = (0..scenario.n_users()).collect();
    order.sort_by(|&a, &b| rk[b].total_cmp(&rk[a]).then(a.cmp(&b)));
    order
}

/// Round-robin down the priority list; each user takes its best remaining
/// subcarrier (ties by ascending subcarrier id) until none are left.
pub fn allocate_priority(scenario: &Scenario, caps: &CapacityMatrix) -> SubcarrierAssignment {
    let order = priority_order(scenario);
    allocate_in_rounds(&order, caps)
}

pub(crate) fn allocate_in_rounds(order: &[usize], caps: &CapacityMatrix) -> SubcarrierAssignment {
    let k_total = caps.n_subcarriers();
    let mut assign = SubcarrierAssignment::empty(k_total, caps.n_users());
    if order.is_empty() {
        return assign;
    }
    let mut free = vec![true; k_total];
    let mut remaining = k_total;
    while remaining > 0 {
        for &j in order {
            if remaining == 0 {
                break;
            }
            let mut best: Option<usize> = None;
            for k in (0..k_total).filter(|&k| free[k]) {
                if best.is_none_or(|b| caps.at(k, j) > caps.at(b, j)) {
                    best = Some(k);
                }
            }
            let k = best.expect("a free subcarrier exists");
            free[k] = false;
            remaining -= 1;
            assign.assign(k, Some(j));
        }
    }
    assign
}
