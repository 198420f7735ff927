//! Reference formulas recomputed from scenario geometry, independent of the
//! library's own helpers.
#![allow(dead_code)]

use crowdsense::scenario::Scenario;
use crowdsense::sensing::ParticipationMatrix;

pub const EPS: f64 = 1e-9;

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

pub fn q(s: &Scenario, i: usize, j: usize) -> f64 {
    let t = &s.tasks[i];
    let u = &s.users[j];
    let d = dist((t.location.x, t.location.y), (u.location.x, u.location.y));
    let lambda = s.params.contribution_exponent;
    if d <= t.d0 {
        t.a / t.d0.powf(lambda)
    } else {
        t.a / d.max(0.01).powf(lambda)
    }
}

pub fn gamma(s: &Scenario, i: usize, total_q: f64) -> f64 {
    let t = &s.tasks[i];
    (t.phi / t.rho * total_q).min(t.phi)
}

pub fn charge(s: &Scenario, i: usize) -> f64 {
    s.params.rate_charge_scale * s.tasks[i].r / s.params.charge_rate_unit
}

pub fn capacity(s: &Scenario, k: usize, j: usize) -> f64 {
    let p = &s.params;
    p.bandwidth * (1.0 + p.tx_power * s.channel_gains.at(k, j) / p.noise_variance).log2()
}

pub fn budget(s: &Scenario, owners: &[Option<usize>], j: usize) -> f64 {
    owners.iter().enumerate().filter(|(_, o)| **o == Some(j)).map(|(k, _)| capacity(s, k, j)).sum()
}

pub fn row_total(s: &Scenario, x: &ParticipationMatrix, i: usize) -> f64 {
    (0..s.users.len()).filter(|&j| x.get(i, j)).map(|j| q(s, i, j)).sum()
}

pub fn pfm(s: &Scenario, x: &ParticipationMatrix) -> f64 {
    (0..s.tasks.len()).map(|i| gamma(s, i, row_total(s, x, i))).sum()
}

pub fn charges(s: &Scenario, x: &ParticipationMatrix) -> f64 {
    (0..s.tasks.len()).map(|i| charge(s, i) * (0..s.users.len()).filter(|&j| x.get(i, j)).count() as f64).sum()
}

pub fn u_ce(s: &Scenario, x: &ParticipationMatrix) -> f64 {
    pfm(s, x) + s.params.revenue_split * charges(s, x)
}

pub fn u_nonco(s: &Scenario, x: &ParticipationMatrix) -> f64 {
    let weighted: f64 = (0..s.tasks.len()).map(|i| row_total(s, x, i)).sum();
    u_ce(s, x) - s.params.incentive_alpha1 * weighted
}

/// Coalition value `α₂ Γ`.
pub fn value(s: &Scenario, i: usize, total_q: f64) -> f64 {
    s.params.incentive_alpha2 * gamma(s, i, total_q)
}

/// Proportional share of member `j` in coalition `i`.
pub fn share(s: &Scenario, x: &ParticipationMatrix, i: usize, j: usize) -> f64 {
    let total = row_total(s, x, i);
    value(s, i, total) * q(s, i, j) / total
}

/// `Σ_j C_j^co`: proportional shares minus charges, over all memberships.
pub fn total_coop_user_utility(s: &Scenario, x: &ParticipationMatrix) -> f64 {
    let mut sum = 0.0;
    for i in 0..s.tasks.len() {
        for j in 0..s.users.len() {
            if x.get(i, j) {
                sum += share(s, x, i, j) - charge(s, i);
            }
        }
    }
    sum
}

/// Tasks in descending `Q/r`, ties by index.
pub fn preference_order(s: &Scenario, j: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..s.tasks.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = q(s, a, j) / s.tasks[a].r;
        let rb = q(s, b, j) / s.tasks[b].r;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    order
}

pub fn follower_value(s: &Scenario, i: usize, j: usize) -> f64 {
    s.params.incentive_alpha1 * q(s, i, j) - charge(s, i)
}

/// Prefix along the preference order, stopping at the first task that is
/// unprofitable or does not fit.
pub fn value_prefix(s: &Scenario, j: usize, budget: f64) -> Vec<usize> {
    let mut used = 0.0;
    let mut out = Vec::new();
    for i in preference_order(s, j) {
        if follower_value(s, i, j) <= 0.0 {
            break;
        }
        used += s.tasks[i].r;
        if used > budget {
            break;
        }
        out.push(i);
    }
    out
}

/// Best subset by enumerating all `2^n` selections.
pub fn brute_force_knapsack(weights: &[f64], values: &[f64], capacity: f64) -> f64 {
    let n = weights.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let (mut w, mut v) = (0.0, 0.0);
        for b in 0..n {
            if mask & (1 << b) != 0 {
                w += weights[b];
                v += values[b];
            }
        }
        if w <= capacity && v > best {
            best = v;
        }
    }
    best
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
