//! Problem instances: tasks, users, geometry and channel draws.
//!
//! All randomness flows through one [`ChaCha8Rng`] seeded from
//! [`GlobalParams::rng_seed`]. Draw order is fixed: every task in index order
//! (x, y, a, d0, r, rho, phi), then every user (x, y), then the channel gains
//! row-major (subcarrier-major, user-minor).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Matrix;
use crate::sensing;

/// Current version of the scenario JSON document.
pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Distances below this are clamped before being raised to a negative power.
pub const DISTANCE_FLOOR_KM: f64 = 0.01;

pub const PHI_RANGE: (f64, f64) = (90.0, 150.0);
pub const RHO_RANGE: (f64, f64) = (35.0, 60.0);
pub const A_RANGE: (f64, f64) = (3.0, 7.0);
/// Nominal required-rate range; multiplied by [`GlobalParams::rate_unit`].
pub const RATE_RANGE: (f64, f64) = (6.0, 12.0);
pub const AOI_RANGE_KM: (f64, f64) = (0.6, 2.5);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Euclidean distance in km.
pub fn distance(p: Point, q: Point) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalParams {
    /// Side of the square deployment area, km.
    pub side_length: f64,
    pub n_subcarriers: usize,
    /// Per-subcarrier bandwidth, Hz.
    pub bandwidth: f64,
    /// Uplink transmit power, W.
    pub tx_power: f64,
    /// Noise variance, W.
    pub noise_variance: f64,
    pub path_loss_exponent: f64,
    pub contribution_exponent: f64,
    /// Charge per `charge_rate_unit` of required rate.
    pub rate_charge_scale: f64,
    /// Rate (b/s) that one unit of `rate_charge_scale` prices.
    pub charge_rate_unit: f64,
    pub revenue_split: f64,
    pub incentive_alpha1: f64,
    pub incentive_alpha2: f64,
    /// b/s per nominal rate unit.
    pub rate_unit: f64,
    pub rng_seed: u64,
}

impl Default for GlobalParams {
    fn default() -> Self {
        GlobalParams {
            side_length: 10.0,
            n_subcarriers: 60,
            bandwidth: 15_000.0,
            tx_power: dbm_to_watts(23.0),
            noise_variance: dbm_to_watts(-90.0),
            path_loss_exponent: 3.0,
            contribution_exponent: 0.8,
            rate_charge_scale: 7.0,
            charge_rate_unit: 1.0e6,
            revenue_split: 0.2,
            incentive_alpha1: 0.9,
            incentive_alpha2: 0.4,
            rate_unit: 50_000.0,
            rng_seed: 0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

impl GlobalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("side_length", self.side_length),
            ("bandwidth", self.bandwidth),
            ("tx_power", self.tx_power),
            ("noise_variance", self.noise_variance),
            ("path_loss_exponent", self.path_loss_exponent),
            ("contribution_exponent", self.contribution_exponent),
            ("rate_charge_scale", self.rate_charge_scale),
            ("charge_rate_unit", self.charge_rate_unit),
            ("revenue_split", self.revenue_split),
            ("rate_unit", self.rate_unit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam { name, reason: format!("must be positive, got {v}") });
            }
        }
        for (name, v) in [("incentive_alpha1", self.incentive_alpha1), ("incentive_alpha2", self.incentive_alpha2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParam { name, reason: format!("must be nonnegative, got {v}") });
            }
        }
        if self.n_subcarriers == 0 {
            return Err(Error::InvalidParam { name: "n_subcarriers", reason: "must be at least 1".into() });
        }
        Ok(())
    }

    /// Charge per b/s of required rate.
    pub fn beta_per_bps(&self) -> f64 {
        self.rate_charge_scale / self.charge_rate_unit
    }

    pub fn base_station(&self) -> Point {
        Point::new(self.side_length / 2.0, self.side_length / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: usize,
    pub location: Point,
    /// Contribution scale factor.
    pub a: f64,
    /// Area-of-interest radius, km.
    pub d0: f64,
    /// Required feedback rate, b/s.
    pub r: f64,
    /// Contribution saturation threshold.
    pub rho: f64,
    /// Performance upper bound.
    pub phi: f64,
}

impl Task {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("d0", self.d0), ("r", self.r), ("rho", self.rho), ("phi", self.phi)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam { name, reason: format!("task {} has {name} = {v}", self.id) });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: usize,
    pub location: Point,
    pub distance_to_bs: f64,
    pub distances_to_tasks: Vec<f64>,
}

impl User {
    pub fn new(id: usize, location: Point, bs: Point, tasks: &[Task]) -> Self {
        User {
            id,
            location,
            distance_to_bs: distance(location, bs),
            distances_to_tasks: tasks.iter().map(|t| distance(location, t.location)).collect(),
        }
    }
}

/// Immutable problem instance.
///
/// The contribution matrix `Q` (tasks × users) is derived from geometry on
/// construction and is not part of the serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioDoc", into = "ScenarioDoc")]
pub struct Scenario {
    pub params: GlobalParams,
    pub tasks: Vec<Task>,
    pub users: Vec<User>,
    /// `|h_{k,j}|^2`, subcarriers × users.
    pub channel_gains: Matrix<f64>,
    contributions: Matrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    schema_version: u32,
    params: GlobalParams,
    tasks: Vec<Task>,
    users: Vec<User>,
    channel_gains: Matrix<f64>,
}

impl From<Scenario> for ScenarioDoc {
    fn from(s: Scenario) -> Self {
        ScenarioDoc {
            schema_version: SCENARIO_SCHEMA_VERSION,
            params: s.params,
            tasks: s.tasks,
            users: s.users,
            channel_gains: s.channel_gains,
        }
    }
}

impl TryFrom<ScenarioDoc> for Scenario {
    type Error = Error;

    fn try_from(doc: ScenarioDoc) -> Result<Self> {
        if doc.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario schema version {} (expected {SCENARIO_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Scenario::new(doc.params, doc.tasks, doc.users, doc.channel_gains)
    }
}

impl Scenario {
    /// Assembles a scenario from explicit parts, validating every invariant.
    pub fn new(params: GlobalParams, tasks: Vec<Task>, users: Vec<User>, channel_gains: Matrix<f64>) -> Result<Self> {
        params.validate()?;
        for (i, t) in tasks.iter().enumerate() {
            if t.id != i {
                return Err(Error::Dimension(format!("task at position {i} has id {}", t.id)));
            }
            t.validate()?;
        }
        let bs = params.base_station();
        for (j, u) in users.iter().enumerate() {
            if u.id != j {
                return Err(Error::Dimension(format!("user at position {j} has id {}", u.id)));
            }
            if *u != User::new(j, u.location, bs, &tasks) {
                return Err(Error::Dimension(format!("user {j} has stale derived distances")));
            }
        }
        if channel_gains.rows() != params.n_subcarriers || channel_gains.cols() != users.len() {
            return Err(Error::Dimension(format!(
                "channel gains are {}x{}, expected {}x{}",
                channel_gains.rows(),
                channel_gains.cols(),
                params.n_subcarriers,
                users.len()
            )));
        }
        if channel_gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidParam {
                name: "channel_gains",
                reason: "entries must be finite and nonnegative".into(),
            });
        }
        let contributions = Matrix::from_fn(tasks.len(), users.len(), |i, j| {
            sensing::contribution(&tasks[i], &users[j], params.contribution_exponent)
        });
        Ok(Scenario { params, tasks, users, channel_gains, contributions })
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.params.n_subcarriers
    }

    pub fn seed(&self) -> u64 {
        self.params.rng_seed
    }

    /// Cached `Q_{i,j}`.
    #[inline]
    pub fn q(&self, task: usize, user: usize) -> f64 {
        self.contributions.at(task, user)
    }

    pub fn contributions(&self) -> &Matrix<f64> {
        &self.contributions
    }

    /// `β r_i`: what a participant of task `i` pays the base station.
    #[inline]
    pub fn charge(&self, task: usize) -> f64 {
        sensing::rate_charge(self.params.beta_per_bps(), self.tasks[task].r, true)
    }

    /// Returns a copy with different incentive intensities; geometry and draws are shared.
    pub fn with_alphas(&self, alpha1: f64, alpha2: f64) -> Scenario {
        let mut s = self.clone();
        s.params.incentive_alpha1 = alpha1;
        s.params.incentive_alpha2 = alpha2;
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws a random instance. Deterministic in `(params, n_tasks, n_users)`.
pub fn generate_scenario(params: &GlobalParams, n_tasks: usize, n_users: usize) -> Result<Scenario> {
    params.validate()?;
    if n_tasks == 0 {
        return Err(Error::InvalidParam { name: "n_tasks", reason: "must be at least 1".into() });
    }
    if n_users == 0 {
        return Err(Error::InvalidParam { name: "n_users", reason: "must be at least 1".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let side = (0.0, params.side_length);

    let tasks: Vec<Task> = (0..n_tasks)
        .map(|id| {
            let location = Point::new(uniform(&mut rng, side), uniform(&mut rng, side));
            let a = uniform(&mut rng, A_RANGE);
            let d0 = uniform(&mut rng, AOI_RANGE_KM);
            let r = uniform(&mut rng, RATE_RANGE) * params.rate_unit;
            let rho = uniform(&mut rng, RHO_RANGE);
            let phi = uniform(&mut rng, PHI_RANGE);
            Task { id, location, a, d0, r, rho, phi }
        })
        .collect();

    let bs = params.base_station();
    let users: Vec<User> = (0..n_users)
        .map(|id| {
            let location = Point::new(uniform(&mut rng, side), uniform(&mut rng, side));
            User::new(id, location, bs, &tasks)
        })
        .collect();

    let means: Vec<f64> =
        users.iter().map(|u| u.distance_to_bs.max(DISTANCE_FLOOR_KM).powf(-params.path_loss_exponent)).collect();
    let channel_gains = Matrix::from_fn(params.n_subcarriers, n_users, |_, j| {
        // |h|^2 of a circularly-symmetric Gaussian is exponential with the same mean.
        let e: f64 = rng.sample(Exp1);
        (means[j] * e).max(f64::MIN_POSITIVE)
    });

    Scenario::new(params.clone(), tasks, users, channel_gains)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> GlobalParams {
        GlobalParams { rng_seed: seed, ..GlobalParams::default() }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
        let p = Point::new(1.25, -7.5);
        assert_eq!(distance(p, p), 0.0);
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = generate_scenario(&params(42), 7, 9).unwrap();
        let b = generate_scenario(&params(42), 7, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_scenario(&params(43), 7, 9).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_dimensions_and_params() {
        assert!(generate_scenario(&params(1), 0, 3).is_err());
        assert!(generate_scenario(&params(1), 3, 0).is_err());
        let bad = GlobalParams { bandwidth: 0.0, ..params(1) };
        assert!(matches!(generate_scenario(&bad, 2, 2), Err(Error::InvalidParam { name: "bandwidth", .. })));
        let bad = GlobalParams { incentive_alpha2: -0.1, ..params(1) };
        assert!(generate_scenario(&bad, 2, 2).is_err());
        let bad = GlobalParams { n_subcarriers: 0, ..params(1) };
        assert!(generate_scenario(&bad, 2, 2).is_err());
    }

    #[test]
    fn invariants_hold_on_generated_instance() {
        let p = params(7);
        let s = generate_scenario(&p, 12, 15).unwrap();
        assert_eq!(s.channel_gains.rows(), p.n_subcarriers);
        assert_eq!(s.channel_gains.cols(), 15);
        assert!(s.channel_gains.iter().all(|g| *g > 0.0));
        let bs = p.base_station();
        for u in &s.users {
            assert_eq!(u.distance_to_bs, distance(u.location, bs));
            for (i, t) in s.tasks.iter().enumerate() {
                assert_eq!(u.distances_to_tasks[i], distance(u.location, t.location));
            }
            assert!((0.0..=p.side_length).contains(&u.location.x));
        }
        for t in &s.tasks {
            assert!((RATE_RANGE.0 * p.rate_unit..=RATE_RANGE.1 * p.rate_unit).contains(&t.r));
            assert!((AOI_RANGE_KM.0..=AOI_RANGE_KM.1).contains(&t.d0));
        }
    }

    #[test]
    fn user_at_base_station_is_clamped() {
        let p = params(3);
        let tasks =
            vec![Task { id: 0, location: Point::new(1.0, 1.0), a: 5.0, d0: 1.0, r: 3.0e5, rho: 40.0, phi: 100.0 }];
        let user = User::new(0, Point::new(5.0, 5.0), p.base_station(), &tasks);
        assert_eq!(user.distance_to_bs, 0.0);
        let mean = user.distance_to_bs.max(DISTANCE_FLOOR_KM).powf(-p.path_loss_exponent);
        assert!(mean.is_finite());
        assert!((mean - 1.0e6).abs() < 1e-3);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = generate_scenario(&params(11), 5, 6).unwrap();
        let text = s.to_json().unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.contributions(), s.contributions());
    }

    #[test]
    fn json_with_stale_distances_is_rejected() {
        let s = generate_scenario(&params(11), 3, 2).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        v["users"][0]["distance_to_bs"] = serde_json::json!(123.0);
        assert!(serde_json::from_value::<Scenario>(v).is_err());
    }

    #[test]
    fn parameter_means_match_uniform_ranges() {
        // 10^4 draws of each per-task parameter.
        let n = 50;
        let runs = 200;
        let mut sums = [0.0f64; 5];
        for seed in 0..runs {
            let s = generate_scenario(&params(seed), n, 1).unwrap();
            for t in &s.tasks {
                sums[0] += t.a;
                sums[1] += t.rho;
                sums[2] += t.phi;
                sums[3] += t.r / s.params.rate_unit;
                sums[4] += t.d0;
            }
        }
        let count = (n * runs as usize) as f64;
        let targets = [5.0, 47.5, 120.0, 9.0, 1.55];
        for (sum, target) in sums.iter().zip(targets) {
            let mean = sum / count;
            assert!((mean - target).abs() / target < 0.02, "mean {mean} vs {target}");
        }
        let phi_mean = sums[2] / count;
        assert!((115.0..=125.0).contains(&phi_mean));
    }
}
