//! The serialized result of one mechanism run.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::SubcarrierAssignment;
use crate::error::{Error, Result};
use crate::ocf::OcfDiagnostics;
use crate::optimizers::SolverDiagnostics;
use crate::scenario::{GlobalParams, Scenario};
use crate::sensing::{ParticipationMatrix, PayoffDistribution, UtilityReport};

pub const OUTCOME_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Centralized,
    Noncoop,
    OcfRandom,
    OcfPriority,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Centralized, Mode::Noncoop, Mode::OcfRandom, Mode::OcfPriority];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Centralized => "centralized",
            Mode::Noncoop => "noncoop",
            Mode::OcfRandom => "ocf-random",
            Mode::OcfPriority => "ocf-priority",
        }
    }

    pub fn is_ocf(self) -> bool {
        matches!(self, Mode::OcfRandom | Mode::OcfPriority)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocf: Option<OcfDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub schema_version: u32,
    pub mode: Mode,
    pub seed: u64,
    /// Incentive intensity the mechanism ran with (α₁ or α₂), if any.
    pub alpha: Option<f64>,
    pub n_tasks: usize,
    pub n_users: usize,
    pub params: GlobalParams,
    /// SHA-256 of the scenario's canonical JSON.
    pub scenario_hash: String,
    /// Hash of the experiment configuration that produced this run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub assignment: SubcarrierAssignment,
    pub participation: ParticipationMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<PayoffDistribution>,
    pub utilities: UtilityReport,
    pub diagnostics: Diagnostics,
}

impl MechanismOutcome {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mode: Mode,
        scenario: &Scenario,
        alpha: Option<f64>,
        assignment: SubcarrierAssignment,
        participation: ParticipationMatrix,
        utilities: UtilityReport,
        payoffs: Option<PayoffDistribution>,
        diagnostics: Diagnostics,
    ) -> Self {
        MechanismOutcome {
            schema_version: OUTCOME_SCHEMA_VERSION,
            mode,
            seed: scenario.seed(),
            alpha,
            n_tasks: scenario.n_tasks(),
            n_users: scenario.n_users(),
            params: scenario.params.clone(),
            scenario_hash: scenario_hash(scenario),
            config_hash: None,
            assignment,
            participation,
            payoffs,
            utilities,
            diagnostics,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let out: MechanismOutcome = serde_json::from_str(text)?;
        if out.schema_version != OUTCOME_SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported outcome schema version {}", out.schema_version)));
        }
        if out.participation.n_tasks() != out.n_tasks || out.participation.n_users() != out.n_users {
            return Err(Error::Dimension("participation does not match n_tasks x n_users".into()));
        }
        if out.assignment.n_users() != out.n_users || out.assignment.n_subcarriers() != out.params.n_subcarriers {
            return Err(Error::Dimension("assignment does not match n_subcarriers x n_users".into()));
        }
        Ok(out)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn scenario_hash(scenario: &Scenario) -> String {
    let text = serde_json::to_string(scenario).expect("scenario serializes");
    sha256_hex(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!(matches!("ocf".parse::<Mode>(), Err(Error::UnknownMode(_))));
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
