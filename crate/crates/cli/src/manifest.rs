//! Run manifests and sweep definitions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::args::{Invocation, ScopeArg, SimulateArgs};
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Everything needed to repeat a run: the invocation plus digests of what it
/// read and wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub invocation: Invocation,
    /// Input path to sha256.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    /// Output file name to sha256.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest fields are serializable")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Pipeline settings applied to every simulated dataset of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPipeline {
    pub alpha: f64,
    /// Full rank when absent.
    pub k: Option<usize>,
    pub seed: u64,
    pub bins: usize,
}

impl Default for SweepPipeline {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            k: None,
            seed: 0,
            bins: 20,
        }
    }
}

/// Simulation defaults shared by the sweep; the swept field is overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSimulation {
    pub users: usize,
    pub items: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub e: f64,
    pub r: usize,
    pub iterations: usize,
    pub seed: u64,
    pub scope: ScopeArg,
}

impl Default for SweepSimulation {
    fn default() -> Self {
        let s = fbdeconv::synthetic::SyntheticConfig::default();
        Self {
            users: s.n_users,
            items: s.n_items,
            gamma: s.gamma,
            epsilon: s.epsilon,
            e: s.e,
            r: s.r,
            iterations: s.iterations,
            seed: s.seed,
            scope: ScopeArg::TopR,
        }
    }
}

impl From<&SweepSimulation> for SimulateArgs {
    fn from(s: &SweepSimulation) -> Self {
        SimulateArgs {
            users: s.users,
            items: s.items,
            gamma: s.gamma,
            epsilon: s.epsilon,
            e: s.e,
            r: s.r,
            iterations: s.iterations,
            seed: s.seed,
            scope: s.scope,
        }
    }
}

/// A parameter sweep:
///
/// ```toml
/// parameter = "alpha"
/// grid = [0.25, 0.5, 1.0]
/// seeds = 20
///
/// [simulation]
/// gamma = 0.1
///
/// [pipeline]
/// k = 50
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    pub parameter: String,
    pub grid: Vec<f64>,
    #[serde(default = "one")]
    pub seeds: usize,
    #[serde(default)]
    pub simulation: SweepSimulation,
    #[serde(default)]
    pub pipeline: SweepPipeline,
}

fn one() -> usize {
    1
}

impl SweepManifest {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("{}: {e}", origin.display())))
    }
}
