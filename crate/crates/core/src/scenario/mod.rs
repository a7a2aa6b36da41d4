//! Scenario files, orchestration of runs, and result output.

mod document;
pub mod presets;
mod results;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::entities::BrokerPlan;
use crate::model::DatacenterCharacteristics;

pub use document::{emit_scenario, parse_scenario};
pub use results::{render_results_csv, write_results, LEDGER_FILE, RESULTS_FILE, RESULTS_HEADER};
pub use run::{
    broker_run, build_simulation, run_scenario, RunOptions, RunOutcome, SimulationModel,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub description: String,
    pub seed: Option<u64>,
    pub datacenters: Vec<DatacenterCharacteristics>,
    pub broker_plan: BrokerPlan,
}

impl Scenario {
    pub fn host_count(&self) -> usize {
        self.datacenters.iter().map(|dc| dc.hosts.len()).sum()
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    /// The document does not match the schema.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    /// The document is well-formed but violates a constraint.
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("no registered datacenter can host the requested vms")]
    NoSuitableProvider,
    #[error("simulation failed: {0}")]
    Runtime(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    /// Schema and validation failures, as opposed to runtime ones.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            ScenarioError::Schema { .. } | ScenarioError::Validation { .. }
        )
    }
}

#[cfg(test)]
mod tests;
