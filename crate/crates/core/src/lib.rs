//! Deterministic discrete-event simulator for virtualized data centers.
//!
//! A run is a set of entities exchanging messages through a future-event
//! list ([`kernel`]): a registry that lists datacenters, datacenters that
//! place VMs on hosts and execute tasks ([`entities`], [`model`],
//! [`scheduling`]), and a broker acting for one user. Charges accumulate in
//! per-datacenter ledgers ([`accounting`]). [`scenario`] reads scenario
//! documents, runs them and writes results.

pub mod accounting;
pub mod bench;
pub mod entities;
pub mod kernel;
pub mod model;
pub mod scenario;
pub mod scheduling;

pub use accounting::{ChargingPolicy, CostLedger, PayAsYouGo, Prices};
pub use entities::{Binding, BrokerPlan, CompletionRecord, TaskGroup, TaskOutcome};
pub use kernel::{EntityId, SimTime, Simulation, Tag, Trace};
pub use model::{DatacenterCharacteristics, HostSpec, SharingPolicy, TaskUnit, VmSpec};
pub use scenario::{
    emit_scenario, parse_scenario, run_scenario, write_results, RunOptions, RunOutcome, Scenario,
    ScenarioError,
};
