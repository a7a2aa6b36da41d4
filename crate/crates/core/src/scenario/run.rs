use std::collections::BTreeMap;

use super::{Scenario, ScenarioError};
use crate::accounting::CostLedger;
use crate::entities::{
    Actor, Broker, BrokerPlan, CisRegistry, CompletionRecord, Datacenter, EntityFault,
};
use crate::kernel::{EntityId, RunError, SimTime, Simulation, Tag, Trace};
use crate::model::DatacenterCharacteristics;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub trace: bool,
}

/// A fully constructed, not yet started simulation.
pub struct SimulationModel {
    pub sim: Simulation<Actor>,
    pub cis: EntityId,
    pub datacenters: Vec<EntityId>,
    pub broker: EntityId,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Sorted by task id.
    pub records: Vec<CompletionRecord>,
    pub ledger: CostLedger,
    pub trace: Option<Trace>,
    pub end_time: SimTime,
    pub dispatched: BTreeMap<Tag, u64>,
    /// Per datacenter, hosts that are not back at their spec capacities.
    pub busy_hosts: BTreeMap<u32, Vec<u32>>,
}

impl RunOutcome {
    pub fn dispatched(&self, tag: Tag) -> u64 {
        self.dispatched.get(&tag).copied().unwrap_or(0)
    }
}

fn fault(e: EntityFault) -> ScenarioError {
    match e {
        EntityFault::NoSuitableProvider => ScenarioError::NoSuitableProvider,
        other => ScenarioError::Runtime(other.to_string()),
    }
}

/// Registers the registry, every datacenter and the broker, in that order.
pub fn build_simulation(
    scenario: Scenario,
    options: RunOptions,
) -> Result<SimulationModel, ScenarioError> {
    let mut sim = Simulation::new();
    if options.trace {
        sim = sim.with_trace();
    }
    let kernel = |e: crate::kernel::SimError| ScenarioError::Runtime(e.to_string());
    let cis = sim
        .register_entity(Actor::Cis(CisRegistry::new()))
        .map_err(kernel)?;
    let mut datacenters = Vec::with_capacity(scenario.datacenters.len());
    for dc in scenario.datacenters {
        let dc = Datacenter::new(dc, cis).map_err(fault)?;
        datacenters.push(
            sim.register_entity(Actor::Datacenter(Box::new(dc)))
                .map_err(kernel)?,
        );
    }
    let broker = Broker::new(scenario.broker_plan, cis).map_err(|e| match e {
        EntityFault::InvalidPlan(p) => ScenarioError::Validation {
            path: format!("broker.{}", p.path),
            message: p.message,
        },
        other => fault(other),
    })?;
    let broker = sim
        .register_entity(Actor::Broker(Box::new(broker)))
        .map_err(kernel)?;
    Ok(SimulationModel {
        sim,
        cis,
        datacenters,
        broker,
    })
}

/// Builds and runs `scenario` to completion.
pub fn run_scenario(scenario: &Scenario, options: RunOptions) -> Result<RunOutcome, ScenarioError> {
    let SimulationModel { mut sim, .. } = build_simulation(scenario.clone(), options)?;
    let end_time = sim.run().map_err(|e| match e {
        RunError::Fault { fault: f, .. } => fault(f),
        RunError::Kernel(k) => ScenarioError::Runtime(k.to_string()),
    })?;
    let trace = sim.take_trace();
    let dispatched = sim.dispatch_counts().clone();

    let mut records = Vec::new();
    let mut ledger = CostLedger::default();
    let mut busy_hosts = BTreeMap::new();
    for actor in sim.into_entities() {
        match actor {
            Actor::Datacenter(dc) => {
                busy_hosts.insert(dc.dc_id(), dc.busy_hosts());
                ledger.datacenters.insert(dc.dc_id(), dc.ledger().clone());
            }
            Actor::Broker(broker) => {
                if !broker.is_finished() {
                    return Err(ScenarioError::Runtime(
                        "event queue drained before every task resolved".into(),
                    ));
                }
                records = broker.into_records();
            }
            Actor::Cis(_) => {}
        }
    }
    records.sort_by_key(|r| r.task_id);
    Ok(RunOutcome {
        records,
        ledger,
        trace,
        end_time,
        dispatched,
        busy_hosts,
    })
}

/// Runs one broker plan against `datacenters` and returns its completion
/// records.
pub fn broker_run(
    plan: BrokerPlan,
    datacenters: Vec<DatacenterCharacteristics>,
) -> Result<Vec<CompletionRecord>, ScenarioError> {
    let scenario = Scenario {
        description: String::new(),
        seed: None,
        datacenters,
        broker_plan: plan,
    };
    Ok(run_scenario(&scenario, RunOptions::default())?.records)
}
