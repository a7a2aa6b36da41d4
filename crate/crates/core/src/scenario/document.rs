//! JSON scenario documents.
//!
//! Hosts, VMs and tasks may be written as templates with a `count`; hosts get
//! sequential ids per datacenter, VMs and tasks get ids `id, id+1, ...`.
//! The published schema lives in `schema/scenario.schema.json`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioError};
use crate::accounting::Prices;
use crate::entities::{Binding, BrokerPlan, TaskGroup};
use crate::kernel::SimTime;
use crate::model::{DatacenterCharacteristics, HostSpec, SharingPolicy, TaskUnit, VmSpec};

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

fn is_zero_u64(v: &u64) -> bool {
    *v == 0
}

fn is_zero_f64(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    datacenters: Vec<DatacenterDoc>,
    #[serde(default)]
    broker: BrokerDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatacenterDoc {
    id: u32,
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    cost_per_cpu_sec: f64,
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    cost_per_ram_mb: f64,
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    cost_per_storage_mb: f64,
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    cost_per_byte: f64,
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    msg_latency_sec: f64,
    hosts: Vec<HostDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HostDoc {
    #[serde(default = "one", skip_serializing_if = "is_one")]
    count: u32,
    cores: u32,
    mips_per_core: f64,
    ram_mb: u64,
    storage_mb: u64,
    vm_policy: SharingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BrokerDoc {
    #[serde(default = "yes")]
    destroy_on_completion: bool,
    #[serde(default)]
    vms: Vec<VmDoc>,
    #[serde(default)]
    task_groups: Vec<GroupDoc>,
}

impl Default for BrokerDoc {
    fn default() -> Self {
        Self {
            destroy_on_completion: true,
            vms: Vec::new(),
            task_groups: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VmDoc {
    id: u32,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    count: u32,
    cores: u32,
    mips_per_core: f64,
    ram_mb: u64,
    storage_mb: u64,
    task_policy: SharingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    submit_time: f64,
    #[serde(default)]
    binding: BindingDoc,
    tasks: Vec<TaskDoc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BindingDoc {
    #[default]
    RoundRobin,
    Explicit(BTreeMap<u32, u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskDoc {
    id: u32,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    count: u32,
    length_mi: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    cores: u32,
    #[serde(default, skip_serializing_if = "is_zero_u64")]
    bytes_in: u64,
    #[serde(default, skip_serializing_if = "is_zero_u64")]
    bytes_out: u64,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("must be a positive number, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(
            path,
            format!("must be a non-negative number, got {v}"),
        ))
    }
}

fn nonzero<T: PartialEq + Default + std::fmt::Display>(
    path: &str,
    v: T,
) -> Result<(), ScenarioError> {
    if v != T::default() {
        Ok(())
    } else {
        Err(invalid(path, "must be > 0"))
    }
}

fn id_range(path: &str, id: u32, count: u32) -> Result<std::ops::Range<u32>, ScenarioError> {
    nonzero(&format!("{path}.count"), count)?;
    let end = id
        .checked_add(count)
        .ok_or_else(|| invalid(format!("{path}.count"), "id range overflows"))?;
    Ok(id..end)
}

/// Parses and validates a scenario document, expanding templates.
pub fn parse_scenario(document: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Schema {
            path: if path.is_empty() { "$".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    expand(doc)
}

fn expand(doc: ScenarioDoc) -> Result<Scenario, ScenarioError> {
    if doc.datacenters.is_empty() {
        return Err(invalid(
            "datacenters",
            "at least one datacenter is required",
        ));
    }
    let mut dc_ids = BTreeSet::new();
    let mut datacenters = Vec::with_capacity(doc.datacenters.len());
    for (d, dc) in doc.datacenters.iter().enumerate() {
        let path = format!("datacenters[{d}]");
        if !dc_ids.insert(dc.id) {
            return Err(invalid(
                format!("{path}.id"),
                format!("duplicate datacenter id {}", dc.id),
            ));
        }
        for (name, v) in [
            ("cost_per_cpu_sec", dc.cost_per_cpu_sec),
            ("cost_per_ram_mb", dc.cost_per_ram_mb),
            ("cost_per_storage_mb", dc.cost_per_storage_mb),
            ("cost_per_byte", dc.cost_per_byte),
            ("msg_latency_sec", dc.msg_latency_sec),
        ] {
            non_negative(&format!("{path}.{name}"), v)?;
        }
        if dc.hosts.is_empty() {
            return Err(invalid(
                format!("{path}.hosts"),
                "at least one host is required",
            ));
        }
        let mut total: u64 = 0;
        for (h, host) in dc.hosts.iter().enumerate() {
            let hpath = format!("{path}.hosts[{h}]");
            nonzero(&format!("{hpath}.count"), host.count)?;
            nonzero(&format!("{hpath}.cores"), host.cores)?;
            positive(&format!("{hpath}.mips_per_core"), host.mips_per_core)?;
            nonzero(&format!("{hpath}.ram_mb"), host.ram_mb)?;
            nonzero(&format!("{hpath}.storage_mb"), host.storage_mb)?;
            total += host.count as u64;
        }
        if total > u32::MAX as u64 {
            return Err(invalid(format!("{path}.hosts"), "too many hosts"));
        }
        let mut hosts = Vec::with_capacity(total as usize);
        for host in &dc.hosts {
            for _ in 0..host.count {
                hosts.push(HostSpec {
                    host_id: hosts.len() as u32,
                    cores: host.cores,
                    mips_per_core: host.mips_per_core,
                    ram_mb: host.ram_mb,
                    storage_mb: host.storage_mb,
                    vm_policy: host.vm_policy,
                });
            }
        }
        datacenters.push(DatacenterCharacteristics {
            dc_id: dc.id,
            hosts,
            prices: Prices {
                cost_per_cpu_sec: dc.cost_per_cpu_sec,
                cost_per_ram_mb: dc.cost_per_ram_mb,
                cost_per_storage_mb: dc.cost_per_storage_mb,
                cost_per_byte: dc.cost_per_byte,
            },
            msg_latency_sec: dc.msg_latency_sec,
        });
    }

    let broker = &doc.broker;
    let mut vm_ids = BTreeSet::new();
    let mut vm_requests = Vec::new();
    for (v, vm) in broker.vms.iter().enumerate() {
        let path = format!("broker.vms[{v}]");
        nonzero(&format!("{path}.cores"), vm.cores)?;
        positive(&format!("{path}.mips_per_core"), vm.mips_per_core)?;
        nonzero(&format!("{path}.ram_mb"), vm.ram_mb)?;
        nonzero(&format!("{path}.storage_mb"), vm.storage_mb)?;
        for vm_id in id_range(&path, vm.id, vm.count)? {
            if !vm_ids.insert(vm_id) {
                return Err(invalid(
                    format!("{path}.id"),
                    format!("duplicate vm id {vm_id}"),
                ));
            }
            vm_requests.push(VmSpec {
                vm_id,
                cores: vm.cores,
                mips_per_core: vm.mips_per_core,
                ram_mb: vm.ram_mb,
                storage_mb: vm.storage_mb,
                task_policy: vm.task_policy,
            });
        }
    }

    let mut task_ids = BTreeSet::new();
    let mut last_submit = 0.0;
    let mut task_groups = Vec::with_capacity(broker.task_groups.len());
    for (g, group) in broker.task_groups.iter().enumerate() {
        let gpath = format!("broker.task_groups[{g}]");
        non_negative(&format!("{gpath}.submit_time"), group.submit_time)?;
        if group.submit_time < last_submit {
            return Err(invalid(
                format!("{gpath}.submit_time"),
                "submit times must be non-decreasing",
            ));
        }
        last_submit = group.submit_time;
        let mut tasks = Vec::new();
        for (t, task) in group.tasks.iter().enumerate() {
            let tpath = format!("{gpath}.tasks[{t}]");
            positive(&format!("{tpath}.length_mi"), task.length_mi)?;
            nonzero(&format!("{tpath}.cores"), task.cores)?;
            for task_id in id_range(&tpath, task.id, task.count)? {
                if !task_ids.insert(task_id) {
                    return Err(invalid(
                        format!("{tpath}.id"),
                        format!("duplicate task id {task_id}"),
                    ));
                }
                tasks.push(
                    TaskUnit::new(task_id, task.length_mi)
                        .with_cores(task.cores)
                        .with_transfer(task.bytes_in, task.bytes_out),
                );
            }
        }
        let binding = match &group.binding {
            BindingDoc::RoundRobin => {
                if !tasks.is_empty() && vm_requests.is_empty() {
                    return Err(invalid(
                        format!("{gpath}.binding"),
                        "round-robin binding needs at least one vm",
                    ));
                }
                Binding::RoundRobin
            }
            BindingDoc::Explicit(map) => {
                let in_group: BTreeSet<u32> = tasks.iter().map(|t| t.task_id).collect();
                for (task_id, vm_id) in map {
                    let path = format!("{gpath}.binding.explicit.{task_id}");
                    if !in_group.contains(task_id) {
                        return Err(invalid(path, "binding for a task not in this group"));
                    }
                    if !vm_ids.contains(vm_id) {
                        return Err(invalid(path, format!("bound to undeclared vm {vm_id}")));
                    }
                }
                if let Some(t) = tasks.iter().find(|t| !map.contains_key(&t.task_id)) {
                    return Err(invalid(
                        format!("{gpath}.binding.explicit"),
                        format!("task {} has no vm binding", t.task_id),
                    ));
                }
                Binding::Explicit(map.clone())
            }
        };
        task_groups.push(TaskGroup {
            submit_time: SimTime::new(group.submit_time),
            tasks,
            binding,
        });
    }

    let broker_plan = BrokerPlan {
        vm_requests,
        task_groups,
        destroy_on_completion: broker.destroy_on_completion,
    };
    broker_plan
        .validate()
        .map_err(|e| invalid(format!("broker.{}", e.path), e.message))?;

    Ok(Scenario {
        description: doc.description,
        seed: doc.seed,
        datacenters,
        broker_plan,
    })
}

/// Canonical document for `scenario`: runs of identical hosts, VMs and tasks
/// with consecutive ids are folded into templates.
pub fn emit_scenario(scenario: &Scenario) -> String {
    let doc = ScenarioDoc {
        description: scenario.description.clone(),
        seed: scenario.seed,
        datacenters: scenario.datacenters.iter().map(emit_dc).collect(),
        broker: BrokerDoc {
            destroy_on_completion: scenario.broker_plan.destroy_on_completion,
            vms: fold(&scenario.broker_plan.vm_requests, |vm| VmDoc {
                id: vm.vm_id,
                count: 1,
                cores: vm.cores,
                mips_per_core: vm.mips_per_core,
                ram_mb: vm.ram_mb,
                storage_mb: vm.storage_mb,
                task_policy: vm.task_policy,
            }),
            task_groups: scenario
                .broker_plan
                .task_groups
                .iter()
                .map(|g| GroupDoc {
                    submit_time: g.submit_time.seconds(),
                    binding: match &g.binding {
                        Binding::RoundRobin => BindingDoc::RoundRobin,
                        Binding::Explicit(map) => BindingDoc::Explicit(map.clone()),
                    },
                    tasks: fold(&g.tasks, |t| TaskDoc {
                        id: t.task_id,
                        count: 1,
                        length_mi: t.length_mi,
                        cores: t.cores_required,
                        bytes_in: t.bytes_in,
                        bytes_out: t.bytes_out,
                    }),
                })
                .collect(),
        },
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("scenario documents always serialize");
    out.push('\n');
    out
}

fn emit_dc(dc: &DatacenterCharacteristics) -> DatacenterDoc {
    let mut hosts: Vec<HostDoc> = Vec::new();
    for h in &dc.hosts {
        let doc = HostDoc {
            count: 1,
            cores: h.cores,
            mips_per_core: h.mips_per_core,
            ram_mb: h.ram_mb,
            storage_mb: h.storage_mb,
            vm_policy: h.vm_policy,
        };
        match hosts.last_mut() {
            Some(last)
                if HostDoc {
                    count: 1,
                    ..last.clone()
                } == doc =>
            {
                last.count += 1
            }
            _ => hosts.push(doc),
        }
    }
    DatacenterDoc {
        id: dc.dc_id,
        cost_per_cpu_sec: dc.prices.cost_per_cpu_sec,
        cost_per_ram_mb: dc.prices.cost_per_ram_mb,
        cost_per_storage_mb: dc.prices.cost_per_storage_mb,
        cost_per_byte: dc.prices.cost_per_byte,
        msg_latency_sec: dc.msg_latency_sec,
        hosts,
    }
}

/// Entries with an `id` and a `count` that can absorb their successor.
trait Template: Clone + PartialEq {
    fn id(&self) -> u32;
    fn set_id(&mut self, id: u32);
    fn count(&self) -> u32;
    fn set_count(&mut self, count: u32);
}

macro_rules! template {
    ($t:ty) => {
        impl Template for $t {
            fn id(&self) -> u32 {
                self.id
            }
            fn set_id(&mut self, id: u32) {
                self.id = id;
            }
            fn count(&self) -> u32 {
                self.count
            }
            fn set_count(&mut self, count: u32) {
                self.count = count;
            }
        }
    };
}

template!(VmDoc);
template!(TaskDoc);

fn fold<T, D: Template>(items: &[T], to_doc: impl Fn(&T) -> D) -> Vec<D> {
    let mut out: Vec<D> = Vec::new();
    for item in items {
        let doc = to_doc(item);
        if let Some(last) = out.last_mut() {
            // Same fields apart from id, and the id directly follows the run.
            let follows = last.id().checked_add(last.count()) == Some(doc.id());
            let mut same = doc.clone();
            same.set_id(last.id());
            same.set_count(last.count());
            if follows && same == *last {
                last.set_count(last.count() + 1);
                continue;
            }
        }
        out.push(doc);
    }
    out
}
