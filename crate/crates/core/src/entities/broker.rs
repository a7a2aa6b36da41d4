use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::message::{AckOutcome, CisCandidate, Message, TaskReport, Timer, VmRequirement};
use super::EntityFault;
use crate::kernel::{Context, EntityId, Event, Payload, SimTime};
use crate::model::{TaskUnit, VmSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Binding {
    /// Task `i` of the plan (counting round-robin tasks only) goes to
    /// `vm_requests[i % n]`.
    RoundRobin,
    /// task_id → vm_id.
    Explicit(BTreeMap<u32, u32>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskGroup {
    pub submit_time: SimTime,
    pub tasks: Vec<TaskUnit>,
    pub binding: Binding,
}

/// What a broker does on behalf of its user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrokerPlan {
    pub vm_requests: Vec<VmSpec>,
    pub task_groups: Vec<TaskGroup>,
    pub destroy_on_completion: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct PlanError {
    pub path: String,
    pub message: String,
}

fn plan_err(path: impl Into<String>, message: impl Into<String>) -> PlanError {
    PlanError {
        path: path.into(),
        message: message.into(),
    }
}

impl BrokerPlan {
    pub fn empty() -> Self {
        Self {
            vm_requests: Vec::new(),
            task_groups: Vec::new(),
            destroy_on_completion: true,
        }
    }

    pub fn task_count(&self) -> usize {
        self.task_groups.iter().map(|g| g.tasks.len()).sum()
    }

    /// Structural validation of the plan.
    pub fn validate(&self) -> Result<(), PlanError> {
        let mut vm_ids = BTreeSet::new();
        for (i, vm) in self.vm_requests.iter().enumerate() {
            let path = format!("vm_requests[{i}]");
            if !vm_ids.insert(vm.vm_id) {
                return Err(plan_err(path, format!("duplicate vm id {}", vm.vm_id)));
            }
            if vm.cores == 0 {
                return Err(plan_err(path + ".cores", "must be > 0"));
            }
            if !(vm.mips_per_core.is_finite() && vm.mips_per_core > 0.0) {
                return Err(plan_err(
                    path + ".mips_per_core",
                    "must be a positive number",
                ));
            }
            if vm.ram_mb == 0 {
                return Err(plan_err(path + ".ram_mb", "must be > 0"));
            }
            if vm.storage_mb == 0 {
                return Err(plan_err(path + ".storage_mb", "must be > 0"));
            }
        }
        let mut task_ids = BTreeSet::new();
        let mut last_submit = SimTime::ZERO;
        for (g, group) in self.task_groups.iter().enumerate() {
            let gpath = format!("task_groups[{g}]");
            if group.submit_time < last_submit {
                return Err(plan_err(
                    gpath + ".submit_time",
                    "submit times must be non-decreasing",
                ));
            }
            last_submit = group.submit_time;
            for (t, task) in group.tasks.iter().enumerate() {
                let tpath = format!("{gpath}.tasks[{t}]");
                if !task_ids.insert(task.task_id) {
                    return Err(plan_err(
                        tpath,
                        format!("duplicate task id {}", task.task_id),
                    ));
                }
                if !(task.length_mi.is_finite() && task.length_mi > 0.0) {
                    return Err(plan_err(tpath + ".length_mi", "must be a positive number"));
                }
                if task.cores_required == 0 {
                    return Err(plan_err(tpath + ".cores_required", "must be > 0"));
                }
            }
            match &group.binding {
                Binding::RoundRobin => {
                    if !group.tasks.is_empty() && self.vm_requests.is_empty() {
                        return Err(plan_err(
                            gpath + ".binding",
                            "round-robin binding needs at least one vm",
                        ));
                    }
                }
                Binding::Explicit(map) => {
                    for task in &group.tasks {
                        let Some(vm_id) = map.get(&task.task_id) else {
                            return Err(plan_err(
                                format!("{gpath}.binding.{}", task.task_id),
                                "task has no vm binding",
                            ));
                        };
                        if !vm_ids.contains(vm_id) {
                            return Err(plan_err(
                                format!("{gpath}.binding.{}", task.task_id),
                                format!("bound to undeclared vm {vm_id}"),
                            ));
                        }
                    }
                    let in_group: BTreeSet<u32> = group.tasks.iter().map(|t| t.task_id).collect();
                    if let Some(stray) = map.keys().find(|k| !in_group.contains(k)) {
                        return Err(plan_err(
                            format!("{gpath}.binding.{stray}"),
                            "binding for a task not in this group",
                        ));
                    }
                }
            }
        }
        let bindings = self.bindings();
        for (g, group) in self.task_groups.iter().enumerate() {
            for (t, (task, vm_id)) in group.tasks.iter().zip(&bindings[g]).enumerate() {
                let vm = self
                    .vm_requests
                    .iter()
                    .find(|v| v.vm_id == *vm_id)
                    .expect("bindings reference declared vms");
                if task.cores_required > vm.cores {
                    return Err(plan_err(
                        format!("task_groups[{g}].tasks[{t}].cores_required"),
                        format!(
                            "needs {} cores but vm {} has {}",
                            task.cores_required, vm_id, vm.cores
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// VM id for every task, grouped like `task_groups`.
    pub fn bindings(&self) -> Vec<Vec<u32>> {
        let mut rr = 0usize;
        self.task_groups
            .iter()
            .map(|group| {
                group
                    .tasks
                    .iter()
                    .map(|task| match &group.binding {
                        Binding::RoundRobin => {
                            let vm = self.vm_requests[rr % self.vm_requests.len()].vm_id;
                            rr += 1;
                            vm
                        }
                        Binding::Explicit(map) => map[&task.task_id],
                    })
                    .collect()
            })
            .collect()
    }

    /// Component-wise maximum over all requested VMs.
    pub fn requirement(&self) -> VmRequirement {
        self.vm_requests
            .iter()
            .fold(VmRequirement::default(), |acc, vm| VmRequirement {
                cores: acc.cores.max(vm.cores),
                ram_mb: acc.ram_mb.max(vm.ram_mb),
                storage_mb: acc.storage_mb.max(vm.storage_mb),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskOutcome {
    Finished,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub task_id: u32,
    pub vm_id: u32,
    pub host_id: Option<u32>,
    pub dc_id: Option<u32>,
    pub submit_t: SimTime,
    pub start_t: SimTime,
    pub finish_t: SimTime,
    pub cpu_seconds: f64,
    pub cost: f64,
    pub outcome: TaskOutcome,
}

impl CompletionRecord {
    fn from_report(report: TaskReport) -> Self {
        let task = report.task;
        let submit_t = task.submit_t.unwrap_or_default();
        let start_t = task.start_t.unwrap_or(submit_t);
        let finish_t = task.finish_t.unwrap_or(start_t);
        Self {
            task_id: task.task_id,
            vm_id: report.vm_id,
            host_id: report.host_id,
            dc_id: Some(report.dc_id),
            submit_t,
            start_t,
            finish_t,
            cpu_seconds: if report.success {
                finish_t.seconds() - start_t.seconds()
            } else {
                0.0
            },
            cost: report.cost,
            outcome: if report.success {
                TaskOutcome::Finished
            } else {
                TaskOutcome::Failed
            },
        }
    }

    fn failed_unsubmitted(task: &TaskUnit, vm_id: u32, dc_id: Option<u32>, now: SimTime) -> Self {
        Self {
            task_id: task.task_id,
            vm_id,
            host_id: None,
            dc_id,
            submit_t: now,
            start_t: now,
            finish_t: now,
            cpu_seconds: 0.0,
            cost: 0.0,
            outcome: TaskOutcome::Failed,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct BrokerVm {
    ack: Option<AckOutcome>,
    outstanding: usize,
    destroyed: bool,
}

impl BrokerVm {
    fn placed(&self) -> bool {
        matches!(self.ack, Some(AckOutcome::Placed { .. }))
    }
}

/// Acts for one user: discovers a provider through the registry, creates the
/// plan's VMs there, submits task groups on schedule and collects results.
#[derive(Debug)]
pub struct Broker {
    plan: BrokerPlan,
    bindings: Vec<Vec<u32>>,
    cis: EntityId,
    target: Option<CisCandidate>,
    vms: BTreeMap<u32, BrokerVm>,
    acks_pending: usize,
    records: Vec<CompletionRecord>,
}

impl Broker {
    pub fn new(plan: BrokerPlan, cis: EntityId) -> Result<Self, EntityFault> {
        plan.validate().map_err(EntityFault::InvalidPlan)?;
        let bindings = plan.bindings();
        let mut vms: BTreeMap<u32, BrokerVm> = plan
            .vm_requests
            .iter()
            .map(|vm| (vm.vm_id, BrokerVm::default()))
            .collect();
        for vm_id in bindings.iter().flatten() {
            vms.get_mut(vm_id).expect("validated binding").outstanding += 1;
        }
        Ok(Self {
            plan,
            bindings,
            cis,
            target: None,
            vms,
            acks_pending: 0,
            records: Vec::new(),
        })
    }

    pub fn records(&self) -> &[CompletionRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<CompletionRecord> {
        self.records
    }

    pub fn target(&self) -> Option<&CisCandidate> {
        self.target.as_ref()
    }

    /// All tasks resolved and every VM acknowledged.
    pub fn is_finished(&self) -> bool {
        self.acks_pending == 0 && self.records.len() == self.plan.task_count()
    }

    pub(super) fn start(&mut self, ctx: &mut Context<'_, Message>) -> Result<(), EntityFault> {
        if self.plan.vm_requests.is_empty() {
            return Ok(());
        }
        ctx.send(self.cis, 0.0, Message::QueryCis(self.plan.requirement()))?;
        Ok(())
    }

    pub(super) fn handle(
        &mut self,
        event: Event<Message>,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        match event.payload {
            Message::CisReply(candidates) => {
                let target = *candidates.first().ok_or(EntityFault::NoSuitableProvider)?;
                self.target = Some(target);
                self.acks_pending = self.plan.vm_requests.len();
                for vm in &self.plan.vm_requests {
                    ctx.send(
                        target.entity,
                        target.msg_latency_sec,
                        Message::CreateVm(vm.clone()),
                    )?;
                }
                Ok(())
            }
            Message::VmAck { vm_id, outcome, .. } => {
                let vm = self
                    .vms
                    .get_mut(&vm_id)
                    .ok_or(EntityFault::UnexpectedMessage {
                        entity: "broker",
                        tag: crate::kernel::Tag::VmAck,
                    })?;
                vm.ack = Some(outcome);
                self.acks_pending -= 1;
                if self.acks_pending == 0 {
                    self.on_all_acked(ctx)?;
                }
                Ok(())
            }
            Message::InternalUpdate(Timer::TaskGroupDue(k)) => self.submit_group(k, ctx),
            Message::TaskDone(report) => {
                let vm_id = report.vm_id;
                self.records.push(CompletionRecord::from_report(report));
                self.task_resolved(vm_id, ctx)
            }
            other => Err(EntityFault::UnexpectedMessage {
                entity: "broker",
                tag: other.tag(),
            }),
        }
    }

    fn on_all_acked(&mut self, ctx: &mut Context<'_, Message>) -> Result<(), EntityFault> {
        if self.plan.destroy_on_completion {
            let idle: Vec<u32> = self
                .vms
                .iter()
                .filter(|(_, vm)| vm.placed() && vm.outstanding == 0)
                .map(|(&id, _)| id)
                .collect();
            for vm_id in idle {
                self.destroy(vm_id, ctx)?;
            }
        }
        let now = ctx.now();
        for (k, group) in self.plan.task_groups.iter().enumerate() {
            ctx.schedule_self(
                group.submit_time.max(now),
                Message::InternalUpdate(Timer::TaskGroupDue(k)),
            )?;
        }
        Ok(())
    }

    fn submit_group(
        &mut self,
        k: usize,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        let target = self
            .target
            .expect("groups are scheduled after provider selection");
        let now = ctx.now();
        let group = &self.plan.task_groups[k];
        let mut failed = Vec::new();
        for (task, &vm_id) in group.tasks.iter().zip(&self.bindings[k]) {
            if self.vms[&vm_id].placed() {
                ctx.send(
                    target.entity,
                    target.msg_latency_sec,
                    Message::SubmitTask {
                        vm_id,
                        task: task.clone(),
                    },
                )?;
            } else {
                self.records.push(CompletionRecord::failed_unsubmitted(
                    task,
                    vm_id,
                    Some(target.dc_id),
                    now,
                ));
                failed.push(vm_id);
            }
        }
        for vm_id in failed {
            self.task_resolved(vm_id, ctx)?;
        }
        Ok(())
    }

    fn task_resolved(
        &mut self,
        vm_id: u32,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        let vm = self
            .vms
            .get_mut(&vm_id)
            .expect("records reference plan vms");
        vm.outstanding -= 1;
        if vm.outstanding == 0 && self.plan.destroy_on_completion && vm.placed() {
            self.destroy(vm_id, ctx)?;
        }
        Ok(())
    }

    fn destroy(&mut self, vm_id: u32, ctx: &mut Context<'_, Message>) -> Result<(), EntityFault> {
        let target = self
            .target
            .expect("vms exist only after provider selection");
        let vm = self.vms.get_mut(&vm_id).expect("known vm");
        if vm.destroyed {
            return Ok(());
        }
        vm.destroyed = true;
        ctx.send(
            target.entity,
            target.msg_latency_sec,
            Message::DestroyVm { vm_id },
        )?;
        Ok(())
    }
}
