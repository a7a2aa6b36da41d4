use std::collections::BTreeMap;

use super::message::{AckOutcome, DatacenterSummary, HostShape, Message, TaskReport, Timer};
use super::EntityFault;
use crate::accounting::{ChargingPolicy, DatacenterLedger, PayAsYouGo, Prices};
use crate::kernel::{Context, EntityId, Event, Payload, SimTime};
use crate::model::{
    place_vm, DatacenterCharacteristics, HostState, ModelError, Placement, TaskStatus, TaskUnit,
    VmSpec, VmStatus,
};
use crate::scheduling::update_vms_processing;

/// A set of hosts behind one provisioner, exchanging messages with brokers.
///
/// Host-level processing is only touched for hosts that currently have
/// resident VMs; a single pending completion event is kept for the whole
/// datacenter and superseded by bumping `revision`.
#[derive(Debug)]
pub struct Datacenter {
    dc_id: u32,
    prices: Prices,
    msg_latency_sec: f64,
    hosts: Vec<HostState>,
    cis: EntityId,
    vm_hosts: BTreeMap<u32, usize>,
    vm_owner: BTreeMap<u32, EntityId>,
    /// Hosts with resident VMs and their next projected completion.
    occupied: BTreeMap<usize, Option<SimTime>>,
    revision: u64,
    scheduled: Option<SimTime>,
    ledger: DatacenterLedger,
    policy: Box<dyn ChargingPolicy>,
}

impl Datacenter {
    pub fn new(
        characteristics: DatacenterCharacteristics,
        cis: EntityId,
    ) -> Result<Self, EntityFault> {
        Self::with_policy(characteristics, cis, Box::new(PayAsYouGo))
    }

    pub fn with_policy(
        characteristics: DatacenterCharacteristics,
        cis: EntityId,
        policy: Box<dyn ChargingPolicy>,
    ) -> Result<Self, EntityFault> {
        let DatacenterCharacteristics {
            dc_id,
            hosts,
            prices,
            msg_latency_sec,
        } = characteristics;
        if hosts.is_empty() {
            return Err(EntityFault::InvalidInventory(format!(
                "datacenter {dc_id} has no hosts"
            )));
        }
        let mut states = Vec::with_capacity(hosts.len());
        for (idx, spec) in hosts.into_iter().enumerate() {
            if spec.host_id as usize != idx {
                return Err(EntityFault::InvalidInventory(format!(
                    "datacenter {dc_id}: host at position {idx} has id {}",
                    spec.host_id
                )));
            }
            states.push(HostState::new(spec));
        }
        Ok(Self {
            dc_id,
            prices,
            msg_latency_sec,
            hosts: states,
            cis,
            vm_hosts: BTreeMap::new(),
            vm_owner: BTreeMap::new(),
            occupied: BTreeMap::new(),
            revision: 0,
            scheduled: None,
            ledger: DatacenterLedger::new(dc_id),
            policy,
        })
    }

    pub fn dc_id(&self) -> u32 {
        self.dc_id
    }

    pub fn hosts(&self) -> &[HostState] {
        &self.hosts
    }

    pub fn ledger(&self) -> &DatacenterLedger {
        &self.ledger
    }

    /// Ids of hosts that still hold VMs or have resources debited.
    pub fn busy_hosts(&self) -> Vec<u32> {
        self.hosts
            .iter()
            .filter(|h| !h.is_at_spec())
            .map(|h| h.spec.host_id)
            .collect()
    }

    pub(super) fn start(&mut self, ctx: &mut Context<'_, Message>) -> Result<(), EntityFault> {
        let summary = DatacenterSummary::new(
            self.dc_id,
            self.hosts.iter().map(|h| HostShape {
                cores: h.spec.cores,
                ram_mb: h.spec.ram_mb,
                storage_mb: h.spec.storage_mb,
            }),
            self.msg_latency_sec,
        );
        ctx.send(self.cis, 0.0, Message::RegisterDatacenter(summary))?;
        Ok(())
    }

    pub(super) fn handle(
        &mut self,
        event: Event<Message>,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        let source = event.source;
        match event.payload {
            Message::CreateVm(spec) => self.on_create(spec, source, ctx)?,
            Message::SubmitTask { vm_id, task } => self.on_submit(vm_id, task, source, ctx)?,
            Message::InternalUpdate(Timer::Datacenter { revision }) => {
                if revision != self.revision {
                    return Ok(());
                }
                self.scheduled = None;
                let due: Vec<usize> = self.occupied.keys().copied().collect();
                for idx in due {
                    self.sync_host(idx, ctx)?;
                }
            }
            Message::DestroyVm { vm_id } => self.on_destroy(vm_id, ctx)?,
            other => {
                return Err(EntityFault::UnexpectedMessage {
                    entity: "datacenter",
                    tag: other.tag(),
                })
            }
        }
        self.reschedule(ctx)
    }

    fn on_create(
        &mut self,
        spec: VmSpec,
        owner: EntityId,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        let now = ctx.now();
        let vm_id = spec.vm_id;
        let outcome = match place_vm(&spec, &mut self.hosts, now) {
            Placement::Active { host_id } => {
                self.sync_host(host_id as usize, ctx)?;
                AckOutcome::Placed {
                    host_id,
                    queued: false,
                }
            }
            Placement::Queued { host_id } => AckOutcome::Placed {
                host_id,
                queued: true,
            },
            Placement::Rejected => AckOutcome::Failed,
        };
        if let AckOutcome::Placed { host_id, .. } = outcome {
            self.vm_hosts.insert(vm_id, host_id as usize);
            self.vm_owner.insert(vm_id, owner);
            self.ledger.vm(vm_id).creation_cost += self.policy.creation(&spec, &self.prices);
        }
        ctx.send(
            owner,
            self.msg_latency_sec,
            Message::VmAck {
                vm_id,
                dc_id: self.dc_id,
                outcome,
            },
        )?;
        Ok(())
    }

    fn on_submit(
        &mut self,
        vm_id: u32,
        mut task: TaskUnit,
        owner: EntityId,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        let now = ctx.now();
        task.submit_t = Some(now);
        task.status = TaskStatus::Submitted;
        let Some(&idx) = self.vm_hosts.get(&vm_id) else {
            return self.fail_task(task, vm_id, None, owner, ctx);
        };
        let host_id = self.hosts[idx].spec.host_id;
        let vm = self.hosts[idx].vm(vm_id).expect("vm index is consistent");
        if task.cores_required == 0 || task.cores_required > vm.spec.cores {
            return self.fail_task(task, vm_id, Some(host_id), owner, ctx);
        }
        let active = vm.status == VmStatus::Active;
        self.ledger.vm(vm_id).transfer_cost += self.policy.transfer(task.bytes_in, &self.prices);
        if active {
            // Bring the host to `now` first so the new task gets no
            // retroactive progress.
            self.sync_host(idx, ctx)?;
            self.hosts[idx]
                .vm_mut(vm_id)
                .expect("vm index is consistent")
                .enqueue(task, now);
            self.sync_host(idx, ctx)?;
        } else {
            self.hosts[idx]
                .vm_mut(vm_id)
                .expect("vm index is consistent")
                .enqueue(task, now);
        }
        Ok(())
    }

    fn on_destroy(
        &mut self,
        vm_id: u32,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        let now = ctx.now();
        let idx = *self
            .vm_hosts
            .get(&vm_id)
            .ok_or(ModelError::UnknownVm(vm_id))?;
        self.sync_host(idx, ctx)?;
        let (vm, _activated) = self.hosts[idx].destroy_vm(vm_id, now)?;
        self.vm_hosts.remove(&vm_id);
        let owner = self.vm_owner.remove(&vm_id).unwrap_or(ctx.me());
        let host_id = Some(self.hosts[idx].spec.host_id);
        for task in vm.running.into_iter().chain(vm.waiting) {
            self.fail_task(task, vm_id, host_id, owner, ctx)?;
        }
        self.sync_host(idx, ctx)
    }

    /// Updates one host to the current time, reports completed tasks and
    /// refreshes the host's entry in the occupancy map.
    fn sync_host(&mut self, idx: usize, ctx: &mut Context<'_, Message>) -> Result<(), EntityFault> {
        let now = ctx.now();
        let next = update_vms_processing(&mut self.hosts[idx], now)?;
        let host = &mut self.hosts[idx];
        let host_id = host.spec.host_id;
        let done: Vec<(u32, TaskUnit)> = host
            .resident
            .iter_mut()
            .flat_map(|vm| {
                let id = vm.vm_id();
                vm.drain_finished().into_iter().map(move |t| (id, t))
            })
            .collect();
        if host.resident.is_empty() {
            self.occupied.remove(&idx);
        } else {
            self.occupied.insert(idx, next);
        }
        for (vm_id, task) in done {
            let processing = self.policy.processing(task.cpu_seconds(), &self.prices)?;
            let out = self.policy.transfer(task.bytes_out, &self.prices);
            let charges = self.ledger.vm(vm_id);
            charges.processing_cost += processing;
            charges.transfer_cost += out;
            let cost = processing + out + self.policy.transfer(task.bytes_in, &self.prices);
            let owner = self.vm_owner.get(&vm_id).copied().unwrap_or(ctx.me());
            ctx.send(
                owner,
                self.msg_latency_sec,
                Message::TaskDone(TaskReport {
                    task,
                    vm_id,
                    host_id: Some(host_id),
                    dc_id: self.dc_id,
                    success: true,
                    cost,
                }),
            )?;
        }
        Ok(())
    }

    fn fail_task(
        &mut self,
        mut task: TaskUnit,
        vm_id: u32,
        host_id: Option<u32>,
        owner: EntityId,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        let now = ctx.now();
        task.status = TaskStatus::Failed;
        task.submit_t.get_or_insert(now);
        task.start_t.get_or_insert(now);
        task.finish_t = Some(now);
        ctx.send(
            owner,
            self.msg_latency_sec,
            Message::TaskDone(TaskReport {
                task,
                vm_id,
                host_id,
                dc_id: self.dc_id,
                success: false,
                cost: 0.0,
            }),
        )?;
        Ok(())
    }

    fn reschedule(&mut self, ctx: &mut Context<'_, Message>) -> Result<(), EntityFault> {
        let next = self.occupied.values().flatten().min().copied();
        if next != self.scheduled {
            self.revision += 1;
            self.scheduled = next;
            if let Some(at) = next {
                ctx.schedule_self(
                    at,
                    Message::InternalUpdate(Timer::Datacenter {
                        revision: self.revision,
                    }),
                )?;
            }
        }
        Ok(())
    }
}
