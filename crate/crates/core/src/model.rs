//! Hosts, virtual machines, task units and data-center characteristics, plus
//! the first-come-first-serve VM provisioner.
//!
//! Units: RAM and storage in megabytes, processing rates in MIPS (million
//! instructions per second) per core, task lengths in MI.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::Prices;
use crate::kernel::SimTime;

/// Slack allowed when comparing summed MIPS against a capacity.
pub const CAPACITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingPolicy {
    SpaceShared,
    TimeShared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HostSpec {
    pub host_id: u32,
    pub cores: u32,
    pub mips_per_core: f64,
    pub ram_mb: u64,
    pub storage_mb: u64,
    pub vm_policy: SharingPolicy,
}

impl HostSpec {
    pub fn capacity_mips(&self) -> f64 {
        self.cores as f64 * self.mips_per_core
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmSpec {
    pub vm_id: u32,
    pub cores: u32,
    pub mips_per_core: f64,
    pub ram_mb: u64,
    pub storage_mb: u64,
    pub task_policy: SharingPolicy,
}

impl VmSpec {
    /// Full requested capacity, `cores × mips_per_core`.
    pub fn demand_mips(&self) -> f64 {
        self.cores as f64 * self.mips_per_core
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VmStatus {
    Requested,
    Active,
    Queued,
    Destroyed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskStatus {
    Created,
    Submitted,
    Queued,
    Running,
    Finished,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskUnit {
    pub task_id: u32,
    pub length_mi: f64,
    pub cores_required: u32,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub status: TaskStatus,
    pub progress_mi: f64,
    pub submit_t: Option<SimTime>,
    pub start_t: Option<SimTime>,
    pub finish_t: Option<SimTime>,
}

impl TaskUnit {
    pub fn new(task_id: u32, length_mi: f64) -> Self {
        Self {
            task_id,
            length_mi,
            cores_required: 1,
            bytes_in: 0,
            bytes_out: 0,
            status: TaskStatus::Created,
            progress_mi: 0.0,
            submit_t: None,
            start_t: None,
            finish_t: None,
        }
    }

    pub fn with_cores(mut self, cores: u32) -> Self {
        self.cores_required = cores;
        self
    }

    pub fn with_transfer(mut self, bytes_in: u64, bytes_out: u64) -> Self {
        self.bytes_in = bytes_in;
        self.bytes_out = bytes_out;
        self
    }

    pub fn remaining_mi(&self) -> f64 {
        self.length_mi - self.progress_mi
    }

    /// Wall time spent running; zero until finished.
    pub fn cpu_seconds(&self) -> f64 {
        match (self.start_t, self.finish_t) {
            (Some(s), Some(f)) => f.seconds() - s.seconds(),
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VmState {
    pub spec: VmSpec,
    pub status: VmStatus,
    pub host_id: Option<u32>,
    /// Capacity in effect since `last_update`, total across cores.
    pub granted_mips: f64,
    pub running: Vec<TaskUnit>,
    pub waiting: VecDeque<TaskUnit>,
    /// Tasks completed since the owner last drained them.
    pub finished: Vec<TaskUnit>,
    pub last_update: SimTime,
}

impl VmState {
    pub fn new(spec: VmSpec) -> Self {
        Self {
            spec,
            status: VmStatus::Requested,
            host_id: None,
            granted_mips: 0.0,
            running: Vec::new(),
            waiting: VecDeque::new(),
            finished: Vec::new(),
            last_update: SimTime::ZERO,
        }
    }

    pub fn vm_id(&self) -> u32 {
        self.spec.vm_id
    }

    /// Queues a submitted task behind every task with an earlier
    /// `(submit_t, task_id)`.
    pub fn enqueue(&mut self, mut task: TaskUnit, now: SimTime) {
        task.submit_t.get_or_insert(now);
        task.status = TaskStatus::Queued;
        let key = (task.submit_t, task.task_id);
        let pos = self
            .waiting
            .iter()
            .position(|t| (t.submit_t, t.task_id) > key)
            .unwrap_or(self.waiting.len());
        self.waiting.insert(pos, task);
    }

    pub fn has_work(&self) -> bool {
        !self.running.is_empty() || !self.waiting.is_empty()
    }

    pub fn drain_finished(&mut self) -> Vec<TaskUnit> {
        std::mem::take(&mut self.finished)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown vm {0}")]
    UnknownVm(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HostState {
    pub spec: HostSpec,
    pub free_ram_mb: u64,
    pub free_storage_mb: u64,
    pub resident: Vec<VmState>,
    /// VMs admitted to this host but waiting for capacity, in arrival order.
    pub pending: VecDeque<VmState>,
    pub last_update: SimTime,
}

impl HostState {
    pub fn new(spec: HostSpec) -> Self {
        Self {
            free_ram_mb: spec.ram_mb,
            free_storage_mb: spec.storage_mb,
            spec,
            resident: Vec::new(),
            pending: VecDeque::new(),
            last_update: SimTime::ZERO,
        }
    }

    pub fn used_cores(&self) -> u32 {
        self.resident.iter().map(|vm| vm.spec.cores).sum()
    }

    pub fn free_cores(&self) -> u32 {
        self.spec.cores.saturating_sub(self.used_cores())
    }

    /// Per-VM allocated capacity in MIPS.
    pub fn core_ledger(&self) -> Vec<(u32, f64)> {
        self.resident
            .iter()
            .map(|vm| (vm.vm_id(), vm.granted_mips))
            .collect()
    }

    fn cores_eligible(&self, vm: &VmSpec, free_cores: u32) -> bool {
        match self.spec.vm_policy {
            SharingPolicy::SpaceShared => {
                vm.cores <= free_cores && vm.mips_per_core <= self.spec.mips_per_core
            }
            SharingPolicy::TimeShared => true,
        }
    }

    /// Whether `vm` can be activated here right now.
    pub fn fits_now(&self, vm: &VmSpec) -> bool {
        self.free_ram_mb >= vm.ram_mb
            && self.free_storage_mb >= vm.storage_mb
            && self.cores_eligible(vm, self.free_cores())
    }

    /// Whether `vm` could be activated on this host once it is empty.
    pub fn could_ever_fit(&self, vm: &VmSpec) -> bool {
        self.spec.ram_mb >= vm.ram_mb
            && self.spec.storage_mb >= vm.storage_mb
            && self.cores_eligible(vm, self.spec.cores)
    }

    /// Debits RAM/storage and makes `vm` resident and active at `now`.
    pub fn attach(&mut self, mut vm: VmState, now: SimTime) {
        debug_assert!(self.fits_now(&vm.spec));
        self.free_ram_mb -= vm.spec.ram_mb;
        self.free_storage_mb -= vm.spec.storage_mb;
        vm.status = VmStatus::Active;
        vm.host_id = Some(self.spec.host_id);
        vm.granted_mips = 0.0;
        vm.last_update = now;
        self.resident.push(vm);
    }

    pub fn push_pending(&mut self, mut vm: VmState) {
        vm.status = VmStatus::Queued;
        vm.host_id = Some(self.spec.host_id);
        self.pending.push_back(vm);
    }

    pub fn vm(&self, vm_id: u32) -> Option<&VmState> {
        self.resident
            .iter()
            .chain(self.pending.iter())
            .find(|vm| vm.vm_id() == vm_id)
    }

    pub fn vm_mut(&mut self, vm_id: u32) -> Option<&mut VmState> {
        self.resident
            .iter_mut()
            .chain(self.pending.iter_mut())
            .find(|vm| vm.vm_id() == vm_id)
    }

    /// Removes `vm_id` from this host, credits its resources back and
    /// activates queued VMs from the head of the pending queue while they
    /// fit. Returns the destroyed VM and the ids of activated VMs.
    pub fn destroy_vm(
        &mut self,
        vm_id: u32,
        now: SimTime,
    ) -> Result<(VmState, Vec<u32>), ModelError> {
        let mut vm = if let Some(pos) = self.resident.iter().position(|v| v.vm_id() == vm_id) {
            let vm = self.resident.remove(pos);
            self.free_ram_mb += vm.spec.ram_mb;
            self.free_storage_mb += vm.spec.storage_mb;
            vm
        } else if let Some(pos) = self.pending.iter().position(|v| v.vm_id() == vm_id) {
            self.pending.remove(pos).expect("position is in range")
        } else {
            return Err(ModelError::UnknownVm(vm_id));
        };
        vm.status = VmStatus::Destroyed;
        vm.granted_mips = 0.0;

        let mut activated = Vec::new();
        while self
            .pending
            .front()
            .is_some_and(|next| self.fits_now(&next.spec))
        {
            let next = self.pending.pop_front().expect("front checked above");
            activated.push(next.vm_id());
            self.attach(next, now);
        }
        Ok((vm, activated))
    }

    /// True when no VM is resident or pending and all resources are free.
    pub fn is_at_spec(&self) -> bool {
        self.resident.is_empty()
            && self.pending.is_empty()
            && self.free_ram_mb == self.spec.ram_mb
            && self.free_storage_mb == self.spec.storage_mb
    }

    /// Checks the resource-conservation and capacity invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let ram: u64 = self.resident.iter().map(|vm| vm.spec.ram_mb).sum();
        let storage: u64 = self.resident.iter().map(|vm| vm.spec.storage_mb).sum();
        if self.free_ram_mb + ram != self.spec.ram_mb {
            return Err(format!("host {}: ram ledger mismatch", self.spec.host_id));
        }
        if self.free_storage_mb + storage != self.spec.storage_mb {
            return Err(format!(
                "host {}: storage ledger mismatch",
                self.spec.host_id
            ));
        }
        let granted: f64 = self.resident.iter().map(|vm| vm.granted_mips).sum();
        if granted > self.spec.capacity_mips() + CAPACITY_SLACK {
            return Err(format!(
                "host {}: granted {granted} exceeds capacity {}",
                self.spec.host_id,
                self.spec.capacity_mips()
            ));
        }
        if self.spec.vm_policy == SharingPolicy::SpaceShared && self.used_cores() > self.spec.cores
        {
            return Err(format!("host {}: cores oversubscribed", self.spec.host_id));
        }
        for vm in &self.resident {
            if vm.granted_mips > vm.spec.demand_mips() + CAPACITY_SLACK {
                return Err(format!("vm {}: granted above request", vm.vm_id()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatacenterCharacteristics {
    pub dc_id: u32,
    pub hosts: Vec<HostSpec>,
    pub prices: Prices,
    pub msg_latency_sec: f64,
}

/// Outcome of a VM placement request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Active { host_id: u32 },
    Queued { host_id: u32 },
    Rejected,
}

/// First host, in inventory order, that can take `vm` immediately. On
/// success the VM is attached there. Host ids equal their inventory index.
pub fn allocate_host_fcfs(vm: &VmSpec, hosts: &mut [HostState], now: SimTime) -> Option<u32> {
    let idx = hosts.iter().position(|h| h.fits_now(vm))?;
    hosts[idx].attach(VmState::new(vm.clone()), now);
    Some(hosts[idx].spec.host_id)
}

/// FCFS placement with queuing: immediate first fit, otherwise the pending
/// queue of the first host that could ever hold the VM, otherwise rejection.
pub fn place_vm(vm: &VmSpec, hosts: &mut [HostState], now: SimTime) -> Placement {
    if let Some(host_id) = allocate_host_fcfs(vm, hosts, now) {
        return Placement::Active { host_id };
    }
    match hosts.iter_mut().find(|h| h.could_ever_fit(vm)) {
        Some(host) => {
            host.push_pending(VmState::new(vm.clone()));
            Placement::Queued {
                host_id: host.spec.host_id,
            }
        }
        None => Placement::Rejected,
    }
}
