//! Two-level processor allocation.
//!
//! A host divides its cores among resident VMs (space-shared: dedicated
//! cores; time-shared: proportional slices), and each VM divides its granted
//! capacity among its task units (space-shared: one task per free core, the
//! rest queue; time-shared: a fluid equal share capped at the per-core
//! speed).
//!
//! Progress is integrated lazily: a VM only moves forward when it is
//! updated, and the update replays every completion that happened since the
//! previous one at its exact analytic instant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::SimTime;
use crate::model::{HostState, SharingPolicy, TaskStatus, TaskUnit, VmState, CAPACITY_SLACK};

/// Completion times within this many seconds of an update instant are
/// treated as reached.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedError {
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("update at t={now} precedes last update at t={last}")]
    CausalityViolation { now: f64, last: f64 },
}

/// Snapshot of the capacity handed out on one host.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateAssignment {
    pub per_vm: Vec<(u32, f64)>,
    pub per_task: Vec<(u32, f64)>,
}

/// Space-shared host: every resident (active) VM owns its requested cores
/// outright. Queued VMs are not resident and receive nothing.
pub fn host_shares_space(host: &HostState) -> Vec<(u32, f64)> {
    host.resident
        .iter()
        .map(|vm| (vm.vm_id(), vm.spec.demand_mips()))
        .collect()
}

/// Time-shared host: demands are met in full when they fit, otherwise each
/// VM is scaled by `capacity / total_demand`.
pub fn host_shares_time(host: &HostState) -> Vec<(u32, f64)> {
    let capacity = host.spec.capacity_mips();
    let total: f64 = host.resident.iter().map(|vm| vm.spec.demand_mips()).sum();
    host.resident
        .iter()
        .map(|vm| {
            let demand = vm.spec.demand_mips();
            let share = if total <= capacity {
                demand
            } else {
                demand * capacity / total
            };
            (vm.vm_id(), share)
        })
        .collect()
}

pub fn host_shares(host: &HostState) -> Vec<(u32, f64)> {
    match host.spec.vm_policy {
        SharingPolicy::SpaceShared => host_shares_space(host),
        SharingPolicy::TimeShared => host_shares_time(host),
    }
}

/// Rate of every running task of `vm` under `granted`, index-aligned with
/// `vm.running`.
pub fn task_rates(vm: &VmState, granted: f64) -> Vec<f64> {
    let per_core_cap = vm.spec.mips_per_core;
    match vm.spec.task_policy {
        SharingPolicy::SpaceShared => {
            let per_core = granted / vm.spec.cores as f64;
            vm.running
                .iter()
                .map(|t| per_core * t.cores_required as f64)
                .collect()
        }
        SharingPolicy::TimeShared => {
            let n = vm.running.len() as f64;
            vm.running
                .iter()
                .map(|t| (per_core_cap * t.cores_required as f64).min(granted / n))
                .collect()
        }
    }
}

/// Current host and task rates, as used for invariant checks.
pub fn rate_assignment(host: &HostState) -> RateAssignment {
    let mut out = RateAssignment::default();
    for vm in &host.resident {
        out.per_vm.push((vm.vm_id(), vm.granted_mips));
        let rates = task_rates(vm, vm.granted_mips);
        out.per_task
            .extend(vm.running.iter().zip(rates).map(|(t, r)| (t.task_id, r)));
    }
    out
}

/// Checks the capacity invariants of a host's current assignment.
pub fn check_rates(host: &HostState) -> Result<(), String> {
    let total: f64 = host.resident.iter().map(|vm| vm.granted_mips).sum();
    if total > host.spec.capacity_mips() + CAPACITY_SLACK {
        return Err(format!(
            "host {} oversubscribed: {total}",
            host.spec.host_id
        ));
    }
    for vm in &host.resident {
        let rates = task_rates(vm, vm.granted_mips);
        let sum: f64 = rates.iter().sum();
        if sum > vm.granted_mips + CAPACITY_SLACK {
            return Err(format!("vm {} tasks exceed grant: {sum}", vm.vm_id()));
        }
        for (task, rate) in vm.running.iter().zip(rates) {
            let cap = vm.spec.mips_per_core * task.cores_required as f64;
            if rate < 0.0 || rate > cap + CAPACITY_SLACK {
                return Err(format!(
                    "task {} rate {rate} outside [0, {cap}]",
                    task.task_id
                ));
            }
        }
    }
    Ok(())
}

fn promote(vm: &mut VmState, at: SimTime) {
    match vm.spec.task_policy {
        SharingPolicy::SpaceShared => {
            let mut free = vm.spec.cores - vm.running.iter().map(|t| t.cores_required).sum::<u32>();
            while vm.waiting.front().is_some_and(|t| t.cores_required <= free) {
                let task = vm.waiting.pop_front().expect("front checked above");
                free -= task.cores_required;
                vm.running.push(start(task, at));
            }
        }
        SharingPolicy::TimeShared => {
            while let Some(task) = vm.waiting.pop_front() {
                vm.running.push(start(task, at));
            }
        }
    }
}

fn start(mut task: TaskUnit, at: SimTime) -> TaskUnit {
    task.status = TaskStatus::Running;
    task.start_t = Some(at);
    task
}

/// Earliest projected completion among running tasks, given rates.
fn earliest_finish(vm: &VmState, rates: &[f64], from: f64) -> Option<f64> {
    vm.running
        .iter()
        .zip(rates)
        .filter(|(_, &r)| r > 0.0)
        .map(|(t, &r)| from + t.remaining_mi() / r)
        .min_by(f64::total_cmp)
}

/// Advances `vm` from its last update to `now` under the grant that was in
/// effect, then installs `granted` and returns the next projected finish.
fn task_update(
    vm: &mut VmState,
    now: SimTime,
    granted: f64,
) -> Result<Option<SimTime>, SchedError> {
    if !(granted >= 0.0 && granted.is_finite()) {
        return Err(SchedError::ContractViolation(format!(
            "vm {}: granted capacity {granted}",
            vm.vm_id()
        )));
    }
    let last = vm.last_update;
    if now < last {
        return Err(SchedError::CausalityViolation {
            now: now.seconds(),
            last: last.seconds(),
        });
    }

    let end = now.seconds();
    let mut t = last.seconds();
    loop {
        promote(vm, SimTime::new(t));
        let rates = task_rates(vm, vm.granted_mips);
        let next = earliest_finish(vm, &rates, t);
        let Some(next) = next.filter(|&f| f <= end + TIME_EPS) else {
            let dt = end - t;
            for (task, rate) in vm.running.iter_mut().zip(&rates) {
                task.progress_mi = (task.progress_mi + rate * dt).min(task.length_mi);
            }
            break;
        };
        // Completion inside (t, now]: integrate up to it, retire every task
        // that finishes there, then continue from that instant.
        let step_end = next.min(end).max(t);
        let dt = step_end - t;
        let mut idx = 0;
        let mut rates = rates.into_iter();
        while idx < vm.running.len() {
            let rate = rates.next().expect("rates align with running tasks");
            let task = &mut vm.running[idx];
            let finish = if rate > 0.0 {
                t + task.remaining_mi() / rate
            } else {
                f64::INFINITY
            };
            if finish <= step_end + TIME_EPS {
                let mut done = vm.running.remove(idx);
                done.progress_mi = done.length_mi;
                done.status = TaskStatus::Finished;
                done.finish_t = Some(SimTime::new(finish.clamp(t, step_end)));
                vm.finished.push(done);
            } else {
                task.progress_mi = (task.progress_mi + rate * dt).min(task.length_mi);
                idx += 1;
            }
        }
        t = step_end;
    }

    vm.last_update = now;
    vm.granted_mips = granted;
    promote(vm, now);
    let rates = task_rates(vm, granted);
    Ok(earliest_finish(vm, &rates, end).map(SimTime::new))
}

fn require_policy(vm: &VmState, policy: SharingPolicy) -> Result<(), SchedError> {
    if vm.spec.task_policy == policy {
        Ok(())
    } else {
        Err(SchedError::ContractViolation(format!(
            "vm {} uses {:?} task scheduling",
            vm.vm_id(),
            vm.spec.task_policy
        )))
    }
}

/// Space-shared task update: running tasks progress at
/// `(granted / vm.cores) × cores_required`; queued tasks wait for free cores.
pub fn task_update_space(
    vm: &mut VmState,
    now: SimTime,
    granted: f64,
) -> Result<Option<SimTime>, SchedError> {
    require_policy(vm, SharingPolicy::SpaceShared)?;
    task_update(vm, now, granted)
}

/// Time-shared task update: each of the N running tasks progresses at
/// `min(mips_per_core × cores_required, granted / N)`.
pub fn task_update_time(
    vm: &mut VmState,
    now: SimTime,
    granted: f64,
) -> Result<Option<SimTime>, SchedError> {
    require_policy(vm, SharingPolicy::TimeShared)?;
    task_update(vm, now, granted)
}

/// Brings every resident VM of `host` up to `now`, recomputes the host-level
/// shares and returns the least projected task completion on the host.
pub fn update_vms_processing(
    host: &mut HostState,
    now: SimTime,
) -> Result<Option<SimTime>, SchedError> {
    if now < host.last_update {
        return Err(SchedError::CausalityViolation {
            now: now.seconds(),
            last: host.last_update.seconds(),
        });
    }
    host.last_update = now;
    let shares = host_shares(host);
    let mut next: Option<SimTime> = None;
    for (vm, (_, share)) in host.resident.iter_mut().zip(shares) {
        if let Some(finish) = task_update(vm, now, share)? {
            next = Some(next.map_or(finish, |n| n.min(finish)));
        }
    }
    Ok(next)
}
