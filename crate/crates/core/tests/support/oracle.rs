//! Brute-force reference simulator.
//!
//! Global state is advanced in fixed quanta of `dt` seconds; before every
//! quantum all host shares and task rates are recomputed from scratch. A
//! quantum is cut short at the next arrival and at the first completion
//! inside it, so a completion frees capacity at the instant it happens
//! instead of at the next quantum boundary. There is no event list, no lazy
//! progress and no message passing: protocol steps with zero latency are
//! applied in place.

use std::collections::{BTreeMap, VecDeque};

use dcsim::{Binding, Scenario, SharingPolicy};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRecord {
    pub task_id: u32,
    pub vm_id: u32,
    pub host_id: Option<u32>,
    pub start: f64,
    pub finish: f64,
    pub failed: bool,
}

#[derive(Debug, PartialEq, Eq)]
pub enum OracleError {
    NoProvider,
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum VmPhase {
    Rejected,
    Queued,
    Active,
    Gone,
}

struct Vm {
    id: u32,
    cores: u32,
    mips: f64,
    ram: u64,
    storage: u64,
    task_policy: SharingPolicy,
    host: Option<usize>,
    phase: VmPhase,
    outstanding: usize,
    waiting: Vec<usize>,
    running: Vec<usize>,
}

struct Host {
    cores: u32,
    mips: f64,
    ram: u64,
    storage: u64,
    policy: SharingPolicy,
    used_cores: u32,
    used_ram: u64,
    used_storage: u64,
    pending: VecDeque<usize>,
}

impl Host {
    fn cores_ok(&self, vm: &Vm, free: u32) -> bool {
        match self.policy {
            SharingPolicy::SpaceShared => vm.cores <= free && vm.mips <= self.mips,
            SharingPolicy::TimeShared => true,
        }
    }

    fn fits(&self, vm: &Vm) -> bool {
        self.used_ram + vm.ram <= self.ram
            && self.used_storage + vm.storage <= self.storage
            && self.cores_ok(vm, self.cores.saturating_sub(self.used_cores))
    }

    fn ever_fits(&self, vm: &Vm) -> bool {
        vm.ram <= self.ram && vm.storage <= self.storage && self.cores_ok(vm, self.cores)
    }
}

struct Task {
    id: u32,
    vm: usize,
    length: f64,
    cores: u32,
    arrival: f64,
    done: f64,
    arrived: bool,
    start: Option<f64>,
    finish: Option<f64>,
    failed: bool,
}

struct World {
    hosts: Vec<Host>,
    vms: Vec<Vm>,
    tasks: Vec<Task>,
    destroy: bool,
}

const DONE_EPS: f64 = 1e-9;

impl World {
    fn attach(&mut self, v: usize, h: usize) {
        let vm = &mut self.vms[v];
        let host = &mut self.hosts[h];
        if host.policy == SharingPolicy::SpaceShared {
            host.used_cores += vm.cores;
        }
        host.used_ram += vm.ram;
        host.used_storage += vm.storage;
        vm.host = Some(h);
        vm.phase = VmPhase::Active;
    }

    fn destroy(&mut self, v: usize) {
        let h = self.vms[v].host.expect("placed vm");
        if self.vms[v].phase == VmPhase::Active {
            let vm = &self.vms[v];
            let host = &mut self.hosts[h];
            if host.policy == SharingPolicy::SpaceShared {
                host.used_cores -= vm.cores;
            }
            host.used_ram -= vm.ram;
            host.used_storage -= vm.storage;
        } else {
            self.hosts[h].pending.retain(|&p| p != v);
        }
        self.vms[v].phase = VmPhase::Gone;
        while let Some(&next) = self.hosts[h].pending.front() {
            if !self.hosts[h].fits(&self.vms[next]) {
                break;
            }
            self.hosts[h].pending.pop_front();
            self.attach(next, h);
        }
    }

    fn resolve(&mut self, v: usize) {
        self.vms[v].outstanding -= 1;
        let placed = matches!(self.vms[v].phase, VmPhase::Active | VmPhase::Queued);
        if self.vms[v].outstanding == 0 && self.destroy && placed {
            self.destroy(v);
        }
    }

    /// Applies everything that happens at instant `t`.
    fn settle(&mut self, t: f64) {
        // Arrivals, in submission order.
        let mut due: Vec<usize> = (0..self.tasks.len())
            .filter(|&i| !self.tasks[i].arrived && self.tasks[i].arrival <= t + DONE_EPS)
            .collect();
        due.sort_by(|&a, &b| {
            self.tasks[a]
                .arrival
                .total_cmp(&self.tasks[b].arrival)
                .then(self.tasks[a].id.cmp(&self.tasks[b].id))
        });
        let mut rejected = Vec::new();
        for i in due {
            self.tasks[i].arrived = true;
            let v = self.tasks[i].vm;
            if self.vms[v].phase == VmPhase::Rejected {
                let task = &mut self.tasks[i];
                task.failed = true;
                task.start = Some(t);
                task.finish = Some(t);
                rejected.push(v);
            } else {
                self.vms[v].waiting.push(i);
            }
        }
        for v in rejected {
            self.resolve(v);
        }
        // Completions.
        for v in 0..self.vms.len() {
            let finished: Vec<usize> = self.vms[v]
                .running
                .iter()
                .copied()
                .filter(|&i| {
                    self.tasks[i].length - self.tasks[i].done
                        <= DONE_EPS * self.tasks[i].length.max(1.0)
                })
                .collect();
            for &i in &finished {
                self.tasks[i].finish = Some(t);
            }
            self.vms[v].running.retain(|i| !finished.contains(i));
            for _ in finished {
                self.resolve(v);
            }
        }
        // Promotion.
        for vm in &mut self.vms {
            if vm.phase != VmPhase::Active {
                continue;
            }
            vm.waiting.sort_by(|&a, &b| {
                self.tasks[a]
                    .arrival
                    .total_cmp(&self.tasks[b].arrival)
                    .then(self.tasks[a].id.cmp(&self.tasks[b].id))
            });
            match vm.task_policy {
                SharingPolicy::TimeShared => {
                    for i in vm.waiting.drain(..) {
                        self.tasks[i].start = Some(t);
                        vm.running.push(i);
                    }
                }
                SharingPolicy::SpaceShared => {
                    let mut free =
                        vm.cores - vm.running.iter().map(|&i| self.tasks[i].cores).sum::<u32>();
                    while let Some(&head) = vm.waiting.first() {
                        if self.tasks[head].cores > free {
                            break;
                        }
                        free -= self.tasks[head].cores;
                        vm.waiting.remove(0);
                        self.tasks[head].start = Some(t);
                        vm.running.push(head);
                    }
                }
            }
        }
    }

    /// Current rate of every running task.
    fn rates(&self) -> Vec<(usize, f64)> {
        let mut demand: BTreeMap<usize, f64> = BTreeMap::new();
        for vm in self.vms.iter().filter(|vm| vm.phase == VmPhase::Active) {
            *demand.entry(vm.host.unwrap()).or_default() += vm.cores as f64 * vm.mips;
        }
        let mut out = Vec::new();
        for vm in self.vms.iter().filter(|vm| vm.phase == VmPhase::Active) {
            let host = &self.hosts[vm.host.unwrap()];
            let want = vm.cores as f64 * vm.mips;
            let capacity = host.cores as f64 * host.mips;
            let total = demand[&vm.host.unwrap()];
            let granted = match host.policy {
                SharingPolicy::TimeShared if total > capacity => want * capacity / total,
                _ => want,
            };
            let n = vm.running.len() as f64;
            for &i in &vm.running {
                let cr = self.tasks[i].cores as f64;
                let rate = match vm.task_policy {
                    SharingPolicy::SpaceShared => granted / vm.cores as f64 * cr,
                    SharingPolicy::TimeShared => (vm.mips * cr).min(granted / n),
                };
                out.push((i, rate));
            }
        }
        out
    }
}

/// Runs `scenario` with quantum `dt`.
pub fn simulate(scenario: &Scenario, dt: f64) -> Result<Vec<OracleRecord>, OracleError> {
    let plan = &scenario.broker_plan;
    let need = plan.vm_requests.iter().fold((0, 0, 0), |acc, vm| {
        (
            acc.0.max(vm.cores),
            acc.1.max(vm.ram_mb),
            acc.2.max(vm.storage_mb),
        )
    });
    let dc = if plan.vm_requests.is_empty() {
        scenario.datacenters.first()
    } else {
        scenario.datacenters.iter().find(|dc| {
            dc.hosts
                .iter()
                .any(|h| h.cores >= need.0 && h.ram_mb >= need.1 && h.storage_mb >= need.2)
        })
    }
    .ok_or(OracleError::NoProvider)?;

    let mut world = World {
        hosts: dc
            .hosts
            .iter()
            .map(|h| Host {
                cores: h.cores,
                mips: h.mips_per_core,
                ram: h.ram_mb,
                storage: h.storage_mb,
                policy: h.vm_policy,
                used_cores: 0,
                used_ram: 0,
                used_storage: 0,
                pending: VecDeque::new(),
            })
            .collect(),
        vms: plan
            .vm_requests
            .iter()
            .map(|vm| Vm {
                id: vm.vm_id,
                cores: vm.cores,
                mips: vm.mips_per_core,
                ram: vm.ram_mb,
                storage: vm.storage_mb,
                task_policy: vm.task_policy,
                host: None,
                phase: VmPhase::Rejected,
                outstanding: 0,
                waiting: Vec::new(),
                running: Vec::new(),
            })
            .collect(),
        tasks: Vec::new(),
        destroy: plan.destroy_on_completion,
    };

    let index: BTreeMap<u32, usize> = world
        .vms
        .iter()
        .enumerate()
        .map(|(i, vm)| (vm.id, i))
        .collect();
    let mut rr = 0usize;
    for group in &plan.task_groups {
        for task in &group.tasks {
            let v = match &group.binding {
                Binding::RoundRobin => {
                    let v = rr % world.vms.len();
                    rr += 1;
                    v
                }
                Binding::Explicit(map) => index[&map[&task.task_id]],
            };
            world.vms[v].outstanding += 1;
            world.tasks.push(Task {
                id: task.task_id,
                vm: v,
                length: task.length_mi,
                cores: task.cores_required,
                arrival: group.submit_time.seconds().max(0.0),
                done: 0.0,
                arrived: false,
                start: None,
                finish: None,
                failed: false,
            });
        }
    }

    // Placement, then release of VMs that have nothing to run.
    for v in 0..world.vms.len() {
        if let Some(h) = (0..world.hosts.len()).find(|&h| world.hosts[h].fits(&world.vms[v])) {
            world.attach(v, h);
        } else if let Some(h) =
            (0..world.hosts.len()).find(|&h| world.hosts[h].ever_fits(&world.vms[v]))
        {
            world.vms[v].host = Some(h);
            world.vms[v].phase = VmPhase::Queued;
            world.hosts[h].pending.push_back(v);
        }
    }
    if world.destroy {
        for v in 0..world.vms.len() {
            let placed = matches!(world.vms[v].phase, VmPhase::Active | VmPhase::Queued);
            if placed && world.vms[v].outstanding == 0 {
                world.destroy(v);
            }
        }
    }

    let mut t = 0.0;
    loop {
        world.settle(t);
        if world.tasks.iter().all(|task| task.finish.is_some()) {
            break;
        }
        let rates = world.rates();
        let next_arrival = world
            .tasks
            .iter()
            .filter(|task| !task.arrived)
            .map(|task| task.arrival)
            .fold(f64::INFINITY, f64::min);
        let first_done = rates
            .iter()
            .filter(|(_, r)| *r > 0.0)
            .map(|&(i, r)| (world.tasks[i].length - world.tasks[i].done) / r)
            .fold(f64::INFINITY, f64::min);
        let step = dt.min(next_arrival - t).min(first_done);
        if !step.is_finite() {
            return Err(OracleError::Stalled);
        }
        for &(i, r) in &rates {
            let task = &mut world.tasks[i];
            let left = task.length - task.done;
            task.done = if left / r <= step {
                task.length
            } else {
                task.done + r * step
            };
        }
        t = if step >= next_arrival - t {
            next_arrival
        } else {
            t + step
        };
    }

    let mut out: Vec<OracleRecord> = world
        .tasks
        .iter()
        .map(|task| OracleRecord {
            task_id: task.id,
            vm_id: world.vms[task.vm].id,
            host_id: if task.failed {
                None
            } else {
                world.vms[task.vm].host.map(|h| dc.hosts[h].host_id)
            },
            start: task.start.unwrap(),
            finish: task.finish.unwrap(),
            failed: task.failed,
        })
        .collect();
    out.sort_by_key(|r| r.task_id);
    Ok(out)
}
