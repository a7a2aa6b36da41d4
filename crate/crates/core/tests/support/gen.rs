//! Seeded generator of small random scenarios.

use std::collections::BTreeMap;

use dcsim::{
    Binding, BrokerPlan, DatacenterCharacteristics, HostSpec, Prices, Scenario, SharingPolicy,
    SimTime, TaskGroup, TaskUnit, VmSpec,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const POLICY_PAIRS: [(SharingPolicy, SharingPolicy); 4] = [
    (SharingPolicy::SpaceShared, SharingPolicy::SpaceShared),
    (SharingPolicy::SpaceShared, SharingPolicy::TimeShared),
    (SharingPolicy::TimeShared, SharingPolicy::SpaceShared),
    (SharingPolicy::TimeShared, SharingPolicy::TimeShared),
];

/// At most 4 hosts, 8 VMs and 32 tasks, with every host using `hosts` and
/// every VM using `tasks` as its policy. Some datacenter can always hold the
/// largest VM request.
pub fn random_scenario(seed: u64, (hosts, tasks): (SharingPolicy, SharingPolicy)) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let vm_count = rng.random_range(1..=8u32);
    let vm_requests: Vec<VmSpec> = (0..vm_count)
        .map(|i| VmSpec {
            vm_id: 10 + i,
            cores: rng.random_range(1..=2),
            mips_per_core: *[250.0, 500.0, 1000.0].choose(&mut rng).unwrap(),
            ram_mb: *[256, 512, 1024].choose(&mut rng).unwrap(),
            storage_mb: 1000,
            task_policy: tasks,
        })
        .collect();

    let host_count = rng.random_range(1..=4u32);
    let dc_count = if host_count > 1 && rng.random_bool(0.3) {
        2
    } else {
        1
    };
    let mut specs: Vec<HostSpec> = (0..host_count)
        .map(|_| HostSpec {
            host_id: 0,
            cores: rng.random_range(1..=4),
            mips_per_core: *[500.0, 1000.0].choose(&mut rng).unwrap(),
            ram_mb: *[512, 1024, 2048].choose(&mut rng).unwrap(),
            storage_mb: 4000,
            vm_policy: hosts,
        })
        .collect();
    // Make the last host able to hold the componentwise largest request.
    let last = specs.last_mut().unwrap();
    last.cores = last
        .cores
        .max(vm_requests.iter().map(|v| v.cores).max().unwrap());
    last.ram_mb = last
        .ram_mb
        .max(vm_requests.iter().map(|v| v.ram_mb).max().unwrap());

    let split = if dc_count == 2 {
        rng.random_range(1..host_count)
    } else {
        host_count
    };
    let mut datacenters = Vec::new();
    for (dc_id, chunk) in [&specs[..split as usize], &specs[split as usize..]]
        .into_iter()
        .enumerate()
    {
        if chunk.is_empty() {
            continue;
        }
        datacenters.push(DatacenterCharacteristics {
            dc_id: dc_id as u32,
            hosts: chunk
                .iter()
                .enumerate()
                .map(|(i, h)| HostSpec {
                    host_id: i as u32,
                    ..h.clone()
                })
                .collect(),
            prices: Prices::default(),
            msg_latency_sec: 0.0,
        });
    }

    let task_count = rng.random_range(0..=32u32);
    let group_count = rng.random_range(1..=4u32).min(task_count.max(1));
    let mut task_groups = Vec::new();
    let mut next_id = 0;
    let mut rr = 0usize;
    // Whole-second arrivals make simultaneous events common.
    let mut submits: Vec<f64> = (0..group_count)
        .map(|_| {
            if rng.random_bool(0.5) {
                rng.random_range(0..6) as f64
            } else {
                rng.random_range(0.0..6.0)
            }
        })
        .collect();
    submits.sort_by(f64::total_cmp);
    for (g, submit) in (0..group_count).zip(submits) {
        let size = if g + 1 == group_count {
            task_count - next_id
        } else {
            rng.random_range(0..=task_count - next_id)
        };
        let explicit = rng.random_bool(0.5);
        let mut map = BTreeMap::new();
        let mut group_tasks = Vec::new();
        for _ in 0..size {
            let vm = if explicit {
                vm_requests.choose(&mut rng).unwrap()
            } else {
                let vm = &vm_requests[rr % vm_requests.len()];
                rr += 1;
                vm
            };
            map.insert(next_id, vm.vm_id);
            let length = if rng.random_bool(0.3) {
                *[500.0, 1000.0, 2000.0].choose(&mut rng).unwrap()
            } else {
                rng.random_range(50.0..4000.0)
            };
            group_tasks
                .push(TaskUnit::new(next_id, length).with_cores(rng.random_range(1..=vm.cores)));
            next_id += 1;
        }
        task_groups.push(TaskGroup {
            submit_time: SimTime::new(submit),
            tasks: group_tasks,
            binding: if explicit {
                Binding::Explicit(map)
            } else {
                Binding::RoundRobin
            },
        });
    }

    Scenario {
        description: format!("random scenario {seed}"),
        seed: Some(seed),
        datacenters,
        broker_plan: BrokerPlan {
            vm_requests,
            task_groups,
            destroy_on_completion: true,
        },
    }
}
