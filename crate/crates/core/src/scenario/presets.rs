//! Built-in scenarios used by the CLI, the benches and the test suites.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::Scenario;
use crate::accounting::Prices;
use crate::entities::{Binding, BrokerPlan, TaskGroup};
use crate::kernel::SimTime;
use crate::model::{DatacenterCharacteristics, HostSpec, SharingPolicy, TaskUnit, VmSpec};

/// The four host/VM policy combinations of the two-VM, eight-task example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fig3Variant {
    /// Space-shared host, space-shared tasks.
    A,
    /// Space-shared host, time-shared tasks.
    B,
    /// Time-shared host, space-shared tasks.
    C,
    /// Time-shared host, time-shared tasks.
    D,
}

impl Fig3Variant {
    pub const ALL: [Fig3Variant; 4] = [
        Fig3Variant::A,
        Fig3Variant::B,
        Fig3Variant::C,
        Fig3Variant::D,
    ];

    /// `(host policy, task policy)`.
    pub fn policies(self) -> (SharingPolicy, SharingPolicy) {
        use SharingPolicy::*;
        match self {
            Fig3Variant::A => (SpaceShared, SpaceShared),
            Fig3Variant::B => (SpaceShared, TimeShared),
            Fig3Variant::C => (TimeShared, SpaceShared),
            Fig3Variant::D => (TimeShared, TimeShared),
        }
    }

    /// Expected finish time of tasks 1..=8, in order.
    pub fn expected_finish(self) -> [f64; 8] {
        match self {
            Fig3Variant::A => [1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0],
            Fig3Variant::B => [2.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 4.0],
            Fig3Variant::C => [2.0, 2.0, 4.0, 4.0, 2.0, 2.0, 4.0, 4.0],
            Fig3Variant::D => [4.0; 8],
        }
    }

    pub fn letter(self) -> char {
        match self {
            Fig3Variant::A => 'a',
            Fig3Variant::B => 'b',
            Fig3Variant::C => 'c',
            Fig3Variant::D => 'd',
        }
    }
}

impl fmt::Display for Fig3Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Fig3Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Fig3Variant::A),
            "b" => Ok(Fig3Variant::B),
            "c" => Ok(Fig3Variant::C),
            "d" => Ok(Fig3Variant::D),
            other => Err(format!(
                "unknown variant {other:?}, expected one of a, b, c, d"
            )),
        }
    }
}

/// One host with 2 cores of 1000 MIPS, two 2-core VMs, tasks 1..=8 of
/// 1000 MI each; tasks 1-4 go to VM 1, tasks 5-8 to VM 2.
pub fn fig3(variant: Fig3Variant) -> Scenario {
    let (host_policy, task_policy) = variant.policies();
    let host = HostSpec {
        host_id: 0,
        cores: 2,
        mips_per_core: 1000.0,
        ram_mb: 4096,
        storage_mb: 100_000,
        vm_policy: host_policy,
    };
    let vm = |vm_id| VmSpec {
        vm_id,
        cores: 2,
        mips_per_core: 1000.0,
        ram_mb: 1024,
        storage_mb: 1024,
        task_policy,
    };
    let binding: BTreeMap<u32, u32> = (1..=8).map(|t| (t, if t <= 4 { 1 } else { 2 })).collect();
    Scenario {
        description: format!("two VMs sharing one dual-core host, variant {variant}"),
        seed: None,
        datacenters: vec![DatacenterCharacteristics {
            dc_id: 0,
            hosts: vec![host],
            prices: Prices::default(),
            msg_latency_sec: 0.0,
        }],
        broker_plan: BrokerPlan {
            vm_requests: vec![vm(1), vm(2)],
            task_groups: vec![TaskGroup {
                submit_time: SimTime::ZERO,
                tasks: (1..=8).map(|t| TaskUnit::new(t, 1000.0)).collect(),
                binding: Binding::Explicit(binding),
            }],
            destroy_on_completion: true,
        },
    }
}

pub const SECTION5_GROUPS: u32 = 10;
pub const SECTION5_GROUP_SIZE: u32 = 50;
pub const SECTION5_INTERVAL_SEC: f64 = 600.0;
pub const SECTION5_TASK_MI: f64 = 1_200_000.0;

/// `hosts` single-core hosts, 50 single-core VMs, and ten groups of 50
/// tasks of 1,200,000 MI submitted every 600 s, bound round-robin.
pub fn section5(task_policy: SharingPolicy, hosts: u32) -> Scenario {
    section5_priced(task_policy, hosts, Prices::default())
}

/// One datacenter of `hosts` single-core 1000 MIPS hosts with 1 GB of RAM
/// and 2 TB of storage.
pub fn section5_datacenter(hosts: u32, prices: Prices) -> DatacenterCharacteristics {
    let hosts = (0..hosts)
        .map(|host_id| HostSpec {
            host_id,
            cores: 1,
            mips_per_core: 1000.0,
            ram_mb: 1024,
            storage_mb: 2_000_000,
            vm_policy: SharingPolicy::SpaceShared,
        })
        .collect();
    DatacenterCharacteristics {
        dc_id: 0,
        hosts,
        prices,
        msg_latency_sec: 0.0,
    }
}

pub fn section5_priced(task_policy: SharingPolicy, hosts: u32, prices: Prices) -> Scenario {
    let vm_requests = (0..SECTION5_GROUP_SIZE)
        .map(|vm_id| VmSpec {
            vm_id,
            cores: 1,
            mips_per_core: 1000.0,
            ram_mb: 512,
            storage_mb: 1024,
            task_policy,
        })
        .collect();
    let task_groups = (0..SECTION5_GROUPS)
        .map(|g| TaskGroup {
            submit_time: SimTime::new(g as f64 * SECTION5_INTERVAL_SEC),
            tasks: (0..SECTION5_GROUP_SIZE)
                .map(|i| {
                    TaskUnit::new(g * SECTION5_GROUP_SIZE + i, SECTION5_TASK_MI)
                        .with_transfer(150_000, 150_000)
                })
                .collect(),
            binding: Binding::RoundRobin,
        })
        .collect();
    let policy = match task_policy {
        SharingPolicy::SpaceShared => "space-shared",
        SharingPolicy::TimeShared => "time-shared",
    };
    Scenario {
        description: format!("ten groups of 50 long tasks on 50 VMs, {policy} tasks"),
        seed: None,
        datacenters: vec![section5_datacenter(hosts, prices)],
        broker_plan: BrokerPlan {
            vm_requests,
            task_groups,
            destroy_on_completion: true,
        },
    }
}
