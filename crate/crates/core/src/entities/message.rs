use crate::kernel::{EntityId, Payload, Tag};
use crate::model::{TaskUnit, VmSpec};

/// Per-VM requirement used for registry match-making.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VmRequirement {
    pub cores: u32,
    pub ram_mb: u64,
    pub storage_mb: u64,
}

/// Distinct host capacity triple advertised to the registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct HostShape {
    pub cores: u32,
    pub ram_mb: u64,
    pub storage_mb: u64,
}

impl HostShape {
    pub fn satisfies(&self, req: &VmRequirement) -> bool {
        self.cores >= req.cores && self.ram_mb >= req.ram_mb && self.storage_mb >= req.storage_mb
    }

    fn dominates(&self, other: &HostShape) -> bool {
        self.cores >= other.cores
            && self.ram_mb >= other.ram_mb
            && self.storage_mb >= other.storage_mb
    }
}

/// What a datacenter tells the registry about itself.
#[derive(Clone, Debug, PartialEq)]
pub struct DatacenterSummary {
    pub dc_id: u32,
    /// Non-dominated host shapes; a requirement fits some single host iff it
    /// fits one of these.
    pub host_shapes: Vec<HostShape>,
    pub msg_latency_sec: f64,
}

impl DatacenterSummary {
    pub fn new(
        dc_id: u32,
        shapes: impl IntoIterator<Item = HostShape>,
        msg_latency_sec: f64,
    ) -> Self {
        let mut all: Vec<HostShape> = shapes.into_iter().collect();
        all.sort_unstable();
        all.dedup();
        let frontier = all
            .iter()
            .filter(|s| !all.iter().any(|o| o != *s && o.dominates(s)))
            .copied()
            .collect();
        Self {
            dc_id,
            host_shapes: frontier,
            msg_latency_sec,
        }
    }

    pub fn largest_host_satisfies(&self, req: &VmRequirement) -> bool {
        self.host_shapes.iter().any(|s| s.satisfies(req))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CisCandidate {
    pub dc_id: u32,
    pub entity: EntityId,
    pub msg_latency_sec: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AckOutcome {
    Placed { host_id: u32, queued: bool },
    Failed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskReport {
    pub task: TaskUnit,
    pub vm_id: u32,
    pub host_id: Option<u32>,
    pub dc_id: u32,
    pub success: bool,
    /// Processing plus transfer charges attributed to this task.
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timer {
    /// Datacenter completion check; stale when the revision moved on.
    Datacenter { revision: u64 },
    /// Broker: task group `index` is due.
    TaskGroupDue(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    RegisterDatacenter(DatacenterSummary),
    QueryCis(VmRequirement),
    CisReply(Vec<CisCandidate>),
    CreateVm(VmSpec),
    VmAck {
        vm_id: u32,
        dc_id: u32,
        outcome: AckOutcome,
    },
    SubmitTask {
        vm_id: u32,
        task: TaskUnit,
    },
    TaskDone(TaskReport),
    InternalUpdate(Timer),
    DestroyVm {
        vm_id: u32,
    },
}

impl Payload for Message {
    fn tag(&self) -> Tag {
        match self {
            Message::RegisterDatacenter(_) => Tag::RegisterDatacenter,
            Message::QueryCis(_) => Tag::QueryCis,
            Message::CisReply(_) => Tag::CisReply,
            Message::CreateVm(_) => Tag::CreateVm,
            Message::VmAck { .. } => Tag::VmAck,
            Message::SubmitTask { .. } => Tag::SubmitTask,
            Message::TaskDone(_) => Tag::TaskDone,
            Message::InternalUpdate(_) => Tag::InternalUpdate,
            Message::DestroyVm { .. } => Tag::DestroyVm,
        }
    }
}
