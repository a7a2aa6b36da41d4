use super::message::{CisCandidate, DatacenterSummary, HostShape, VmRequirement};
use super::EntityFault;
use crate::kernel::EntityId;
use crate::model::DatacenterCharacteristics;

#[derive(Clone, Debug, PartialEq)]
pub struct CisEntry {
    pub dc_id: u32,
    pub entity: EntityId,
    pub summary: DatacenterSummary,
}

/// Registry of datacenters, queried by brokers for match-making.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CisRegistry {
    entries: Vec<CisEntry>,
}

impl CisRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[CisEntry] {
        &self.entries
    }

    pub fn register(
        &mut self,
        entity: EntityId,
        summary: DatacenterSummary,
    ) -> Result<(), EntityFault> {
        if self.entries.iter().any(|e| e.dc_id == summary.dc_id) {
            return Err(EntityFault::DuplicateDatacenter(summary.dc_id));
        }
        self.entries.push(CisEntry {
            dc_id: summary.dc_id,
            entity,
            summary,
        });
        Ok(())
    }

    /// Registers a datacenter directly from its characteristics.
    pub fn register_characteristics(
        &mut self,
        entity: EntityId,
        dc: &DatacenterCharacteristics,
    ) -> Result<(), EntityFault> {
        self.register(entity, summarize(dc))
    }

    /// Datacenters with at least one host able to hold `req`, in
    /// registration order.
    pub fn query(&self, req: &VmRequirement) -> Vec<CisCandidate> {
        self.entries
            .iter()
            .filter(|e| e.summary.largest_host_satisfies(req))
            .map(|e| CisCandidate {
                dc_id: e.dc_id,
                entity: e.entity,
                msg_latency_sec: e.summary.msg_latency_sec,
            })
            .collect()
    }
}

pub fn summarize(dc: &DatacenterCharacteristics) -> DatacenterSummary {
    DatacenterSummary::new(
        dc.dc_id,
        dc.hosts.iter().map(|h| HostShape {
            cores: h.cores,
            ram_mb: h.ram_mb,
            storage_mb: h.storage_mb,
        }),
        dc.msg_latency_sec,
    )
}
