//! Pay-as-you-go cost model.
//!
//! Memory and storage are charged once, when a VM is accepted by a
//! datacenter. Bandwidth is charged per byte moved: input bytes when a task
//! is submitted, output bytes when it completes. Processing is charged per
//! second of wall time a task spends running.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::VmSpec;

/// Static prices of one datacenter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prices {
    pub cost_per_cpu_sec: f64,
    pub cost_per_ram_mb: f64,
    pub cost_per_storage_mb: f64,
    pub cost_per_byte: f64,
}

impl Prices {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            cost_per_cpu_sec: self.cost_per_cpu_sec * factor,
            cost_per_ram_mb: self.cost_per_ram_mb * factor,
            cost_per_storage_mb: self.cost_per_storage_mb * factor,
            cost_per_byte: self.cost_per_byte * factor,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AccountingError {
    #[error("contract violation: {0}")]
    ContractViolation(String),
}

pub fn vm_creation_cost(vm: &VmSpec, prices: &Prices) -> f64 {
    vm.ram_mb as f64 * prices.cost_per_ram_mb + vm.storage_mb as f64 * prices.cost_per_storage_mb
}

pub fn task_processing_cost(cpu_seconds: f64, prices: &Prices) -> Result<f64, AccountingError> {
    if cpu_seconds.is_nan() || cpu_seconds < 0.0 {
        return Err(AccountingError::ContractViolation(format!(
            "negative cpu time {cpu_seconds}"
        )));
    }
    Ok(cpu_seconds * prices.cost_per_cpu_sec)
}

pub fn transfer_cost(bytes: u64, prices: &Prices) -> f64 {
    bytes as f64 * prices.cost_per_byte
}

/// Charging rules applied by a datacenter. [`PayAsYouGo`] is the default;
/// alternative rules can be plugged into the datacenter entity.
pub trait ChargingPolicy: std::fmt::Debug {
    fn creation(&self, vm: &VmSpec, prices: &Prices) -> f64 {
        vm_creation_cost(vm, prices)
    }

    fn processing(&self, cpu_seconds: f64, prices: &Prices) -> Result<f64, AccountingError> {
        task_processing_cost(cpu_seconds, prices)
    }

    fn transfer(&self, bytes: u64, prices: &Prices) -> f64 {
        transfer_cost(bytes, prices)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PayAsYouGo;

impl ChargingPolicy for PayAsYouGo {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VmCharges {
    pub creation_cost: f64,
    pub processing_cost: f64,
    pub transfer_cost: f64,
}

impl VmCharges {
    pub fn total(&self) -> f64 {
        self.creation_cost + self.processing_cost + self.transfer_cost
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatacenterLedger {
    pub dc_id: u32,
    pub per_vm: BTreeMap<u32, VmCharges>,
}

impl DatacenterLedger {
    pub fn new(dc_id: u32) -> Self {
        Self {
            dc_id,
            per_vm: BTreeMap::new(),
        }
    }

    pub fn vm(&mut self, vm_id: u32) -> &mut VmCharges {
        self.per_vm.entry(vm_id).or_default()
    }

    pub fn total(&self) -> f64 {
        self.per_vm.values().map(VmCharges::total).sum()
    }

    pub fn creation_total(&self) -> f64 {
        self.per_vm.values().map(|c| c.creation_cost).sum()
    }

    pub fn processing_total(&self) -> f64 {
        self.per_vm.values().map(|c| c.processing_cost).sum()
    }

    pub fn transfer_total(&self) -> f64 {
        self.per_vm.values().map(|c| c.transfer_cost).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub datacenters: BTreeMap<u32, DatacenterLedger>,
}

impl CostLedger {
    pub fn total(&self) -> f64 {
        self.datacenters.values().map(DatacenterLedger::total).sum()
    }

    /// Summary document: per-datacenter totals by component plus the per-VM
    /// breakdown.
    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            total: self.total(),
            datacenters: self
                .datacenters
                .values()
                .map(|dc| DatacenterSummaryRow {
                    dc_id: dc.dc_id,
                    creation_cost: dc.creation_total(),
                    processing_cost: dc.processing_total(),
                    transfer_cost: dc.transfer_total(),
                    total: dc.total(),
                    vms: dc
                        .per_vm
                        .iter()
                        .map(|(&vm_id, c)| VmSummaryRow {
                            vm_id,
                            charges: *c,
                            total: c.total(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub total: f64,
    pub datacenters: Vec<DatacenterSummaryRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatacenterSummaryRow {
    pub dc_id: u32,
    pub creation_cost: f64,
    pub processing_cost: f64,
    pub transfer_cost: f64,
    pub total: f64,
    pub vms: Vec<VmSummaryRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmSummaryRow {
    pub vm_id: u32,
    #[serde(flatten)]
    pub charges: VmCharges,
    pub total: f64,
}
