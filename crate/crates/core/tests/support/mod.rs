//! Test-only helpers shared by the integration suites.
#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod protocol;

use dcsim::{CompletionRecord, TaskOutcome};
use oracle::OracleRecord;

/// Largest absolute difference between simulator and oracle times, or a
/// description of the first structural mismatch.
pub fn max_deviation(sim: &[CompletionRecord], reference: &[OracleRecord]) -> Result<f64, String> {
    if sim.len() != reference.len() {
        return Err(format!(
            "{} records vs {} from the oracle",
            sim.len(),
            reference.len()
        ));
    }
    let mut worst: f64 = 0.0;
    for (s, o) in sim.iter().zip(reference) {
        if s.task_id != o.task_id || s.vm_id != o.vm_id {
            return Err(format!(
                "task {} on vm {} vs task {} on vm {}",
                s.task_id, s.vm_id, o.task_id, o.vm_id
            ));
        }
        if (s.outcome == TaskOutcome::Failed) != o.failed {
            return Err(format!(
                "task {}: outcome {:?} vs failed={}",
                s.task_id, s.outcome, o.failed
            ));
        }
        if s.host_id != o.host_id {
            return Err(format!(
                "task {}: host {:?} vs {:?}",
                s.task_id, s.host_id, o.host_id
            ));
        }
        worst = worst
            .max((s.start_t.seconds() - o.start).abs())
            .max((s.finish_t.seconds() - o.finish).abs());
    }
    Ok(worst)
}
