use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ScenarioError;
use crate::accounting::CostLedger;
use crate::entities::CompletionRecord;

pub const RESULTS_FILE: &str = "results.csv";
pub const LEDGER_FILE: &str = "ledger.json";
pub const RESULTS_HEADER: &str =
    "task_id,vm_id,host_id,dc_id,submit_t,start_t,finish_t,cpu_seconds,cost";

fn opt(v: Option<u32>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Results table, one row per record sorted by task id, times with six
/// decimals. Failed tasks without a host leave `host_id` empty.
pub fn render_results_csv(records: &[CompletionRecord]) -> String {
    let mut sorted: Vec<&CompletionRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.task_id);
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in sorted {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.task_id,
            r.vm_id,
            opt(r.host_id),
            opt(r.dc_id),
            r.submit_t.seconds(),
            r.start_t.seconds(),
            r.finish_t.seconds(),
            r.cpu_seconds,
            r.cost
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Writes `results.csv` and `ledger.json` into directory `dir`, creating it
/// if needed.
pub fn write_results(
    records: &[CompletionRecord],
    ledger: &CostLedger,
    dir: &Path,
) -> Result<(), ScenarioError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ScenarioError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let results = dir.join(RESULTS_FILE);
    fs::write(&results, render_results_csv(records)).map_err(io(&results))?;
    let summary = dir.join(LEDGER_FILE);
    let mut json = serde_json::to_string_pretty(&ledger.summary()).expect("ledger serializes");
    json.push('\n');
    fs::write(&summary, json).map_err(io(&summary))?;
    Ok(())
}
