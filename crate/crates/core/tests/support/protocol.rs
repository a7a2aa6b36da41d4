//! Message census over a recorded trace.

use std::collections::BTreeMap;

use dcsim::Trace;

#[derive(Debug, Default)]
pub struct Census {
    pub create_vm: BTreeMap<u32, u32>,
    pub vm_ack: BTreeMap<u32, u32>,
    pub task_done: BTreeMap<u32, u32>,
}

fn first_number_after(line: &str, key: &str) -> u32 {
    let rest = &line[line
        .find(key)
        .unwrap_or_else(|| panic!("{key} missing in {line}"))
        + key.len()..];
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().unwrap()
}

/// Counts `CreateVm` and `VmAck` per VM and `TaskDone` per task.
pub fn census(trace: &Trace) -> Census {
    let mut out = Census::default();
    for line in trace.lines() {
        // `<time> #<seq> <source>-><target> <tag> <payload>`
        let mut fields = line.splitn(5, ' ');
        let tag = fields.nth(3).unwrap_or_default();
        let payload = fields.next().unwrap_or_default();
        let (map, key) = match tag {
            "CreateVm" => (&mut out.create_vm, "vm_id: "),
            "VmAck" => (&mut out.vm_ack, "vm_id: "),
            "TaskDone" => (&mut out.task_done, "task_id: "),
            _ => continue,
        };
        *map.entry(first_number_after(payload, key)).or_default() += 1;
    }
    out
}
