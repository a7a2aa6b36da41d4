//! Instantiation benchmark: build the full datacenter model for a range of
//! host counts and record wall time and memory growth.

use std::alloc::{GlobalAlloc, Layout, System};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use crate::accounting::Prices;
use crate::entities::BrokerPlan;
use crate::scenario::{build_simulation, presets, RunOptions, Scenario, ScenarioError};

pub const BENCH_HEADER: &str = "hosts,build_sec,resident_bytes";

static LIVE_BYTES: AtomicUsize = AtomicUsize::new(0);

/// System allocator wrapper that keeps a count of live heap bytes.
///
/// Install it with `#[global_allocator]` in the binary that runs the
/// benchmark; [`HeapProbe`] reads the count.
pub struct CountingAllocator;

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            LIVE_BYTES.fetch_add(layout.size(), Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE_BYTES.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            LIVE_BYTES.fetch_add(layout.size(), Ordering::Relaxed);
        }
        p
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            LIVE_BYTES.fetch_sub(layout.size(), Ordering::Relaxed);
            LIVE_BYTES.fetch_add(new_size, Ordering::Relaxed);
        }
        p
    }
}

/// A reading of process memory in bytes.
pub trait MemoryProbe {
    fn name(&self) -> &'static str;
    fn sample(&self) -> Option<u64>;
}

/// Live heap bytes as tracked by [`CountingAllocator`]. Reads zero unless
/// that allocator is installed.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeapProbe;

impl HeapProbe {
    pub fn live_bytes() -> u64 {
        LIVE_BYTES.load(Ordering::Relaxed) as u64
    }
}

impl MemoryProbe for HeapProbe {
    fn name(&self) -> &'static str {
        "heap"
    }

    fn sample(&self) -> Option<u64> {
        Some(Self::live_bytes())
    }
}

/// Resident set size from `/proc/self/status`; `None` where that file does
/// not exist. Page granularity and allocator caching make small deltas noisy.
#[derive(Clone, Copy, Debug, Default)]
pub struct RssProbe;

impl MemoryProbe for RssProbe {
    fn name(&self) -> &'static str {
        "rss"
    }

    fn sample(&self) -> Option<u64> {
        let status = std::fs::read_to_string("/proc/self/status").ok()?;
        let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
        let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
        Some(kb * 1024)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub hosts: u32,
    pub build_sec: f64,
    pub resident_bytes: u64,
}

/// Builds, without running, a registry, one datacenter of `hosts` identical
/// hosts and an idle broker for each host count, and measures the memory the
/// model holds while alive.
pub fn bench_instantiate(
    counts: &[u32],
    probe: &dyn MemoryProbe,
) -> Result<Vec<BenchRow>, ScenarioError> {
    let mut rows = Vec::with_capacity(counts.len());
    for &hosts in counts {
        if hosts == 0 {
            return Err(ScenarioError::Validation {
                path: "hosts".into(),
                message: "host counts must be positive".into(),
            });
        }
        let before = probe.sample().unwrap_or(0);
        let started = Instant::now();
        let scenario = Scenario {
            description: String::new(),
            seed: None,
            datacenters: vec![presets::section5_datacenter(hosts, Prices::default())],
            broker_plan: BrokerPlan::empty(),
        };
        let model = build_simulation(scenario, RunOptions::default())?;
        let build_sec = started.elapsed().as_secs_f64();
        let after = probe.sample().unwrap_or(0);
        drop(model);
        rows.push(BenchRow {
            hosts,
            build_sec,
            resident_bytes: after.saturating_sub(before),
        });
    }
    Ok(rows)
}

pub fn render_bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{:.6},{}", r.hosts, r.build_sec, r.resident_bytes)
            .expect("writing to a String cannot fail");
    }
    out
}
