use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dcsim::bench::{
    bench_instantiate, render_bench_table, CountingAllocator, HeapProbe, MemoryProbe, RssProbe,
};
use dcsim::scenario::presets::{self, Fig3Variant};
use dcsim::scenario::{render_results_csv, LEDGER_FILE, RESULTS_FILE};
use dcsim::{
    emit_scenario, parse_scenario, run_scenario, write_results, RunOptions, Scenario,
    ScenarioError, SharingPolicy,
};

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

const TRACE_FILE: &str = "trace.log";
const SCENARIO_FILE: &str = "scenario.json";

#[derive(Parser)]
#[command(
    name = "dcsim",
    version,
    about = "Discrete-event simulator for virtualized data centers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its results.
    Run {
        scenario: PathBuf,
        /// Directory for results.csv and ledger.json; the results table goes
        /// to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record every dispatched event (trace.log in --out) and print the
        /// trace hash.
        #[arg(long)]
        trace: bool,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
    /// Measure model construction time and memory for several host counts.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
        hosts: Vec<u32>,
        #[arg(long, value_enum, default_value_t = Probe::Heap)]
        probe: Probe,
    },
    /// Print the two-VM example scenario for one policy combination, then
    /// its results table.
    Fig3 {
        #[arg(long)]
        variant: Fig3Variant,
        /// Write scenario.json, results.csv and ledger.json here instead.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in scenario document.
    Preset {
        #[arg(value_enum)]
        name: PresetName,
        /// Host count for the long-task workload.
        #[arg(long, default_value_t = 10_000)]
        hosts: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Probe {
    /// Live heap bytes.
    Heap,
    /// Process resident set size.
    Rss,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetName {
    Fig3A,
    Fig3B,
    Fig3C,
    Fig3D,
    Section5Space,
    Section5Time,
}

fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text).with_context(|| format!("invalid scenario {}", path.display()))
}

fn run(scenario: &Path, out: Option<&Path>, trace: bool) -> Result<()> {
    let s = load(scenario)?;
    let outcome = run_scenario(&s, RunOptions { trace })?;
    match out {
        Some(dir) => {
            write_results(&outcome.records, &outcome.ledger, dir)?;
            if let Some(t) = &outcome.trace {
                let path = dir.join(TRACE_FILE);
                let mut text = t.lines().join("\n");
                text.push('\n');
                fs::write(&path, text).map_err(|source| ScenarioError::Io { path, source })?;
            }
            eprintln!(
                "{} tasks, simulated until {} s, total cost {:.6}; wrote {}",
                outcome.records.len(),
                outcome.end_time.seconds(),
                outcome.ledger.total(),
                dir.display()
            );
        }
        None => print!("{}", render_results_csv(&outcome.records)),
    }
    if let Some(t) = &outcome.trace {
        eprintln!("trace sha256 {} ({} events)", t.hash(), t.len());
    }
    Ok(())
}

fn validate(scenario: &Path) -> Result<()> {
    let s = load(scenario)?;
    println!(
        "ok: {} datacenters, {} hosts, {} vms, {} tasks in {} groups",
        s.datacenters.len(),
        s.host_count(),
        s.broker_plan.vm_requests.len(),
        s.broker_plan.task_count(),
        s.broker_plan.task_groups.len()
    );
    Ok(())
}

fn bench(hosts: &[u32], probe: Probe) -> Result<()> {
    let probe: &dyn MemoryProbe = match probe {
        Probe::Heap => &HeapProbe,
        Probe::Rss => &RssProbe,
    };
    let rows = bench_instantiate(hosts, probe)?;
    print!("{}", render_bench_table(&rows));
    Ok(())
}

fn fig3(variant: Fig3Variant, out: Option<&Path>) -> Result<()> {
    let s = presets::fig3(variant);
    let outcome = run_scenario(&s, RunOptions::default())?;
    match out {
        Some(dir) => {
            write_results(&outcome.records, &outcome.ledger, dir)?;
            let path = dir.join(SCENARIO_FILE);
            fs::write(&path, emit_scenario(&s))
                .map_err(|source| ScenarioError::Io { path, source })?;
            eprintln!(
                "wrote {SCENARIO_FILE}, {RESULTS_FILE} and {LEDGER_FILE} to {}",
                dir.display()
            );
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            write!(
                stdout,
                "{}\n{}",
                emit_scenario(&s),
                render_results_csv(&outcome.records)
            )?;
        }
    }
    Ok(())
}

fn preset(name: PresetName, hosts: u32) -> Scenario {
    match name {
        PresetName::Fig3A => presets::fig3(Fig3Variant::A),
        PresetName::Fig3B => presets::fig3(Fig3Variant::B),
        PresetName::Fig3C => presets::fig3(Fig3Variant::C),
        PresetName::Fig3D => presets::fig3(Fig3Variant::D),
        PresetName::Section5Space => presets::section5(SharingPolicy::SpaceShared, hosts),
        PresetName::Section5Time => presets::section5(SharingPolicy::TimeShared, hosts),
    }
}

/// 1 for schema and validation failures, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ScenarioError>() {
        Some(e) if e.is_invalid_input() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            trace,
        } => run(&scenario, out.as_deref(), trace),
        Command::Validate { scenario } => validate(&scenario),
        Command::Bench { hosts, probe } => bench(&hosts, probe),
        Command::Fig3 { variant, out } => fig3(variant, out.as_deref()),
        Command::Preset { name, hosts } => {
            print!("{}", emit_scenario(&preset(name, hosts)));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
