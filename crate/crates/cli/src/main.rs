//! `dspe`: drive the edge-cloud storage simulator from the command line.
//!
//! Subcommands mirror the experiment workflow: generate a topology or a
//! trace, run one policy, compare all configured policies, or sweep one axis.
//! Every run is fully determined by the config file plus `--seed`.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dspe_core::codec;
use dspe_core::engine::{Catalog, EcSplit, PolicyKind, PolicySpec, SimOptions, SimSetup};
use dspe_core::experiments::{
    emit_reports, run_experiment, ExperimentConfig, RunPoint, RunRecord, Sweep,
};
use dspe_core::storage::dump_stores;
use dspe_core::topology::{generate_topology, Topology, TopologyConfig};
use dspe_core::workload::{generate_trace, save_trace_csv, TraceConfig};
use dspe_core::Simulation;

#[derive(Parser)]
#[command(
    name = "dspe",
    about = "Deterministic simulator of an erasure-coded, cooperatively cached edge-cloud storage system",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON; defaults to the built-in desk-scale profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base master seed (replicate i runs with seed + i).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicate seeds.
    #[arg(long)]
    replicates: Option<u32>,
    /// Output directory for summary.csv, aggregate.csv and detail/.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::desk_default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(replicates) = self.replicates {
            cfg.replicates = replicates;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random topology and write it as JSON.
    GenTopology {
        /// Topology config JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic trace and write it as CSV.
    GenTrace {
        /// Trace config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Topology JSON providing the AP id range.
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a single policy for one seed.
    Run {
        /// DSPE, E, DSP or DCC.
        #[arg(long)]
        policy: String,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Also write the final store contents per run.
        #[arg(long)]
        dump_stores: bool,
    },
    /// Run every configured policy across the replicate seeds.
    Compare {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Sweep one axis across the replicate seeds.
    Sweep {
        /// alpha, ec, priority or common.
        #[arg(long)]
        axis: String,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Codec utilities.
    #[command(subcommand)]
    Codec(CodecCommand),
}

#[derive(Subcommand)]
enum CodecCommand {
    /// Encode a random payload and reconstruct it from every erasure pattern
    /// of k blocks.
    Roundtrip {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        /// Payload size in bytes.
        #[arg(long, default_value_t = 4096)]
        size: usize,
    },
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::GenTopology { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: TopologyConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", config.display()))?;
            let topo = generate_topology(&cfg)?;
            fs::write(&out, topo.to_json()).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote topology with {} ESs, {} APs to {}",
                topo.num_es(),
                topo.num_aps(),
                out.display()
            );
        }
        Command::GenTrace {
            config,
            topology,
            out,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: TraceConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", config.display()))?;
            let topo_text = fs::read_to_string(&topology)
                .with_context(|| format!("reading {}", topology.display()))?;
            let topo = Topology::from_json(&topo_text)?;
            let trace = generate_trace(&cfg, &topo)?;
            save_trace_csv(&out, &trace)?;
            println!("wrote {} requests to {}", trace.len(), out.display());
        }
        Command::Run {
            policy,
            exp,
            dump_stores: dump,
        } => {
            let cfg = exp.load()?;
            let kind = PolicyKind::parse(&policy)?;
            let record = run_single(&cfg, kind, cfg.seed, dump)?;
            emit_reports(std::slice::from_ref(&record), &cfg.output_dir)?;
            println!(
                "{}: revenue {} ({}/{} served) -> {}",
                record.report.policy,
                record.report.total_revenue,
                record.report.served_count,
                record.report.request_count,
                cfg.output_dir.display()
            );
        }
        Command::Compare { exp } => {
            let mut cfg = exp.load()?;
            cfg.sweep = Sweep::None;
            let records = run_experiment(&cfg)?;
            emit_reports(&records, &cfg.output_dir)?;
            print_means(&records);
            println!("wrote {} runs to {}", records.len(), cfg.output_dir.display());
        }
        Command::Sweep { axis, exp } => {
            let mut cfg = exp.load()?;
            cfg.sweep = resolve_sweep(&axis, cfg.sweep)?;
            let records = run_experiment(&cfg)?;
            emit_reports(&records, &cfg.output_dir)?;
            println!(
                "swept {} over {} runs -> {}",
                cfg.sweep.axis_name(),
                records.len(),
                cfg.output_dir.display()
            );
        }
        Command::Codec(CodecCommand::Roundtrip { k, m, size }) => {
            codec_roundtrip(k, m, size)?;
        }
    }
    Ok(())
}

/// Runs one (policy, seed) point of the experiment config, optionally
/// dumping the final store contents next to the reports.
fn run_single(
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    seed: u64,
    dump: bool,
) -> Result<RunRecord> {
    let single = ExperimentConfig {
        policies: vec![kind],
        replicates: 1,
        seed,
        sweep: Sweep::None,
        ..cfg.clone()
    };
    if !dump {
        let mut records = dspe_core::experiments::run_compare(&single)?;
        return Ok(records.remove(0));
    }
    // Rebuild the same point by hand so the live simulation is accessible
    // for the dump.
    let mut records = dspe_core::experiments::run_compare(&single)?;
    let record = records.remove(0);
    let point: &RunPoint = &record.point;
    let mut topo_cfg = single.topology_cfg.clone();
    topo_cfg.seed = point.seed;
    (topo_cfg.gamma_a, topo_cfg.gamma_e, topo_cfg.gamma_c) = point.gammas;
    let topo = generate_topology(&topo_cfg)?;
    let mut trace_cfg = single.trace_cfg.clone();
    trace_cfg.seed = point.seed;
    let trace = generate_trace(&trace_cfg, &topo)?;
    let setup = SimSetup {
        topo: &topo,
        policy: PolicySpec::new(kind, single.storage_cfg.alpha),
        ec: single.ec,
        storage: single.storage_cfg,
        catalog: Catalog {
            num_contents: trace_cfg.num_contents,
            zipf_s: trace_cfg.zipf_s,
        },
        opts: SimOptions {
            replace_on_deadline_miss: single.replace_on_deadline_miss,
        },
    };
    let mut sim = Simulation::new(setup, point.seed)?;
    let report = sim.run_trace(&trace);
    debug_assert_eq!(report.total_revenue, record.report.total_revenue);
    let dump_path = single.output_dir.join(format!("{}.stores.json", point.run_id()));
    fs::create_dir_all(&single.output_dir)
        .with_context(|| format!("creating {}", single.output_dir.display()))?;
    let doc = serde_json::to_string_pretty(&dump_stores(sim.stores()))?;
    fs::write(&dump_path, doc).with_context(|| format!("writing {}", dump_path.display()))?;
    println!("wrote store dump to {}", dump_path.display());
    Ok(record)
}

fn resolve_sweep(axis: &str, configured: Sweep) -> Result<Sweep> {
    let axis = axis.to_ascii_lowercase();
    if configured.axis_name() == axis {
        return Ok(configured);
    }
    if !matches!(configured, Sweep::None) {
        bail!(
            "--axis {axis} does not match the config's sweep axis {}",
            configured.axis_name()
        );
    }
    // No sweep in the config: use the default value lists.
    Ok(match axis.as_str() {
        "alpha" => Sweep::Alpha((0..=10).map(|i| i as f64 / 10.0).collect()),
        "ec" => Sweep::Ec(vec![
            EcSplit { k: 10, m: 4 },
            EcSplit { k: 10, m: 2 },
            EcSplit { k: 8, m: 4 },
            EcSplit { k: 14, m: 4 },
        ]),
        "priority" => Sweep::Priority(vec![
            (70, 20, 10),
            (50, 30, 20),
            (30, 30, 40),
            (10, 20, 70),
        ]),
        "common" => Sweep::Common(vec![0.0, 0.2, 0.4, 0.6, 0.8, 0.9]),
        other => bail!("unknown sweep axis {other:?} (expected alpha, ec, priority or common)"),
    })
}

fn print_means(records: &[RunRecord]) {
    for (policy, mean) in dspe_core::experiments::mean_revenue_by_policy(records) {
        println!("{policy:>5}: mean revenue {mean:.1}");
    }
}

fn codec_roundtrip(k: usize, m: usize, size: usize) -> Result<()> {
    let params = codec::make_params(k, m)?;
    let mut state = 0x9e3779b97f4a7c15u64;
    let payload: Vec<u8> = (0..size)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state as u8
        })
        .collect();
    let blocks = codec::encode(&params, 0, &payload)?;
    println!(
        "EC({k},{m}): {} blocks of {} bytes each, overhead {:.4}",
        blocks.len(),
        blocks[0].payload.len(),
        codec::storage_overhead(k, m)?
    );
    let mut checked = 0usize;
    // Drop every combination of m blocks and reconstruct from the rest.
    let mut drop_set: Vec<usize> = (0..m).collect();
    loop {
        let keep: Vec<codec::CodedBlock> = blocks
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop_set.contains(i))
            .map(|(_, b)| b.clone())
            .collect();
        let restored = codec::reconstruct(&params, &keep)?;
        anyhow::ensure!(restored == payload, "mismatch after dropping {drop_set:?}");
        checked += 1;
        // next combination
        let n = k + m;
        let mut i = m;
        loop {
            if i == 0 {
                println!("reconstructed exactly from all {checked} erasure patterns");
                return Ok(());
            }
            i -= 1;
            if drop_set[i] != i + n - m {
                drop_set[i] += 1;
                for j in i + 1..m {
                    drop_set[j] = drop_set[j - 1] + 1;
                }
                break;
            }
        }
    }
}
