//! Command-line front end for the bandit gossip simulator.
//!
//! ```text
//! gse --list-experiments
//! gse run --experiment p-sweep --config sim.toml --seed 7 --reps 20 --out results/
//! ```
//!
//! The optional TOML config mirrors the simulation fields; anything omitted
//! falls back to the reference settings (16 agents on a complete base, 5
//! arms, horizon 10^4, link probability 0.9, Bernoulli rewards). A `[sweep]`
//! section overrides the default sweep values of the chosen experiment.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gse_core::experiments::{
    default_sweep, run_experiment, write_outcome, ExperimentSpec, SweepKind, EXPERIMENT_KINDS,
};
use gse_core::{
    Algorithm, BanditInstance, BaseGraph, InstanceSource, RewardKind, SimConfig, Topology,
};

#[derive(Parser)]
#[command(
    name = "gse",
    about = "Deterministic multi-agent bandit simulator with gossip-based elimination"
)]
struct Cli {
    /// Print the available experiment kinds and exit.
    #[arg(long)]
    list_experiments: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment sweep and write CSV/JSONL result files.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment kind; see --list-experiments.
    #[arg(long)]
    experiment: String,
    /// TOML configuration file (reference settings apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; replication r runs on seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent replications per sweep point.
    #[arg(long, default_value_t = 20)]
    reps: u64,
    /// Output directory for <name>.csv and <name>_summary.jsonl.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// File-name stem for the outputs (defaults to the experiment kind).
    #[arg(long)]
    name: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    sweep: SweepSection,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimSection {
    topology: String,
    num_agents: usize,
    num_arms: usize,
    horizon: u64,
    link_probability: f64,
    estimate_link_probability: bool,
    algorithm: String,
    reward_kind: String,
    /// Optional fixed mean table ("N K" header then N rows of K means);
    /// otherwise a synthetic instance is drawn per replication.
    instance_file: Option<PathBuf>,
    /// Required when `topology = "custom"`: "N" header then "i j" edge lines.
    edge_list_file: Option<PathBuf>,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            topology: "complete".into(),
            num_agents: 16,
            num_arms: 5,
            horizon: 10_000,
            link_probability: 0.9,
            estimate_link_probability: false,
            algorithm: "gse".into(),
            reward_kind: "bernoulli".into(),
            instance_file: None,
            edge_list_file: None,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    p_values: Option<Vec<f64>>,
    degrees: Option<Vec<usize>>,
    topologies: Option<Vec<String>>,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if cli.list_experiments {
        for kind in EXPERIMENT_KINDS {
            println!("{kind}");
        }
        return Ok(());
    }
    match cli.command {
        Some(Command::Run(args)) => run(args),
        None => bail!("missing subcommand; try `gse run --help` or `gse --list-experiments`"),
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<ConfigFile>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ConfigFile::default(),
    };
    let base = build_sim_config(&config.sim, args.seed)?;
    let kind = apply_sweep_overrides(default_sweep(&args.experiment)?, &config.sweep)?;
    let spec = ExperimentSpec {
        name: args.name.unwrap_or_else(|| args.experiment.clone()),
        kind,
        base,
        replications: args.reps,
    };
    let outcome = run_experiment(&spec).context("running experiment")?;
    let (csv, jsonl) = write_outcome(&outcome, &args.out).context("writing results")?;
    println!("wrote {}", csv.display());
    println!("wrote {}", jsonl.display());
    if let Some(fit) = &outcome.fit {
        println!(
            "log-log fit: slope {:.4}, intercept {:.4}, R^2 {:.4}",
            fit.slope, fit.intercept, fit.r_squared
        );
    }
    Ok(())
}

fn build_sim_config(sim: &SimSection, seed: u64) -> anyhow::Result<SimConfig> {
    let topology = Topology::from_str(&sim.topology)?;
    let graph = match topology {
        Topology::Custom => {
            let path = sim
                .edge_list_file
                .as_ref()
                .context("topology \"custom\" needs edge_list_file")?;
            let graph = BaseGraph::from_edge_list_file(path)
                .with_context(|| format!("loading edge list {}", path.display()))?;
            if sim.num_agents != 0 && graph.num_agents() != sim.num_agents {
                bail!(
                    "edge list has {} agents but config says {}",
                    graph.num_agents(),
                    sim.num_agents
                );
            }
            graph
        }
        _ => BaseGraph::build(topology, sim.num_agents)?,
    };
    let reward_kind = RewardKind::from_str(&sim.reward_kind)?;
    let instance = match &sim.instance_file {
        Some(path) => {
            let table = BanditInstance::from_file(path)
                .with_context(|| format!("loading instance {}", path.display()))?
                .with_reward_kind(reward_kind)?;
            InstanceSource::Fixed(table)
        }
        None => InstanceSource::Synthetic,
    };
    Ok(SimConfig {
        graph,
        num_arms: sim.num_arms,
        horizon: sim.horizon,
        link_probability: sim.link_probability,
        estimate_link_probability: sim.estimate_link_probability,
        algorithm: Algorithm::from_str(&sim.algorithm)?,
        instance,
        reward_kind,
        master_seed: seed,
    })
}

/// Replaces an experiment's default sweep values with any matching `[sweep]`
/// entries from the config file; entries for other kinds are ignored.
fn apply_sweep_overrides(kind: SweepKind, sweep: &SweepSection) -> anyhow::Result<SweepKind> {
    Ok(match kind {
        SweepKind::PSweep { values } => SweepKind::PSweep {
            values: sweep.p_values.clone().unwrap_or(values),
        },
        SweepKind::LogLogSlope { values } => SweepKind::LogLogSlope {
            values: sweep.p_values.clone().unwrap_or(values),
        },
        SweepKind::DRegularSweep { degrees } => SweepKind::DRegularSweep {
            degrees: sweep.degrees.clone().unwrap_or(degrees),
        },
        SweepKind::TopologySweep { topologies } => match &sweep.topologies {
            Some(names) => {
                let parsed: gse_core::Result<Vec<Topology>> =
                    names.iter().map(|s| Topology::from_str(s)).collect();
                SweepKind::TopologySweep {
                    topologies: parsed?,
                }
            }
            None => SweepKind::TopologySweep { topologies },
        },
        other => other,
    })
}
