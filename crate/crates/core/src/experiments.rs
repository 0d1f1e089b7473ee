//! Named experiment sweeps with stable, plot-ready output.
//!
//! An [`ExperimentSpec`] couples a base [`SimConfig`] with a sweep: vary the
//! link probability, the circulant degree, the base topology, or compare
//! against the no-communication baseline. Results land in two files per
//! experiment:
//!
//! - `<name>.csv` with one row per (sweep point, replication, checkpoint)
//!   under the fixed header `experiment,seed,rep,sweep_value,checkpoint_t,
//!   cum_regret`,
//! - `<name>_summary.jsonl` with one JSON object per sweep point carrying
//!   means and standard deviations (plus a fitted slope line for the
//!   log-log experiment).
//!
//! Floats are printed with nine significant digits, so re-running an
//! identical spec reproduces both files byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{BaseGraph, Topology};
use crate::sim::{run_replicated, Algorithm, ReplicatedResult, SimConfig};

/// The experiment families the front end exposes.
#[derive(Clone, Debug)]
pub enum SweepKind {
    /// Single configuration, no sweep; rows carry the base link probability.
    RegretCurve,
    /// Sweep the link activation probability.
    PSweep { values: Vec<f64> },
    /// Sweep the base topology; the sweep value is each base's algebraic
    /// connectivity and the Petersen base always runs with 10 agents.
    TopologySweep { topologies: Vec<Topology> },
    /// Sweep the degree of a circulant base.
    DRegularSweep { degrees: Vec<usize> },
    /// Run the protocol and the independent-UCB baseline side by side.
    BaselineCompare,
    /// Like `PSweep`, plus an ordinary-least-squares fit of
    /// `ln(mean final regret)` against `ln(p)`.
    LogLogSlope { values: Vec<f64> },
}

/// Kind names accepted by the front end, in display order.
pub const EXPERIMENT_KINDS: [&str; 6] = [
    "regret-curve",
    "p-sweep",
    "topology-sweep",
    "d-regular-sweep",
    "baseline-compare",
    "loglog-slope",
];

impl SweepKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SweepKind::RegretCurve => "regret-curve",
            SweepKind::PSweep { .. } => "p-sweep",
            SweepKind::TopologySweep { .. } => "topology-sweep",
            SweepKind::DRegularSweep { .. } => "d-regular-sweep",
            SweepKind::BaselineCompare => "baseline-compare",
            SweepKind::LogLogSlope { .. } => "loglog-slope",
        }
    }
}

/// Default sweep for a kind name, using the reference experiment settings.
pub fn default_sweep(kind: &str) -> Result<SweepKind> {
    match kind {
        "regret-curve" => Ok(SweepKind::RegretCurve),
        "p-sweep" => Ok(SweepKind::PSweep {
            values: default_p_values(),
        }),
        "topology-sweep" => Ok(SweepKind::TopologySweep {
            topologies: default_topologies(),
        }),
        "d-regular-sweep" => Ok(SweepKind::DRegularSweep {
            degrees: default_degrees(),
        }),
        "baseline-compare" => Ok(SweepKind::BaselineCompare),
        "loglog-slope" => Ok(SweepKind::LogLogSlope {
            values: default_loglog_p_values(),
        }),
        other => Err(Error::ParseError(format!(
            "unknown experiment kind {other:?} (expected one of {EXPERIMENT_KINDS:?})"
        ))),
    }
}

pub fn default_p_values() -> Vec<f64> {
    vec![0.3, 0.6, 0.9]
}

pub fn default_degrees() -> Vec<usize> {
    vec![2, 4, 6, 8, 10, 12, 14]
}

/// Eight evenly spaced link probabilities in `[0.04, 0.18]`.
pub fn default_loglog_p_values() -> Vec<f64> {
    (0..8).map(|i| (4 + 2 * i) as f64 / 100.0).collect()
}

pub fn default_topologies() -> Vec<Topology> {
    vec![Topology::Complete, Topology::Grid2D, Topology::Petersen]
}

/// One experiment: a base configuration plus a sweep over it.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    /// Used in file names and the CSV `experiment` column; restricted to
    /// `[A-Za-z0-9_-]` so the CSV stays trivially parseable.
    pub name: String,
    pub kind: SweepKind,
    pub base: SimConfig,
    pub replications: u64,
}

/// Results of one sweep point.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub sweep_value: f64,
    /// Human-readable point description for the summary file.
    pub label: String,
    pub result: ReplicatedResult,
}

/// Ordinary-least-squares fit of `ln(regret)` on `ln(p)`.
#[derive(Clone, Copy, Debug)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Everything an experiment produced, ready to serialize.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub name: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
    pub fit: Option<FitSummary>,
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(Error::InvalidSpec(format!(
            "experiment name {name:?} must be nonempty [A-Za-z0-9_-]"
        )));
    }
    Ok(())
}

/// Executes the sweep. Sweep points run in order; replications within each
/// point parallelize, and results are independent of the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    validate_name(&spec.name)?;
    let reps = spec.replications;
    let mut points = Vec::new();
    match &spec.kind {
        SweepKind::RegretCurve => {
            let p = spec.base.link_probability;
            points.push(SweepPoint {
                sweep_value: p,
                label: format!("p={p}"),
                result: run_replicated(&spec.base, reps)?,
            });
        }
        SweepKind::PSweep { values } | SweepKind::LogLogSlope { values } => {
            if values.is_empty() {
                return Err(Error::InvalidSpec("empty probability sweep".into()));
            }
            for &p in values {
                let mut cfg = spec.base.clone();
                cfg.link_probability = p;
                points.push(SweepPoint {
                    sweep_value: p,
                    label: format!("p={p}"),
                    result: run_replicated(&cfg, reps)?,
                });
            }
        }
        SweepKind::TopologySweep { topologies } => {
            if topologies.is_empty() {
                return Err(Error::InvalidSpec("empty topology sweep".into()));
            }
            for &topology in topologies {
                // The Petersen graph only exists on 10 nodes; other bases
                // keep the configured agent count.
                let n = match topology {
                    Topology::Petersen => 10,
                    _ => spec.base.graph.num_agents(),
                };
                let graph = BaseGraph::build(topology, n)?;
                let lambda = graph.algebraic_connectivity().lambda;
                let mut cfg = spec.base.clone();
                cfg.graph = graph;
                points.push(SweepPoint {
                    sweep_value: lambda,
                    label: topology.to_string(),
                    result: run_replicated(&cfg, reps)?,
                });
            }
        }
        SweepKind::DRegularSweep { degrees } => {
            if degrees.is_empty() {
                return Err(Error::InvalidSpec("empty degree sweep".into()));
            }
            for &d in degrees {
                let graph =
                    BaseGraph::build(Topology::CirculantDRegular(d), spec.base.graph.num_agents())?;
                let mut cfg = spec.base.clone();
                cfg.graph = graph;
                points.push(SweepPoint {
                    sweep_value: d as f64,
                    label: format!("d={d}"),
                    result: run_replicated(&cfg, reps)?,
                });
            }
        }
        SweepKind::BaselineCompare => {
            for (sweep_value, algorithm) in [(0.0, Algorithm::Gse), (1.0, Algorithm::UcbBaseline)]
            {
                let mut cfg = spec.base.clone();
                cfg.algorithm = algorithm;
                points.push(SweepPoint {
                    sweep_value,
                    label: algorithm.to_string(),
                    result: run_replicated(&cfg, reps)?,
                });
            }
        }
    }
    let fit = if matches!(spec.kind, SweepKind::LogLogSlope { .. }) {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .map(|pt| (pt.sweep_value, pt.result.mean_final_regret))
            .collect();
        let (slope, intercept, r_squared) = fit_loglog_slope(&pts)?;
        Some(FitSummary {
            slope,
            intercept,
            r_squared,
        })
    } else {
        None
    };
    Ok(ExperimentOutcome {
        name: spec.name.clone(),
        seed: spec.base.master_seed,
        points,
        fit,
    })
}

/// Ordinary least squares of `ln(y)` on `ln(x)`.
///
/// Returns `(slope, intercept, r_squared)`. `r_squared` is defined as 1 when
/// the fit is exact and the responses have no variance (two points, or any
/// number of points on a horizontal line).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::DegenerateInput(
            "log-log fit needs at least two points".into(),
        ));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::DegenerateInput(format!(
            "log-log fit needs positive coordinates, got ({x}, {y})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let x_bar = logs.iter().map(|&(x, _)| x).sum::<f64>() / m;
    let y_bar = logs.iter().map(|&(_, y)| y).sum::<f64>() / m;
    let s_xx: f64 = logs.iter().map(|&(x, _)| (x - x_bar).powi(2)).sum();
    let s_xy: f64 = logs.iter().map(|&(x, y)| (x - x_bar) * (y - y_bar)).sum();
    if s_xx == 0.0 {
        return Err(Error::DegenerateInput(
            "log-log fit needs at least two distinct sweep values".into(),
        ));
    }
    let slope = s_xy / s_xx;
    let intercept = y_bar - slope * x_bar;
    let ss_tot: f64 = logs.iter().map(|&(_, y)| (y - y_bar).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|&(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok((slope, intercept, r_squared))
}

/// Writes `<name>.csv` and `<name>_summary.jsonl` under `dir`.
pub fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", outcome.name));
    let jsonl_path = dir.join(format!("{}_summary.jsonl", outcome.name));
    write_csv(outcome, &csv_path)?;
    write_summary(outcome, &jsonl_path)?;
    Ok((csv_path, jsonl_path))
}

/// One row per (sweep point, replication, checkpoint); floats carry nine
/// significant digits so files are byte-stable across identical runs.
pub fn write_csv(outcome: &ExperimentOutcome, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "experiment,seed,rep,sweep_value,checkpoint_t,cum_regret")?;
    for point in &outcome.points {
        for trace in &point.result.traces {
            for (&t, &regret) in trace.checkpoints.iter().zip(&trace.global_curve) {
                writeln!(
                    w,
                    "{},{},{},{:.8e},{},{:.8e}",
                    outcome.name, outcome.seed, trace.rep, point.sweep_value, t, regret
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per sweep point; a final object carries the log-log fit
/// when present. Keys serialize sorted, so files are byte-stable.
pub fn write_summary(outcome: &ExperimentOutcome, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for point in &outcome.points {
        let row = json!({
            "experiment": outcome.name,
            "seed": outcome.seed,
            "label": point.label,
            "sweep_value": point.sweep_value,
            "replications": point.result.traces.len(),
            "mean_final_regret": point.result.mean_final_regret,
            "std_final_regret": point.result.std_final_regret,
            "checkpoints": point.result.checkpoints,
            "mean_curve": point.result.mean_curve,
        });
        writeln!(w, "{row}")?;
    }
    if let Some(fit) = &outcome.fit {
        let row = json!({
            "experiment": outcome.name,
            "fit_slope": fit.slope,
            "fit_intercept": fit.intercept,
            "fit_r_squared": fit.r_squared,
        });
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}
