//! Round-synchronous simulation engine.
//!
//! A replication owns its full random state: independent generator streams
//! for graph activations, instance synthesis, burn-in arm choices, and one
//! reward stream per agent, all derived from `master_seed + rep`. Two runs
//! of the same configuration therefore produce bit-identical traces, and
//! replications may execute on any number of threads without affecting
//! results because outputs are reassembled in replication order.
//!
//! Every run self-checks the protocol invariants on the fly and panics on
//! violation rather than producing silently wrong data:
//!
//! - active-set pull counts within one agent never spread by more than 1,
//! - pull counts of one arm across agents stay within the propagation
//!   envelope derived from the true link probability,
//! - the agent average of the gossip estimates telescopes to the agent
//!   average of the local means after every mixing step,
//! - cumulative group regret equals the sum of individual regrets and, at
//!   the end, the gap-weighted sum of all pull counts.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::agent::{gossip_update, intersect_active_sets, AgentState, GseParams};
use crate::burnin::BurnInState;
use crate::environment::{BanditInstance, RewardKind};
use crate::error::{Error, Result};
use crate::graph::{sample_comm_graph, BaseGraph, Topology};
use crate::streams;

/// Relative tolerance for regret bookkeeping identities; sums over up to
/// `10^6` rounds reassociate floating-point additions, so exact equality is
/// not available but one part in `10^9` is.
const IDENTITY_RTOL: f64 = 1e-9;

/// Absolute tolerance for the gossip telescoping identity.
const TELESCOPE_ATOL: f64 = 1e-9;

/// Which decision rule the agents run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Gossip successive elimination over the sampled communication graph.
    Gse,
    /// Independent per-agent UCB1 without any communication; the baseline.
    UcbBaseline,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Gse => write!(f, "gse"),
            Algorithm::UcbBaseline => write!(f, "ucb"),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gse" => Ok(Algorithm::Gse),
            "ucb" => Ok(Algorithm::UcbBaseline),
            other => Err(Error::ParseError(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Where the reward-mean table comes from.
#[derive(Clone, Debug)]
pub enum InstanceSource {
    /// Draw a fresh scaled-linear table per replication from the instance
    /// stream; the configured reward kind applies.
    Synthetic,
    /// Use this exact table (and its reward kind) in every replication.
    Fixed(BanditInstance),
}

/// Full description of one simulation.
#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Base communication topology; the agent count is its node count.
    pub graph: BaseGraph,
    pub num_arms: usize,
    /// Total number of rounds, including any burn-in.
    pub horizon: u64,
    /// True per-round, per-edge activation probability.
    pub link_probability: f64,
    /// When set, agents first estimate the activation probability by
    /// watching a link, then run the protocol on their own conservative
    /// estimates instead of the true value.
    pub estimate_link_probability: bool,
    pub algorithm: Algorithm,
    pub instance: InstanceSource,
    /// Reward noise for synthetic instances (fixed tables carry their own).
    pub reward_kind: RewardKind,
    pub master_seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.horizon < 10 {
            return Err(Error::InvalidSpec(
                "horizon must be at least 10 rounds".into(),
            ));
        }
        if self.num_arms < 2 {
            return Err(Error::InvalidSpec("need at least two arms".into()));
        }
        if !(self.link_probability > 0.0 && self.link_probability <= 1.0) {
            return Err(Error::InvalidProbability(self.link_probability));
        }
        if let InstanceSource::Fixed(inst) = &self.instance {
            if inst.num_agents() != self.graph.num_agents() || inst.num_arms() != self.num_arms {
                return Err(Error::DimensionMismatch(format!(
                    "instance is {}x{}, config wants {}x{}",
                    inst.num_agents(),
                    inst.num_arms(),
                    self.graph.num_agents(),
                    self.num_arms
                )));
            }
        }
        Ok(())
    }

    /// Checkpoint schedule: cumulative regret is recorded at `i * T / 10`.
    pub fn checkpoints(&self) -> Vec<u64> {
        (1..=10).map(|i| i * self.horizon / 10).collect()
    }
}

/// Everything one replication reports back.
#[derive(Clone, Debug)]
pub struct RegretTrace {
    pub rep: u64,
    /// Rounds at which `global_curve` samples the cumulative group regret.
    pub checkpoints: Vec<u64>,
    pub global_curve: Vec<f64>,
    pub final_global_regret: f64,
    /// Final cumulative regret per agent.
    pub individual_regret: Vec<f64>,
    /// Pulls per agent per arm over the whole run, burn-in included.
    pub total_pulls: Vec<Vec<u64>>,
    /// Rounds spent estimating the link probability (0 when disabled).
    pub burn_in_rounds: u64,
    /// Per-agent conservative link-probability estimates (empty when the
    /// burn-in is disabled or did not finish within the horizon).
    pub estimated_p: Vec<f64>,
    /// Times the elimination emptiness guard fired (expected 0).
    pub elimination_guard_count: u64,
    /// Times an empty neighborhood intersection kept an agent's own set.
    pub intersection_guard_count: u64,
    /// Confidence checks `|z - global mean| <= c` that failed, over all
    /// (round, agent, active arm) triples after each gossip step.
    pub confidence_violations: u64,
    pub confidence_checks: u64,
    /// Protocol rounds in which at least one confidence check failed, and
    /// the number of protocol rounds checked (horizon minus burn-in).
    pub violation_rounds: u64,
    pub protocol_rounds: u64,
    /// Cumulative group regret at `T/4`, `T/2`, `3T/4`, and `T`.
    pub quartile_regret: [f64; 4],
    /// Arms still active per agent when the horizon was reached.
    pub final_active_sets: Vec<Vec<usize>>,
}

impl RegretTrace {
    /// Fraction of (round, agent, active arm) confidence checks that failed.
    pub fn violation_fraction(&self) -> f64 {
        if self.confidence_checks == 0 {
            0.0
        } else {
            self.confidence_violations as f64 / self.confidence_checks as f64
        }
    }

    /// Fraction of protocol rounds with at least one failed confidence check.
    pub fn violation_round_fraction(&self) -> f64 {
        if self.protocol_rounds == 0 {
            0.0
        } else {
            self.violation_rounds as f64 / self.protocol_rounds as f64
        }
    }

    /// Group regret accrued in the last quarter of the horizon.
    pub fn late_quarter_regret(&self) -> f64 {
        self.quartile_regret[3] - self.quartile_regret[2]
    }

    /// Group regret accrued in the first quarter of the horizon.
    pub fn early_quarter_regret(&self) -> f64 {
        self.quartile_regret[0]
    }
}

/// Records cumulative regret at the four quarter marks of the horizon.
struct QuartileMarks {
    at: [u64; 4],
    values: [f64; 4],
    next: usize,
}

impl QuartileMarks {
    fn new(horizon: u64) -> Self {
        QuartileMarks {
            at: [horizon / 4, horizon / 2, 3 * horizon / 4, horizon],
            values: [0.0; 4],
            next: 0,
        }
    }

    fn record(&mut self, round: u64, cumulative: f64) {
        while self.next < 4 && self.at[self.next] == round {
            self.values[self.next] = cumulative;
            self.next += 1;
        }
    }

    /// Fills marks never reached (possible only when a run is cut short).
    fn finish(mut self, cumulative: f64) -> [f64; 4] {
        while self.next < 4 {
            self.values[self.next] = cumulative;
            self.next += 1;
        }
        self.values
    }
}

/// Aggregate over replications, assembled in replication order.
#[derive(Clone, Debug)]
pub struct ReplicatedResult {
    pub checkpoints: Vec<u64>,
    pub traces: Vec<RegretTrace>,
    /// Mean cumulative group regret at each checkpoint.
    pub mean_curve: Vec<f64>,
    pub mean_final_regret: f64,
    /// Sample standard deviation (ddof 1) of the final group regret;
    /// zero for a single replication.
    pub std_final_regret: f64,
}

/// Runs replication `rep` of `config` (seeded by `master_seed + rep`).
pub fn run_replication(config: &SimConfig, rep: u64) -> Result<RegretTrace> {
    config.validate()?;
    let rep_seed = config.master_seed.wrapping_add(rep);
    let instance = match &config.instance {
        InstanceSource::Fixed(inst) => inst.clone(),
        InstanceSource::Synthetic => {
            let mut rng = streams::instance_stream(rep_seed);
            BanditInstance::synthetic(config.graph.num_agents(), config.num_arms, &mut rng)
                .with_reward_kind(config.reward_kind)?
        }
    };
    match config.algorithm {
        Algorithm::Gse => run_gse(config, &instance, rep, rep_seed),
        Algorithm::UcbBaseline => run_ucb(config, &instance, rep, rep_seed),
    }
}

/// Runs `reps` replications (in parallel when a thread pool is available)
/// and aggregates. Results do not depend on the thread count.
pub fn run_replicated(config: &SimConfig, reps: u64) -> Result<ReplicatedResult> {
    assert!(reps >= 1, "need at least one replication");
    let traces: Vec<RegretTrace> = (0..reps)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect::<Result<Vec<_>>>()?;
    let checkpoints = config.checkpoints();
    let mut mean_curve = vec![0.0f64; checkpoints.len()];
    let mut finals = Vec::with_capacity(traces.len());
    for trace in &traces {
        for (slot, &v) in mean_curve.iter_mut().zip(trace.global_curve.iter()) {
            *slot += v;
        }
        finals.push(trace.final_global_regret);
    }
    let m = traces.len() as f64;
    for slot in mean_curve.iter_mut() {
        *slot /= m;
    }
    let mean_final = finals.iter().sum::<f64>() / m;
    let std_final = if finals.len() < 2 {
        0.0
    } else {
        let ss: f64 = finals.iter().map(|v| (v - mean_final).powi(2)).sum();
        (ss / (m - 1.0)).sqrt()
    };
    Ok(ReplicatedResult {
        checkpoints,
        traces,
        mean_curve,
        mean_final_regret: mean_final,
        std_final_regret: std_final,
    })
}

fn record_checkpoints(
    checkpoints: &[u64],
    next: &mut usize,
    round: u64,
    cumulative: f64,
    curve: &mut Vec<f64>,
) {
    while *next < checkpoints.len() && checkpoints[*next] == round {
        curve.push(cumulative);
        *next += 1;
    }
}

fn run_gse(
    config: &SimConfig,
    instance: &BanditInstance,
    rep: u64,
    rep_seed: u64,
) -> Result<RegretTrace> {
    let g = &config.graph;
    let n = g.num_agents();
    let k = config.num_arms;
    let horizon = config.horizon;
    let p = config.link_probability;
    let lambda = g.algebraic_connectivity().lambda;
    // The tighter per-edge disagreement allowance is valid on complete bases.
    let refined = g.topology() == Topology::Complete;

    let mut graph_rng = streams::graph_stream(rep_seed);
    let mut reward_rngs: Vec<ChaCha12Rng> =
        (0..n).map(|i| streams::reward_stream(rep_seed, i)).collect();

    let gaps = instance.gaps();
    let global_means = instance.global_means();
    let checkpoints = config.checkpoints();
    let mut curve = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0usize;

    let mut per_agent_regret = vec![0.0f64; n];
    let mut global_regret = 0.0f64;
    let mut total_pulls = vec![vec![0u64; k]; n];
    let mut quartiles = QuartileMarks::new(horizon);
    let mut round = 0u64;

    // ---- burn-in: estimate the link probability by watching a link ----
    let mut burn_in_rounds = 0u64;
    let mut estimated_p: Vec<f64> = Vec::new();
    if config.estimate_link_probability {
        let t = horizon as f64;
        let delta = 2.0 / (t * t);
        let mut burnin_rng = streams::burnin_stream(rep_seed);
        let mut estimators: Vec<BurnInState> = (0..n)
            .map(|i| {
                let watched = *g
                    .neighbors(i)
                    .iter()
                    .min()
                    .expect("connected graphs have no isolated nodes");
                BurnInState::new(watched, delta)
            })
            .collect();
        let mut unstopped = n;
        // Everyone keeps pulling uniformly at random until the *last* agent
        // stops, so the protocol phase starts synchronously. Burn-in pulls
        // pay regret but never touch the elimination statistics, so no
        // reward needs to be drawn for them.
        while unstopped > 0 && round < horizon {
            round += 1;
            let snap = sample_comm_graph(g, p, round, &mut graph_rng)?;
            let mut round_regret = 0.0;
            for (pulls, agent_regret) in total_pulls.iter_mut().zip(per_agent_regret.iter_mut()) {
                let arm = burnin_rng.gen_range(0..k);
                pulls[arm] += 1;
                *agent_regret += gaps[arm];
                round_regret += gaps[arm];
            }
            global_regret += round_regret;
            for (i, est) in estimators.iter_mut().enumerate() {
                if !est.is_stopped() && est.step(snap.edge_active(i, est.watched_neighbor()))? {
                    unstopped -= 1;
                }
            }
            record_checkpoints(&checkpoints, &mut next_cp, round, global_regret, &mut curve);
            quartiles.record(round, global_regret);
        }
        burn_in_rounds = round;
        if unstopped > 0 {
            // Horizon exhausted before every agent stopped; report the
            // burn-in-only run rather than starting the protocol ragged.
            while curve.len() < checkpoints.len() {
                curve.push(global_regret);
            }
            return Ok(RegretTrace {
                rep,
                checkpoints,
                global_curve: curve,
                final_global_regret: global_regret,
                individual_regret: per_agent_regret,
                total_pulls,
                burn_in_rounds,
                estimated_p: Vec::new(),
                elimination_guard_count: 0,
                intersection_guard_count: 0,
                confidence_violations: 0,
                confidence_checks: 0,
                violation_rounds: 0,
                protocol_rounds: 0,
                quartile_regret: quartiles.finish(global_regret),
                final_active_sets: (0..n).map(|_| (0..k).collect()).collect(),
            });
        }
        estimated_p = estimators
            .iter()
            .map(|e| e.finish())
            .collect::<Result<Vec<f64>>>()?;
    }

    // ---- protocol parameters (per agent when estimates are in play) ----
    let params: Vec<GseParams> = if estimated_p.is_empty() {
        vec![GseParams::new(horizon, n, k, p, lambda, refined)?; n]
    } else {
        estimated_p
            .iter()
            .map(|&ph| GseParams::new(horizon, n, k, ph, lambda, refined))
            .collect::<Result<Vec<_>>>()?
    };
    // The cross-agent balance envelope follows the true link probability.
    let balance_bound = GseParams::new(horizon, n, k, p, lambda, refined)?.disagreement_bound();

    let mut states: Vec<AgentState> = (0..n).map(|i| AgentState::new(i, k)).collect();
    let mut elimination_guards = 0u64;
    let mut intersection_guards = 0u64;
    let mut violations = 0u64;
    let mut checks = 0u64;
    let mut violation_rounds = 0u64;
    let mut protocol_rounds = 0u64;

    while round < horizon {
        protocol_rounds += 1;
        round += 1;
        let snap = sample_comm_graph(g, p, round, &mut graph_rng)?;

        // Phase 1: pull least-pulled active arms, update local means.
        let mut round_regret = 0.0;
        for i in 0..n {
            let arm = states[i].select_arm()?;
            let reward = instance.sample_reward(i, arm, &mut reward_rngs[i])?;
            states[i].update_local(arm, reward)?;
            total_pulls[i][arm] += 1;
            per_agent_regret[i] += gaps[arm];
            round_regret += gaps[arm];
        }
        global_regret += round_regret;
        for s in &states {
            let mut lo = u64::MAX;
            let mut hi = 0u64;
            for a in s.active_arms() {
                lo = lo.min(s.pull_count(a));
                hi = hi.max(s.pull_count(a));
            }
            assert!(
                hi - lo <= 1,
                "round {round}: agent {} active-set pull spread {} exceeds 1",
                s.id(),
                hi - lo
            );
        }

        // Phase 2: gossip mixing.
        gossip_update(&mut states, &snap)?;
        for a in 0..k {
            let z_bar: f64 = states.iter().map(|s| s.global_estimate(a)).sum::<f64>() / n as f64;
            let m_bar: f64 = states.iter().map(|s| s.local_mean(a)).sum::<f64>() / n as f64;
            assert!(
                (z_bar - m_bar).abs() <= TELESCOPE_ATOL,
                "round {round}: arm {a} gossip mean {z_bar} drifted from local mean {m_bar}"
            );
        }
        let mut round_violated = false;
        for (i, s) in states.iter().enumerate() {
            for a in s.active_arms() {
                checks += 1;
                let c = params[i].confidence_radius(s.pull_count(a));
                if (s.global_estimate(a) - global_means[a]).abs() > c {
                    violations += 1;
                    round_violated = true;
                }
            }
        }
        if round_violated {
            violation_rounds += 1;
        }

        // Phase 3: confidence-bound elimination.
        for (i, s) in states.iter_mut().enumerate() {
            if s.eliminate(&params[i]) {
                elimination_guards += 1;
            }
        }

        // Phase 4: intersect active sets with current neighbors.
        intersection_guards += intersect_active_sets(&mut states, &snap)?;

        for a in 0..k {
            let mut lo = u64::MAX;
            let mut hi = 0u64;
            for s in &states {
                lo = lo.min(s.pull_count(a));
                hi = hi.max(s.pull_count(a));
            }
            assert!(
                hi - lo <= balance_bound,
                "round {round}: arm {a} pull counts spread {} past the envelope {balance_bound}",
                hi - lo
            );
        }

        record_checkpoints(&checkpoints, &mut next_cp, round, global_regret, &mut curve);
        quartiles.record(round, global_regret);
    }

    finish_trace(
        rep,
        checkpoints,
        curve,
        global_regret,
        per_agent_regret,
        total_pulls,
        gaps,
        RunExtras {
            burn_in_rounds,
            estimated_p,
            elimination_guard_count: elimination_guards,
            intersection_guard_count: intersection_guards,
            confidence_violations: violations,
            confidence_checks: checks,
            violation_rounds,
            protocol_rounds,
            quartile_regret: quartiles.finish(global_regret),
            final_active_sets: states
                .iter()
                .map(|s| s.active_arms().collect())
                .collect(),
        },
    )
}

/// Fields of [`RegretTrace`] that differ between algorithms.
struct RunExtras {
    burn_in_rounds: u64,
    estimated_p: Vec<f64>,
    elimination_guard_count: u64,
    intersection_guard_count: u64,
    confidence_violations: u64,
    confidence_checks: u64,
    violation_rounds: u64,
    protocol_rounds: u64,
    quartile_regret: [f64; 4],
    final_active_sets: Vec<Vec<usize>>,
}

/// Applies the end-of-run bookkeeping identities and assembles the trace.
#[allow(clippy::too_many_arguments)]
fn finish_trace(
    rep: u64,
    checkpoints: Vec<u64>,
    curve: Vec<f64>,
    global_regret: f64,
    per_agent_regret: Vec<f64>,
    total_pulls: Vec<Vec<u64>>,
    gaps: &[f64],
    extras: RunExtras,
) -> Result<RegretTrace> {
    let sum_individual: f64 = per_agent_regret.iter().sum();
    let scale = sum_individual.abs().max(1.0);
    assert!(
        (global_regret - sum_individual).abs() <= IDENTITY_RTOL * scale,
        "group regret {global_regret} != sum of individual regrets {sum_individual}"
    );
    let from_counts: f64 = gaps
        .iter()
        .enumerate()
        .map(|(a, gap)| gap * total_pulls.iter().map(|row| row[a]).sum::<u64>() as f64)
        .sum();
    assert!(
        (global_regret - from_counts).abs() <= IDENTITY_RTOL * scale,
        "group regret {global_regret} != gap-weighted pull counts {from_counts}"
    );
    Ok(RegretTrace {
        rep,
        checkpoints,
        global_curve: curve,
        final_global_regret: global_regret,
        individual_regret: per_agent_regret,
        total_pulls,
        burn_in_rounds: extras.burn_in_rounds,
        estimated_p: extras.estimated_p,
        elimination_guard_count: extras.elimination_guard_count,
        intersection_guard_count: extras.intersection_guard_count,
        confidence_violations: extras.confidence_violations,
        confidence_checks: extras.confidence_checks,
        violation_rounds: extras.violation_rounds,
        protocol_rounds: extras.protocol_rounds,
        quartile_regret: extras.quartile_regret,
        final_active_sets: extras.final_active_sets,
    })
}

/// Independent UCB1 per agent: no communication, no burn-in. Regret is
/// still measured against the globally averaged means, which is what makes
/// the comparison with the cooperative protocol meaningful.
fn run_ucb(
    config: &SimConfig,
    instance: &BanditInstance,
    rep: u64,
    rep_seed: u64,
) -> Result<RegretTrace> {
    let n = config.graph.num_agents();
    let k = config.num_arms;
    let horizon = config.horizon;
    let gaps = instance.gaps();
    let checkpoints = config.checkpoints();
    let mut curve = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0usize;

    let mut reward_rngs: Vec<ChaCha12Rng> =
        (0..n).map(|i| streams::reward_stream(rep_seed, i)).collect();
    let mut counts = vec![vec![0u64; k]; n];
    let mut sums = vec![vec![0.0f64; k]; n];
    let mut per_agent_regret = vec![0.0f64; n];
    let mut global_regret = 0.0f64;
    let mut quartiles = QuartileMarks::new(horizon);

    for round in 1..=horizon {
        let ln_t = (round as f64).ln();
        for i in 0..n {
            let arm = match counts[i].iter().position(|&c| c == 0) {
                Some(untried) => untried,
                None => {
                    let mut best = 0usize;
                    let mut best_idx = f64::NEG_INFINITY;
                    for a in 0..k {
                        let mean = sums[i][a] / counts[i][a] as f64;
                        let index = mean + (2.0 * ln_t / counts[i][a] as f64).sqrt();
                        if index > best_idx {
                            best_idx = index;
                            best = a;
                        }
                    }
                    best
                }
            };
            let reward = instance.sample_reward(i, arm, &mut reward_rngs[i])?;
            counts[i][arm] += 1;
            sums[i][arm] += reward;
            per_agent_regret[i] += gaps[arm];
            global_regret += gaps[arm];
        }
        record_checkpoints(&checkpoints, &mut next_cp, round, global_regret, &mut curve);
        quartiles.record(round, global_regret);
    }

    finish_trace(
        rep,
        checkpoints,
        curve,
        global_regret,
        per_agent_regret,
        counts,
        gaps,
        RunExtras {
            burn_in_rounds: 0,
            estimated_p: Vec::new(),
            elimination_guard_count: 0,
            intersection_guard_count: 0,
            confidence_violations: 0,
            confidence_checks: 0,
            violation_rounds: 0,
            protocol_rounds: 0,
            quartile_regret: quartiles.finish(global_regret),
            final_active_sets: (0..n).map(|_| (0..k).collect()).collect(),
        },
    )
}
