//! Per-agent state and the four phases of gossip successive elimination.
//!
//! Each synchronous round runs, in order:
//!
//! 1. every agent pulls its least-pulled active arm and refreshes its local
//!    mean (`select_arm` + `update_local`),
//! 2. all agents mix their global estimates through the round's gossip
//!    matrix (`gossip_update`, double-buffered),
//! 3. every agent drops arms whose upper confidence bound falls at or below
//!    some other active arm's lower bound (`eliminate`),
//! 4. every agent intersects its active set with those of its current
//!    neighbors (`intersect_active_sets`, double-buffered).
//!
//! Randomness is consumed only in phase 1 (reward draws) and in the graph
//! sampling; phases 2 to 4 are deterministic given the snapshot.

use crate::error::{Error, Result};
use crate::graph::CommSnapshot;

/// Protocol constants shared by one agent's confidence radius.
///
/// `tau_star` is the mixing horizon `ceil(2 N ln(T) / (p lambda))` and
/// `l_star` the pull-count disagreement allowance; both are fixed by
/// `(T, N, K, p, lambda)` at construction, so an agent running with an
/// estimated link probability simply builds its own copy.
#[derive(Clone, Copy, Debug)]
pub struct GseParams {
    horizon: u64,
    num_agents: usize,
    num_arms: usize,
    link_probability: f64,
    lambda: f64,
    tau_star: u64,
    l_star: u64,
    // Cached pieces of the confidence radius: c(D) = sqrt(c_sample / D) + c_mix / D.
    c_sample: f64,
    c_mix: f64,
}

impl GseParams {
    /// Computes the protocol constants.
    ///
    /// `refined` selects the tighter disagreement allowance available on
    /// complete bases, `L* = ceil(-2 ln(N T) / ln(1 - p))`; otherwise the
    /// general `L* = N * ceil(-2 ln(N T) / ln(1 - p))` applies. At `p = 1`
    /// the allowance is zero by convention (`ln(0)` maps the ratio to zero).
    pub fn new(
        horizon: u64,
        num_agents: usize,
        num_arms: usize,
        link_probability: f64,
        lambda: f64,
        refined: bool,
    ) -> Result<Self> {
        if !(link_probability > 0.0 && link_probability <= 1.0) {
            return Err(Error::InvalidProbability(link_probability));
        }
        assert!(horizon >= 2, "horizon must be at least 2");
        assert!(num_agents >= 1 && num_arms >= 1, "need agents and arms");
        assert!(lambda > 0.0, "algebraic connectivity must be positive");
        let t = horizon as f64;
        let n = num_agents as f64;
        let tau_star = (2.0 * n * t.ln() / (link_probability * lambda)).ceil() as u64;
        let per_edge = (-2.0 * (n * t).ln() / (1.0 - link_probability).ln()).ceil() as u64;
        let l_star = if refined { per_edge } else { num_agents as u64 * per_edge };
        Ok(GseParams {
            horizon,
            num_agents,
            num_arms,
            link_probability,
            lambda,
            tau_star,
            l_star,
            c_sample: 4.0 * t.ln() / n,
            c_mix: 4.0 * (n.sqrt() + tau_star as f64),
        })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn link_probability(&self) -> f64 {
        self.link_probability
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau_star(&self) -> u64 {
        self.tau_star
    }

    pub fn l_star(&self) -> u64 {
        self.l_star
    }

    /// Confidence radius around the global estimate after `pulls` pulls:
    ///
    /// ```text
    /// c = sqrt(4 ln(T) / (N D)) + 4 (sqrt(N) + tau*) / D,
    /// D = max(pulls - K L*, 1)
    /// ```
    pub fn confidence_radius(&self, pulls: u64) -> f64 {
        let d = pulls
            .saturating_sub(self.num_arms as u64 * self.l_star)
            .max(1) as f64;
        (self.c_sample / d).sqrt() + self.c_mix / d
    }

    /// Envelope for how far two agents' pull counts of one arm may drift
    /// apart: `K * N * ceil(2 ln(N T) / -ln(1 - p))`, with the ceiling read
    /// as its limit value 1 when `p = 1` (edges always fire, so counts can
    /// still disagree for the one round an elimination takes to propagate).
    pub fn disagreement_bound(&self) -> u64 {
        let n = self.num_agents as f64;
        let t = self.horizon as f64;
        let per_edge = if self.link_probability >= 1.0 {
            1
        } else {
            (2.0 * (n * t).ln() / -(1.0 - self.link_probability).ln()).ceil() as u64
        };
        self.num_arms as u64 * self.num_agents as u64 * per_edge.max(1)
    }
}

/// One agent's running statistics.
#[derive(Clone, Debug)]
pub struct AgentState {
    id: usize,
    active: Vec<bool>,
    num_active: usize,
    pull_counts: Vec<u64>,
    reward_sums: Vec<f64>,
    /// Local sample means after this round's pull (`mu_hat(t)`).
    mean_curr: Vec<f64>,
    /// Local sample means before this round's pull (`mu_hat(t-1)`).
    mean_prev: Vec<f64>,
    /// Gossiped global estimates `z`.
    global_est: Vec<f64>,
}

impl AgentState {
    /// Fresh state: every arm active, all statistics zero.
    pub fn new(id: usize, num_arms: usize) -> Self {
        assert!(num_arms >= 1, "need at least one arm");
        AgentState {
            id,
            active: vec![true; num_arms],
            num_active: num_arms,
            pull_counts: vec![0; num_arms],
            reward_sums: vec![0.0; num_arms],
            mean_curr: vec![0.0; num_arms],
            mean_prev: vec![0.0; num_arms],
            global_est: vec![0.0; num_arms],
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn num_arms(&self) -> usize {
        self.active.len()
    }

    pub fn is_active(&self, arm: usize) -> bool {
        self.active[arm]
    }

    pub fn num_active(&self) -> usize {
        self.num_active
    }

    /// Active arms in ascending order.
    pub fn active_arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(a, &on)| on.then_some(a))
    }

    pub fn pull_count(&self, arm: usize) -> u64 {
        self.pull_counts[arm]
    }

    pub fn local_mean(&self, arm: usize) -> f64 {
        self.mean_curr[arm]
    }

    pub fn global_estimate(&self, arm: usize) -> f64 {
        self.global_est[arm]
    }

    pub fn global_estimates(&self) -> &[f64] {
        &self.global_est
    }

    /// Phase 1a: the least-pulled active arm, lowest index on ties.
    pub fn select_arm(&self) -> Result<usize> {
        let mut best: Option<(u64, usize)> = None;
        for a in 0..self.active.len() {
            if self.active[a] {
                let key = (self.pull_counts[a], a);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
        }
        best.map(|(_, a)| a).ok_or(Error::EmptyActiveSet(self.id))
    }

    /// Phase 1b: absorbs one reward for `arm`. Snapshots the previous means
    /// first so the gossip step can read `mu_hat(t) - mu_hat(t-1)`.
    pub fn update_local(&mut self, arm: usize, reward: f64) -> Result<()> {
        assert!(arm < self.active.len(), "arm index out of range");
        assert!(self.active[arm], "pulled arm must be active");
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange(reward));
        }
        self.mean_prev.copy_from_slice(&self.mean_curr);
        self.pull_counts[arm] += 1;
        self.reward_sums[arm] += reward;
        self.mean_curr[arm] = self.reward_sums[arm] / self.pull_counts[arm] as f64;
        Ok(())
    }

    /// Phase 3: drops every active arm whose upper confidence bound is at or
    /// below the lower bound of some other active arm. Returns `true` when
    /// the emptiness guard fired (all arms would have been removed; the one
    /// with the best lower bound is retained instead). With strictly positive
    /// radii the guard is unreachable -- removing the best-lower-bound arm
    /// would need `lcb >= lcb + 2c` -- but it stays as a defensive backstop.
    pub fn eliminate(&mut self, params: &GseParams) -> bool {
        self.eliminate_by(|pulls| params.confidence_radius(pulls))
    }

    fn eliminate_by(&mut self, radius: impl Fn(u64) -> f64) -> bool {
        // Track the two best lower bounds so each arm compares against the
        // best bound among the *other* arms, without allocating.
        let mut best: Option<(f64, usize)> = None;
        let mut second: Option<f64> = None;
        for a in 0..self.active.len() {
            if !self.active[a] {
                continue;
            }
            let lcb = self.global_est[a] - radius(self.pull_counts[a]);
            match best {
                Some((b, _)) if lcb <= b => {
                    if second.map_or(true, |s| lcb > s) {
                        second = Some(lcb);
                    }
                }
                _ => {
                    second = best.map(|(v, _)| v);
                    best = Some((lcb, a));
                }
            }
        }
        let Some((best_lcb, best_arm)) = best else {
            return false;
        };
        let mut removed = 0usize;
        for a in 0..self.active.len() {
            if !self.active[a] {
                continue;
            }
            let rival = if a == best_arm {
                match second {
                    Some(s) => s,
                    None => continue, // only arm in the set, nothing can beat it
                }
            } else {
                best_lcb
            };
            let ucb = self.global_est[a] + radius(self.pull_counts[a]);
            if rival >= ucb {
                self.active[a] = false;
                removed += 1;
            }
        }
        self.num_active -= removed;
        if self.num_active == 0 {
            // Emptiness guard: keep the arm with the best lower bound.
            self.active[best_arm] = true;
            self.num_active = 1;
            return true;
        }
        false
    }

    fn restore_active(&mut self, mask: &[bool]) {
        self.active.copy_from_slice(mask);
        self.num_active = mask.iter().filter(|&&on| on).count();
    }
}

/// Phase 2: one synchronous gossip step across all agents,
///
/// ```text
/// z(t+1) = W_t z(t) + mu_hat(t) - mu_hat(t-1)
/// ```
///
/// Double-buffered: every agent reads the pre-update `z` of its neighbors.
pub fn gossip_update(states: &mut [AgentState], snapshot: &CommSnapshot) -> Result<()> {
    let n = states.len();
    if snapshot.num_agents() != n {
        return Err(Error::DimensionMismatch(format!(
            "snapshot covers {} agents, simulation has {n}",
            snapshot.num_agents()
        )));
    }
    if n == 0 {
        return Ok(());
    }
    let k = states[0].global_est.len();
    let w = snapshot.weights();
    let mut z_old = vec![0.0f64; n * k];
    for (i, s) in states.iter().enumerate() {
        z_old[i * k..(i + 1) * k].copy_from_slice(&s.global_est);
    }
    for i in 0..n {
        let state = &mut states[i];
        for a in 0..k {
            let mut acc = 0.0f64;
            for j in 0..n {
                acc += w[[i, j]] * z_old[j * k + a];
            }
            state.global_est[a] = acc + state.mean_curr[a] - state.mean_prev[a];
        }
    }
    Ok(())
}

/// Phase 4: every agent replaces its active set with the intersection over
/// itself and its active neighbors (double-buffered on the post-elimination
/// sets). Returns how many agents hit the empty-intersection guard and kept
/// their own set.
pub fn intersect_active_sets(states: &mut [AgentState], snapshot: &CommSnapshot) -> Result<u64> {
    let n = states.len();
    if snapshot.num_agents() != n {
        return Err(Error::DimensionMismatch(format!(
            "snapshot covers {} agents, simulation has {n}",
            snapshot.num_agents()
        )));
    }
    let old: Vec<Vec<bool>> = states.iter().map(|s| s.active.clone()).collect();
    let mut guards = 0u64;
    for i in 0..n {
        debug_assert!(states[i].num_active > 0, "sets must be nonempty after eliminate");
        let mut next = old[i].clone();
        for &j in snapshot.neighbors(i) {
            for (slot, &on) in next.iter_mut().zip(old[j].iter()) {
                *slot = *slot && on;
            }
        }
        if next.iter().any(|&on| on) {
            states[i].restore_active(&next);
        } else {
            guards += 1; // keep the agent's own post-elimination set
        }
    }
    Ok(guards)
}
