//! Link-probability estimation burn-in.
//!
//! Before the elimination protocol starts, each agent can estimate the link
//! activation probability `p` by watching whether the link to its
//! lowest-indexed base neighbor is active each round. The empirical
//! frequency `p_hat(t)` concentrates per Hoeffding, giving the anytime
//! confidence width `CI(t) = sqrt(ln(2/delta) / (2t))`. The agent stops at
//! the first round where `p_hat(t) - 3 CI(t) > 0` and adopts the
//! deliberately conservative estimate `p_hat(t*) - CI(t*)`, which
//! undershoots the true `p` with probability at least `1 - delta` --
//! undershooting only inflates the confidence radius, never breaks it.
//!
//! During burn-in every agent pulls arms round-robin so the pull-count
//! balance invariant survives the phase; those pulls pay regret but do not
//! feed the elimination statistics.

use crate::error::{Error, Result};

/// One agent's burn-in estimator.
#[derive(Clone, Debug)]
pub struct BurnInState {
    /// Base neighbor whose link is being watched (lowest index).
    watched: usize,
    rounds: u64,
    active_count: u64,
    ln_two_over_delta: f64,
    /// Set once the stopping rule fires: (stopping round, final estimate).
    outcome: Option<(u64, f64)>,
}

impl BurnInState {
    /// `delta` is the failure probability of the final estimate; callers use
    /// `2 / T^2` so the burn-in failure event is negligible at horizon scale.
    pub fn new(watched: usize, delta: f64) -> Self {
        assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
        BurnInState {
            watched,
            rounds: 0,
            active_count: 0,
            ln_two_over_delta: (2.0 / delta).ln(),
            outcome: None,
        }
    }

    pub fn watched_neighbor(&self) -> usize {
        self.watched
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn is_stopped(&self) -> bool {
        self.outcome.is_some()
    }

    /// Empirical activation frequency so far (zero before any observation).
    pub fn p_hat(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.active_count as f64 / self.rounds as f64
        }
    }

    /// Anytime Hoeffding width; infinite before the first observation.
    pub fn ci(&self) -> f64 {
        if self.rounds == 0 {
            f64::INFINITY
        } else {
            (self.ln_two_over_delta / (2.0 * self.rounds as f64)).sqrt()
        }
    }

    /// Records one observation of the watched link and applies the stopping
    /// rule. Returns `true` once stopped; further observations are refused.
    pub fn step(&mut self, link_active: bool) -> Result<bool> {
        if self.is_stopped() {
            return Err(Error::AlreadyStopped);
        }
        self.rounds += 1;
        if link_active {
            self.active_count += 1;
        }
        let ci = self.ci();
        if self.p_hat() - 3.0 * ci > 0.0 {
            self.outcome = Some((self.rounds, self.p_hat() - ci));
        }
        Ok(self.is_stopped())
    }

    /// The conservative estimate `p_hat(t*) - CI(t*)`.
    pub fn finish(&self) -> Result<f64> {
        self.outcome.map(|(_, p)| p).ok_or(Error::NotStopped)
    }

    /// Round at which the stopping rule fired.
    pub fn stopping_round(&self) -> Result<u64> {
        self.outcome.map(|(t, _)| t).ok_or(Error::NotStopped)
    }
}
