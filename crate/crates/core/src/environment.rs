//! Heterogeneous bandit instances and reward sampling.
//!
//! Each agent `i` sees its own local mean `mu[i][a]` for every arm `a`, all in
//! `[0, 1]`. The quantity the protocol targets is the global mean of each arm
//! across agents; regret is measured against the global gaps.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Reward noise family. Means always live in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RewardKind {
    /// 0/1 rewards with the arm's local mean as success probability.
    Bernoulli,
    /// Gaussian around the local mean, clipped back into `[0, 1]`.
    TruncatedGaussian { sigma: f64 },
}

impl std::fmt::Display for RewardKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RewardKind::Bernoulli => write!(f, "bernoulli"),
            RewardKind::TruncatedGaussian { sigma } => write!(f, "truncated-gaussian:{sigma}"),
        }
    }
}

impl std::str::FromStr for RewardKind {
    type Err = Error;

    /// Accepts `bernoulli` or `truncated-gaussian:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "bernoulli" {
            return Ok(RewardKind::Bernoulli);
        }
        if let Some(sigma) = s.strip_prefix("truncated-gaussian:") {
            let sigma: f64 = sigma
                .parse()
                .map_err(|_| Error::ParseError(format!("bad noise width in {s:?}")))?;
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::ValueOutOfRange(format!(
                    "noise width must be positive and finite, got {sigma}"
                )));
            }
            return Ok(RewardKind::TruncatedGaussian { sigma });
        }
        Err(Error::ParseError(format!("unknown reward kind {s:?}")))
    }
}

/// A fixed table of local means plus derived global quantities.
#[derive(Clone, Debug)]
pub struct BanditInstance {
    means: Array2<f64>,
    kind: RewardKind,
    global_means: Vec<f64>,
    gaps: Vec<f64>,
    optimal_arm: usize,
}

impl BanditInstance {
    /// Synthetic heterogeneous instance: draws a scale `q_i ~ Uniform[0, 1)`
    /// per agent and sets `mu[i][a] = q_i * a / (k - 1)` for arms `a = 0..k`.
    /// Every agent ranks the arms identically but at its own scale, so the
    /// last arm is globally optimal.
    pub fn synthetic<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Self {
        assert!(n >= 1, "need at least one agent");
        assert!(k >= 2, "need at least two arms");
        let mut means = Array2::<f64>::zeros((n, k));
        for i in 0..n {
            let q: f64 = rng.gen();
            for a in 0..k {
                means[[i, a]] = q * a as f64 / (k - 1) as f64;
            }
        }
        Self::from_means(means, RewardKind::Bernoulli).expect("synthetic means are in range")
    }

    /// Builds an instance from an explicit `n x k` mean table.
    pub fn from_means(means: Array2<f64>, kind: RewardKind) -> Result<Self> {
        let (n, k) = means.dim();
        if n == 0 || k == 0 {
            return Err(Error::DimensionMismatch(
                "mean table must have at least one agent and one arm".into(),
            ));
        }
        if let RewardKind::TruncatedGaussian { sigma } = kind {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::ValueOutOfRange(format!(
                    "gaussian sigma must be positive and finite, got {sigma}"
                )));
            }
        }
        for &m in means.iter() {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::ValueOutOfRange(format!("mean {m} outside [0, 1]")));
            }
        }
        let global_means: Vec<f64> = (0..k)
            .map(|a| (0..n).map(|i| means[[i, a]]).sum::<f64>() / n as f64)
            .collect();
        let optimal_arm = global_means
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0;
        let best = global_means[optimal_arm];
        let gaps = global_means.iter().map(|&m| best - m).collect();
        Ok(BanditInstance {
            means,
            kind,
            global_means,
            gaps,
            optimal_arm,
        })
    }

    /// Loads a mean table from plain text: first line `N K`, then `N` rows of
    /// `K` space-separated decimals in `[0, 1]`. Rewards default to Bernoulli.
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::ParseError("empty instance file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::ParseError(format!("bad dimension {tok:?}")))
            })
            .collect::<Result<_>>()?;
        let [n, k] = dims[..] else {
            return Err(Error::ParseError(format!(
                "first line must be `N K`, got {header:?}"
            )));
        };
        let mut means = Array2::<f64>::zeros((n, k));
        let mut rows = 0usize;
        for (i, line) in lines.enumerate() {
            if i >= n {
                return Err(Error::DimensionMismatch(format!(
                    "expected {n} agent rows, found more"
                )));
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::ParseError(format!("bad mean {tok:?}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "agent row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            for (a, &m) in row.iter().enumerate() {
                means[[i, a]] = m;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} agent rows, found {rows}"
            )));
        }
        Self::from_means(means, RewardKind::Bernoulli)
    }

    /// Same mean table with a different reward family.
    pub fn with_reward_kind(mut self, kind: RewardKind) -> Result<Self> {
        if let RewardKind::TruncatedGaussian { sigma } = kind {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::ValueOutOfRange(format!(
                    "gaussian sigma must be positive and finite, got {sigma}"
                )));
            }
        }
        self.kind = kind;
        Ok(self)
    }

    pub fn num_agents(&self) -> usize {
        self.means.nrows()
    }

    pub fn num_arms(&self) -> usize {
        self.means.ncols()
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.kind
    }

    pub fn local_mean(&self, agent: usize, arm: usize) -> f64 {
        self.means[[agent, arm]]
    }

    /// Arm means averaged across agents.
    pub fn global_means(&self) -> &[f64] {
        &self.global_means
    }

    /// Global suboptimality gaps; zero exactly at the optimal arm.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Lowest-indexed arm with the best global mean.
    pub fn optimal_arm(&self) -> usize {
        self.optimal_arm
    }

    /// Draws one reward for `(agent, arm)`. Consumes exactly one variate from
    /// `rng` for either reward family.
    pub fn sample_reward<R: Rng + ?Sized>(&self, agent: usize, arm: usize, rng: &mut R) -> Result<f64> {
        let (n, k) = self.means.dim();
        if agent >= n || arm >= k {
            return Err(Error::IndexOutOfRange(format!(
                "(agent {agent}, arm {arm}) outside {n} x {k} instance"
            )));
        }
        let mean = self.means[[agent, arm]];
        Ok(match self.kind {
            RewardKind::Bernoulli => {
                let u: f64 = rng.gen();
                if u < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardKind::TruncatedGaussian { sigma } => {
                let normal = Normal::new(mean, sigma).expect("sigma validated at construction");
                normal.sample(rng).clamp(0.0, 1.0)
            }
        })
    }
}
