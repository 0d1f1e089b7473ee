//! Base communication topologies and the per-round gossip matrices.
//!
//! A `BaseGraph` is a fixed, connected, undirected simple graph over the
//! agents. Each round, every base edge is independently active with the link
//! probability `p`, which yields a `CommSnapshot`: the active edge set plus
//! the gossip matrix
//!
//! ```text
//! W = I - Lap(active graph) / N
//! ```
//!
//! so `W[i][j] = 1/N` exactly when edge `(i, j)` is active, `0` otherwise,
//! and `W[i][i] = 1 - deg(i)/N`. `W` is symmetric and doubly stochastic with
//! entries in `[0, 1]` for every realization.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

/// Base-topology tags understood by [`BaseGraph::build`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Every pair of agents shares an edge.
    Complete,
    /// Square lattice; the agent count must be a perfect square.
    Grid2D,
    /// Single cycle through all agents.
    Ring,
    /// Circulant graph where agent `i` links to `i +- 1 ..= i +- d/2` (mod N).
    CirculantDRegular(usize),
    /// The 3-regular Petersen graph on exactly 10 agents.
    Petersen,
    /// Arbitrary connected graph loaded from an explicit edge list.
    Custom,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Complete => write!(f, "complete"),
            Topology::Grid2D => write!(f, "grid2d"),
            Topology::Ring => write!(f, "ring"),
            Topology::CirculantDRegular(d) => write!(f, "circulant:{d}"),
            Topology::Petersen => write!(f, "petersen"),
            Topology::Custom => write!(f, "custom"),
        }
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Topology::Complete),
            "grid2d" => Ok(Topology::Grid2D),
            "ring" => Ok(Topology::Ring),
            "petersen" => Ok(Topology::Petersen),
            "custom" => Ok(Topology::Custom),
            other => {
                if let Some(d) = other.strip_prefix("circulant:") {
                    let d: usize = d
                        .parse()
                        .map_err(|_| Error::ParseError(format!("bad circulant degree in {other:?}")))?;
                    Ok(Topology::CirculantDRegular(d))
                } else {
                    Err(Error::ParseError(format!("unknown topology {other:?}")))
                }
            }
        }
    }
}

/// How an algebraic-connectivity value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMethod {
    ClosedForm,
    Numeric,
}

/// Algebraic connectivity `lambda_{N-1}(Lap(G))` of a base graph.
#[derive(Clone, Copy, Debug)]
pub struct SpectralSummary {
    /// Second-smallest Laplacian eigenvalue.
    pub lambda: f64,
    pub method: SpectralMethod,
}

/// Fixed base communication graph. Always connected and simple.
#[derive(Clone, Debug)]
pub struct BaseGraph {
    n: usize,
    topology: Topology,
    /// Edges as `(i, j)` with `i < j`, sorted lexicographically. The sampler
    /// iterates this order, so the draw sequence never depends on how the
    /// graph was assembled.
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl BaseGraph {
    /// Builds one of the named topologies on `n` agents.
    pub fn build(topology: Topology, n: usize) -> Result<Self> {
        let edges = match topology {
            Topology::Complete => {
                if n < 2 {
                    return Err(Error::InvalidTopologyParams(format!(
                        "complete graph needs at least 2 agents, got {n}"
                    )));
                }
                let mut e = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..n {
                    for j in (i + 1)..n {
                        e.push((i, j));
                    }
                }
                e
            }
            Topology::Grid2D => {
                let m = (n as f64).sqrt().round() as usize;
                if m < 2 || m * m != n {
                    return Err(Error::InvalidTopologyParams(format!(
                        "grid2d needs a perfect-square agent count >= 4, got {n}"
                    )));
                }
                let mut e = Vec::new();
                for r in 0..m {
                    for c in 0..m {
                        let v = r * m + c;
                        if c + 1 < m {
                            e.push((v, v + 1));
                        }
                        if r + 1 < m {
                            e.push((v, v + m));
                        }
                    }
                }
                e
            }
            Topology::Ring => {
                if n < 3 {
                    return Err(Error::InvalidTopologyParams(format!(
                        "ring needs at least 3 agents, got {n}"
                    )));
                }
                (0..n).map(|i| canonical(i, (i + 1) % n)).collect()
            }
            Topology::CirculantDRegular(d) => {
                if d % 2 != 0 || d < 2 || d >= n {
                    return Err(Error::InvalidTopologyParams(format!(
                        "circulant degree must be even with 2 <= d < n, got d={d}, n={n}"
                    )));
                }
                let mut e = Vec::new();
                for i in 0..n {
                    for s in 1..=(d / 2) {
                        e.push(canonical(i, (i + s) % n));
                    }
                }
                e.sort_unstable();
                e.dedup();
                e
            }
            Topology::Petersen => {
                if n != 10 {
                    return Err(Error::InvalidTopologyParams(format!(
                        "petersen graph is defined on 10 agents, got {n}"
                    )));
                }
                let mut e = Vec::with_capacity(15);
                for i in 0..5 {
                    e.push(canonical(i, (i + 1) % 5)); // outer 5-cycle
                    e.push((i, i + 5)); // spokes
                    e.push(canonical(i + 5, 5 + (i + 2) % 5)); // inner pentagram
                }
                e
            }
            Topology::Custom => {
                return Err(Error::InvalidTopologyParams(
                    "custom topologies are built from an explicit edge list".into(),
                ))
            }
        };
        Self::assemble(topology, n, edges)
    }

    /// Builds a custom graph from explicit undirected edges. Duplicate edges
    /// are merged; self-loops are rejected. The graph must be connected.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidTopologyParams(format!(
                "need at least 2 agents, got {n}"
            )));
        }
        let mut canon = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange(format!(
                    "edge ({i}, {j}) references an agent >= {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidTopologyParams(format!("self-loop at agent {i}")));
            }
            canon.push(canonical(i, j));
        }
        canon.sort_unstable();
        canon.dedup();
        Self::assemble(Topology::Custom, n, canon)
    }

    /// Loads a custom graph from a plain-text edge list: first line `N`, then
    /// one `i j` pair per line, 0-indexed.
    pub fn from_edge_list_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::ParseError("empty edge-list file".into()))?
            .trim()
            .parse()
            .map_err(|_| Error::ParseError("first line must be the agent count".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let (a, b) = (it.next(), it.next());
            match (a, b, it.next()) {
                (Some(a), Some(b), None) => {
                    let i: usize = a
                        .parse()
                        .map_err(|_| Error::ParseError(format!("bad endpoint {a:?}")))?;
                    let j: usize = b
                        .parse()
                        .map_err(|_| Error::ParseError(format!("bad endpoint {b:?}")))?;
                    edges.push((i, j));
                }
                _ => {
                    return Err(Error::ParseError(format!(
                        "expected `i j` per line, got {line:?}"
                    )))
                }
            }
        }
        Self::from_edge_list(n, &edges)
    }

    fn assemble(topology: Topology, n: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let g = BaseGraph { n, topology, edges, adj };
        if !g.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(g)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Canonical sorted edge list, `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted base-graph neighbors of agent `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        assert!(i < self.n, "agent index {i} out of range");
        &self.adj[i]
    }

    /// Combinatorial Laplacian `D - A` of the base graph.
    pub fn laplacian(&self) -> Array2<f64> {
        let mut l = Array2::<f64>::zeros((self.n, self.n));
        for &(i, j) in &self.edges {
            l[[i, j]] = -1.0;
            l[[j, i]] = -1.0;
            l[[i, i]] += 1.0;
            l[[j, j]] += 1.0;
        }
        l
    }

    /// Algebraic connectivity, using the closed form where one exists:
    /// complete `N`, grid `2(1 - cos(pi/sqrt(N)))`, ring `2(1 - cos(2pi/N))`.
    /// Other topologies fall back to the numeric eigensolver.
    pub fn algebraic_connectivity(&self) -> SpectralSummary {
        use std::f64::consts::PI;
        let n = self.n as f64;
        match self.topology {
            Topology::Complete => SpectralSummary {
                lambda: n,
                method: SpectralMethod::ClosedForm,
            },
            Topology::Grid2D => {
                let m = (self.n as f64).sqrt().round();
                SpectralSummary {
                    lambda: 2.0 * (1.0 - (PI / m).cos()),
                    method: SpectralMethod::ClosedForm,
                }
            }
            Topology::Ring => SpectralSummary {
                lambda: 2.0 * (1.0 - (2.0 * PI / n).cos()),
                method: SpectralMethod::ClosedForm,
            },
            _ => SpectralSummary {
                lambda: self.algebraic_connectivity_numeric(),
                method: SpectralMethod::Numeric,
            },
        }
    }

    /// Second-smallest Laplacian eigenvalue via the dense eigensolver,
    /// regardless of topology. Closed forms are checked against this path.
    pub fn algebraic_connectivity_numeric(&self) -> f64 {
        let ev = symmetric_eigenvalues(&self.laplacian());
        ev[1]
    }
}

fn canonical(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// One round's realized communication graph and its gossip matrix.
#[derive(Clone, Debug)]
pub struct CommSnapshot {
    round: u64,
    n: usize,
    active_edges: Vec<(usize, usize)>,
    active_adj: Vec<Vec<usize>>,
    weights: Array2<f64>,
}

impl CommSnapshot {
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn active_edges(&self) -> &[(usize, usize)] {
        &self.active_edges
    }

    /// Agents connected to `i` this round, sorted ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.active_adj[i]
    }

    /// `true` when edge `(i, j)` fired this round. Inactive entries are an
    /// exact floating-point zero, so this test is exact.
    pub fn edge_active(&self, i: usize, j: usize) -> bool {
        self.weights[[i, j]] != 0.0
    }

    /// Gossip matrix `I - Lap(active)/N`.
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }
}

/// Samples one communication round: every base edge is kept independently
/// with probability `p` (one uniform draw per edge, in sorted edge order).
pub fn sample_comm_graph<R: Rng + ?Sized>(
    g: &BaseGraph,
    p: f64,
    round: u64,
    rng: &mut R,
) -> Result<CommSnapshot> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let n = g.num_agents();
    let w = 1.0 / n as f64;
    let mut weights = Array2::<f64>::zeros((n, n));
    let mut active_edges = Vec::new();
    let mut active_adj = vec![Vec::new(); n];
    let mut degree = vec![0usize; n];
    for &(i, j) in g.edges() {
        let u: f64 = rng.gen();
        if u < p {
            weights[[i, j]] = w;
            weights[[j, i]] = w;
            degree[i] += 1;
            degree[j] += 1;
            active_edges.push((i, j));
            active_adj[i].push(j);
            active_adj[j].push(i);
        }
    }
    for i in 0..n {
        weights[[i, i]] = 1.0 - degree[i] as f64 / n as f64;
        active_adj[i].sort_unstable();
    }
    Ok(CommSnapshot {
        round,
        n,
        active_edges,
        active_adj,
        weights,
    })
}

/// Monte Carlo estimate of the contraction factor `lambda_2(E[W^2])`: the
/// second-largest eigenvalue of the sample average of `W_t^T W_t`. Values
/// below `1 - p * lambda_{N-1}(Lap(G)) / N` certify geometric mixing of the
/// gossip process.
pub fn estimate_contraction<R: Rng + ?Sized>(
    g: &BaseGraph,
    p: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    assert!(samples >= 1, "need at least one sample");
    let n = g.num_agents();
    let mean_sq = mean_squared_gossip(g, p, samples, rng)?;
    let ev = symmetric_eigenvalues(&mean_sq);
    Ok(ev[n - 2])
}

/// A contraction estimate together with its Monte Carlo standard error.
#[derive(Clone, Copy, Debug)]
pub struct ContractionEstimate {
    /// Estimated second-largest eigenvalue of `E[W^2]`, reported as the mean
    /// quadratic form `v' W_t^2 v` over the samples for the leading deflated
    /// eigenvector `v` (identical to the eigenvalue of the sample mean up to
    /// solver tolerance).
    pub lambda2: f64,
    /// Standard error of `lambda2`: the sample standard deviation of the
    /// per-snapshot quadratic forms divided by `sqrt(samples)`.
    pub std_err: f64,
}

/// Like [`estimate_contraction`], but also reports a standard error so the
/// estimate can be compared against analytic mixing bounds with an explicit
/// noise allowance. Runs two passes over the same snapshot stream (the RNG is
/// cloned for the replay): the first averages `W_t^2` and extracts the leading
/// eigenvector orthogonal to the all-ones direction, the second records the
/// per-snapshot quadratic forms along that eigenvector.
pub fn estimate_contraction_detailed<R: Rng + Clone>(
    g: &BaseGraph,
    p: f64,
    samples: usize,
    rng: &mut R,
) -> Result<ContractionEstimate> {
    assert!(samples >= 2, "a standard error needs at least two samples");
    let n = g.num_agents();
    let mut replay = rng.clone();
    let mean_sq = mean_squared_gossip(g, p, samples, rng)?;
    let (ev, vecs) = symmetric_eigen(&mean_sq);

    // Every W is doubly stochastic, so the all-ones direction carries
    // eigenvalue 1 exactly; the contraction factor lives on its complement.
    let ones_alignment =
        |col: usize| (0..n).map(|r| vecs[[r, col]]).sum::<f64>().abs();
    let stochastic = (0..n)
        .max_by(|&a, &b| ones_alignment(a).partial_cmp(&ones_alignment(b)).unwrap())
        .expect("at least one eigenvector");
    let lead = (0..n)
        .filter(|&i| i != stochastic)
        .max_by(|&a, &b| ev[a].partial_cmp(&ev[b]).unwrap())
        .expect("at least two eigenvectors");
    let mut v: Vec<f64> = (0..n).map(|r| vecs[[r, lead]]).collect();
    // Scrub numerical leakage of the all-ones direction, then renormalize so
    // the quadratic form below is a clean Rayleigh quotient.
    let shift = v.iter().sum::<f64>() / n as f64;
    v.iter_mut().for_each(|x| *x -= shift);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let v = Array1::from(v);

    // W is symmetric, so v' W^2 v = |W v|^2 for each replayed snapshot.
    let mut forms = Vec::with_capacity(samples);
    for s in 0..samples {
        let snap = sample_comm_graph(g, p, s as u64, &mut replay)?;
        let image = snap.weights().dot(&v);
        forms.push(image.dot(&image));
    }
    let mean = forms.iter().sum::<f64>() / samples as f64;
    let var =
        forms.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / (samples - 1) as f64;
    Ok(ContractionEstimate {
        lambda2: mean,
        std_err: (var / samples as f64).sqrt(),
    })
}

/// Sample mean of `W_t^2` over freshly drawn snapshots.
fn mean_squared_gossip<R: Rng + ?Sized>(
    g: &BaseGraph,
    p: f64,
    samples: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let n = g.num_agents();
    let mut acc = Array2::<f64>::zeros((n, n));
    for s in 0..samples {
        let snap = sample_comm_graph(g, p, s as u64, rng)?;
        let w = snap.weights();
        acc += &w.dot(w);
    }
    acc.mapv_inplace(|x| x / samples as f64);
    Ok(acc)
}

/// All eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi
/// rotations. Deterministic and dependency-free; the graphs here are small
/// enough that the dense `O(n^3)` sweeps are instant.
pub(crate) fn symmetric_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    symmetric_eigen(m).0
}

/// Full symmetric eigendecomposition by cyclic Jacobi. Returns the
/// eigenvalues ascending and an orthogonal matrix whose column `i` is the
/// eigenvector for eigenvalue `i`.
pub(crate) fn symmetric_eigen(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let mut v = Array2::<f64>::eye(n);
    if n == 1 {
        return (vec![m[[0, 0]]], v);
    }
    let mut a = m.to_owned();
    let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-14 * fro;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[[r, p]];
                    let arq = a[[r, q]];
                    a[[r, p]] = c * arp - s * arq;
                    a[[r, q]] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[[p, r]];
                    let aqr = a[[q, r]];
                    a[[p, r]] = c * apr - s * aqr;
                    a[[q, r]] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let vrp = v[[r, p]];
                    let vrq = v[[r, q]];
                    v[[r, p]] = c * vrp - s * vrq;
                    v[[r, q]] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).unwrap());
    let ev: Vec<f64> = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vecs[[r, new]] = v[[r, old]];
        }
    }
    (ev, vecs)
}
