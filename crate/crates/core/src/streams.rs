//! Named random-number streams.
//!
//! Every replication owns a family of independent ChaCha streams derived from
//! a single seed. Keeping the streams separate pins down exactly which draws
//! each part of the simulation consumes: the graph process, the synthetic
//! instance, burn-in arm choices, and per-agent rewards never share a stream,
//! so toggling one feature (for example the link-probability burn-in) cannot
//! shift the reward draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const STREAM_GRAPH: u64 = 0;
const STREAM_INSTANCE: u64 = 1;
const STREAM_BURNIN: u64 = 2;
const STREAM_REWARD_BASE: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream that drives the communication-graph edge activations.
pub fn graph_stream(seed: u64) -> ChaCha12Rng {
    stream(seed, STREAM_GRAPH)
}

/// Stream that draws the synthetic instance parameters.
pub fn instance_stream(seed: u64) -> ChaCha12Rng {
    stream(seed, STREAM_INSTANCE)
}

/// Stream for the uniform arm pulls made while burn-in runs.
pub fn burnin_stream(seed: u64) -> ChaCha12Rng {
    stream(seed, STREAM_BURNIN)
}

/// Per-agent reward stream. Agent `i` always consumes stream `3 + i`.
pub fn reward_stream(seed: u64, agent: usize) -> ChaCha12Rng {
    stream(seed, STREAM_REWARD_BASE + agent as u64)
}
