//! Deterministic random-stream derivation.
//!
//! Every source of randomness in an experiment — weight initialization, the
//! train/test split, per-round data partitions, per-node sample draws, level
//! coins, Gaussian noise, negotiation polynomials — is derived from a single
//! master seed plus a textual label and integer coordinates. Runs with the
//! same configuration and seed are therefore bit-reproducible, and streams
//! never alias: each (label, round, node) triple owns an independent
//! generator, so reordering node work (or running nodes in parallel) cannot
//! change what any node draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Domain-separation prefix mixed into every derived seed.
const DOMAIN: &[u8] = b"hashcomb.seed.v1";

/// Derives an independent generator from the master seed, a stream label,
/// and two integer coordinates (conventionally round and node; pass 0 when
/// unused).
pub fn derived_rng(master_seed: u64, label: &str, a: u64, b: u64) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(master_seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(a.to_le_bytes());
    hasher.update(b.to_le_bytes());
    ChaCha12Rng::from_seed(hasher.finalize().into())
}

/// Stream for model weight initialization.
pub fn init_rng(master_seed: u64) -> ChaCha12Rng {
    derived_rng(master_seed, "init", 0, 0)
}

/// Stream for the train/test split shuffle.
pub fn split_rng(master_seed: u64) -> ChaCha12Rng {
    derived_rng(master_seed, "split", 0, 0)
}

/// Stream for drawing one round's per-node data partition.
pub fn partition_rng(master_seed: u64, round: u64) -> ChaCha12Rng {
    derived_rng(master_seed, "partition", round, 0)
}

/// Stream for one node's SGD sample draws within one round.
///
/// Monolithic training is the degenerate federation (round 0, node 0), so it
/// uses the same stream coordinates and matches a one-node, one-round
/// federated run bit for bit.
pub fn node_train_rng(master_seed: u64, round: u64, node: u64) -> ChaCha12Rng {
    derived_rng(master_seed, "train", round, node)
}

/// Stream for one node's biased-coin level draws within one round.
pub fn node_level_rng(master_seed: u64, round: u64, node: u64) -> ChaCha12Rng {
    derived_rng(master_seed, "level", round, node)
}

/// Stream for one node's Gaussian noise within one round.
pub fn node_noise_rng(master_seed: u64, round: u64, node: u64) -> ChaCha12Rng {
    derived_rng(master_seed, "noise", round, node)
}

/// Stream for the negotiation protocol (polynomial coefficients and salt).
pub fn negotiation_rng(master_seed: u64) -> ChaCha12Rng {
    derived_rng(master_seed, "negotiation", 0, 0)
}
