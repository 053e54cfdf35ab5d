//! Hash-Comb: privacy-preserving parameter exchange for federated learning.
//!
//! A Hash-Comb encodes one model parameter as the chain of salted digests of
//! its quantization channels along a binary refinement tree: level `l` splits
//! an enlarged parameter range into `2^l` equal channels, the channel at each
//! level `1..=k` is hashed, and the depth `k` is drawn per parameter with a
//! biased coin. An aggregator that knows the negotiated hyper-parameters can
//! invert digests back to channel midpoints through precomputed tables and
//! average them; anyone else sees only salted hashes.
//!
//! The crate provides the full simulated pipeline around that encoding:
//!
//! - [`quantization`] — range enlargement, channel mapping, midpoint
//!   decoding, and biased-coin level sampling.
//! - [`codec`] — digest chains, per-level inverse tables, and the wire
//!   format for round messages.
//! - [`secret_sharing`] — Shamir sharing over a prime field and the
//!   four-phase negotiation protocol that agrees on a
//!   [`QuantizationScheme`] among simulated parties.
//! - [`ml_core`] — a from-scratch multi-layer perceptron with SGD,
//!   binary cross-entropy, and classification metrics.
//! - [`federation`] — the N-node round loop with clear, hash-combed, and
//!   Gaussian-noised aggregation.
//! - [`privacy_analysis`] — Rényi divergence between quantized adjacent
//!   samples and the associated privacy report.
//! - [`seeds`] — deterministic derivation of every random stream from one
//!   master seed, so whole experiments are bit-reproducible.

pub mod codec;
pub mod error;
pub mod federation;
pub mod ml_core;
pub mod privacy_analysis;
pub mod quantization;
pub mod secret_sharing;
pub mod seeds;

pub use error::{Error, Result};
pub use quantization::{ChannelRef, QuantizationScheme};
