//! Four-phase hyper-parameter negotiation among simulated parties.
//!
//! Before training, the parties must agree on one [`QuantizationScheme`]
//! without revealing their local parameter ranges in the clear. The
//! protocol runs in four conceptual phases, each realized with Shamir
//! share-then-open exchanges over an ordered, reliable, in-memory
//! transport:
//!
//! 1. **Coordinator election** — every party shares its local `x_max`; the
//!    shares are opened and the party with the largest value (ties broken
//!    by lowest id) becomes coordinator. Election thus rides on the same
//!    shared data the next phase needs.
//! 2. **Local range sharing** — every party shares its local `x_min`,
//!    completing the global range `[min_i x_min_i, max_i x_max_i]`.
//! 3. **Quantization set-up** — the coordinator fixes the depth `L`,
//!    derives the enlargement `Δ` and the coin bias `p`, and draws the
//!    128-bit salt; the other parties receive only a set-up notice.
//! 4. **Hyper-parameter sharing** — the coordinator Shamir-shares every
//!    scheme parameter (range, `Δ`, `L`, `p`, salt words); the shares are
//!    opened and every party reconstructs the identical scheme.
//!
//! The model is semi-honest with an honest majority (`n ≥ 2t + 1`): all
//! values in flight are shares, which individually reveal nothing. The
//! transcript records, for every message, only a digest of the payload.

use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quantization::{solve_bias, QuantizationScheme, Salt};
use crate::secret_sharing::{
    decode_fixed, encode_fixed, reconstruct, share_secret, Share, DEFAULT_MODULUS,
};

/// Protocol phase labels used in the transcript, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    CoordinatorElection,
    RangeSharing,
    QuantizationSetup,
    HyperparameterSharing,
}

/// Party-local protocol state; transitions are forward-only.
///
/// Election and range sharing are merged into one state because the
/// election is decided by the shared maxima rather than by extra messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PartyState {
    Idle,
    RangeSharing,
    Setup,
    ParamSharing,
    Done,
}

/// One transcript entry: who sent what kind of message to whom.
///
/// Only a SHA-256 digest of the payload is recorded, so the transcript can
/// be published for audit without re-exposing shares.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptRecord {
    /// Monotone protocol step counter (dispatch and open steps increment
    /// it).
    pub round: u32,
    /// Sending party id (1-based).
    pub sender: u64,
    /// Receiving party id (1-based).
    pub receiver: u64,
    /// Phase the message belongs to.
    pub phase: Phase,
    /// Hex SHA-256 of the canonical payload bytes.
    pub payload_digest: String,
}

/// Ordered log of every message the protocol exchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    fn log(&mut self, round: u32, sender: u64, receiver: u64, phase: Phase, payload: &[u8]) {
        self.records.push(TranscriptRecord {
            round,
            sender,
            receiver,
            phase,
            payload_digest: hex::encode(Sha256::digest(payload)),
        });
    }

    /// Distinct phases in first-appearance order.
    pub fn phases_in_order(&self) -> Vec<Phase> {
        let mut phases = Vec::new();
        for record in &self.records {
            if phases.last() != Some(&record.phase) && !phases.contains(&record.phase) {
                phases.push(record.phase);
            }
        }
        phases
    }

    /// Number of logged messages.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Whether nothing was exchanged (single-party negotiation).
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// One party's locally observed parameter range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalRange {
    pub x_min: f64,
    pub x_max: f64,
}

/// Tunable negotiation inputs.
#[derive(Debug, Clone)]
pub struct NegotiationParams {
    /// Shamir threshold `t`: any `t` shares reveal nothing, `t + 1`
    /// reconstruct. Requires `n ≥ 2t + 1`.
    pub threshold: usize,
    /// Maximum quantization depth `L` the coordinator announces.
    pub max_level: u8,
    /// Target mean sampled depth; the coordinator solves the coin bias for
    /// it unless `selection_p` overrides.
    pub target_mean_level: f64,
    /// Range enlargement; `None` lets the coordinator use half the global
    /// span, which doubles the range for symmetric data.
    pub delta: Option<f64>,
    /// Explicit coin bias; `None` solves for `target_mean_level`.
    pub selection_p: Option<f64>,
    /// Prime field modulus for all sharing.
    pub modulus: u64,
}

impl Default for NegotiationParams {
    fn default() -> Self {
        Self {
            threshold: 1,
            max_level: crate::quantization::DEFAULT_MAX_LEVEL,
            target_mean_level: crate::quantization::DEFAULT_TARGET_MEAN_LEVEL,
            delta: None,
            selection_p: None,
            modulus: DEFAULT_MODULUS,
        }
    }
}

/// Everything the protocol produced: the agreed scheme, per-party copies
/// for byte-identity audits, the coordinator, and the message transcript.
#[derive(Debug, Clone)]
pub struct NegotiationOutcome {
    /// Elected coordinator (1-based party id).
    pub coordinator: u64,
    /// The agreed scheme (the coordinator's copy).
    pub scheme: QuantizationScheme,
    /// Each party's independently reconstructed scheme, indexed by party
    /// (id − 1). All serializations are byte-identical on success.
    pub party_schemes: Vec<QuantizationScheme>,
    /// Full message log.
    pub transcript: Transcript,
}

/// Identifies which secret a share in flight belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum SecretId {
    PartyXMax(u64),
    PartyXMin(u64),
    GlobalXMin,
    GlobalXMax,
    GlobalDelta,
    GlobalLevels,
    GlobalSelectionP,
    GlobalSaltWord(u8),
}

impl SecretId {
    fn bytes(&self) -> [u8; 10] {
        let (tag, a, b): (u8, u64, u8) = match *self {
            SecretId::PartyXMax(p) => (1, p, 0),
            SecretId::PartyXMin(p) => (2, p, 0),
            SecretId::GlobalXMin => (3, 0, 0),
            SecretId::GlobalXMax => (4, 0, 0),
            SecretId::GlobalDelta => (5, 0, 0),
            SecretId::GlobalLevels => (6, 0, 0),
            SecretId::GlobalSelectionP => (7, 0, 0),
            SecretId::GlobalSaltWord(w) => (8, 0, w),
        };
        let mut out = [0u8; 10];
        out[0] = tag;
        out[1..9].copy_from_slice(&a.to_le_bytes());
        out[9] = b;
        out
    }
}

/// Canonical payload bytes for transcript digests.
fn share_payload(kind: u8, id: SecretId, share: &Share) -> Vec<u8> {
    let mut out = Vec::with_capacity(35);
    out.push(kind);
    out.extend_from_slice(&id.bytes());
    out.extend_from_slice(&share.party_id.to_le_bytes());
    out.extend_from_slice(&share.value.to_le_bytes());
    out.extend_from_slice(&share.modulus.to_le_bytes());
    out
}

const PAYLOAD_DISPATCH: u8 = 1;
const PAYLOAD_OPEN: u8 = 2;
const PAYLOAD_SETUP_NOTICE: u8 = 3;

/// One simulated party: state machine plus received shares.
struct Party {
    id: u64,
    state: PartyState,
    /// Shares this party holds, keyed by secret; opening fills these up to
    /// one share per (secret, holder) pair.
    inbox: std::collections::HashMap<SecretId, Vec<Share>>,
    /// Elected coordinator, known after the election opens.
    coordinator: Option<u64>,
    /// Agreed scheme; present exactly in the `Done` state.
    scheme: Option<QuantizationScheme>,
}

impl Party {
    fn new(id: u64) -> Self {
        Self {
            id,
            state: PartyState::Idle,
            inbox: std::collections::HashMap::new(),
            coordinator: None,
            scheme: None,
        }
    }

    /// Forward-only state transition.
    fn advance(&mut self, to: PartyState) -> Result<()> {
        if to <= self.state {
            return Err(Error::PhaseViolation(format!(
                "party {} cannot move from {:?} back to {to:?}",
                self.id, self.state
            )));
        }
        self.state = to;
        Ok(())
    }

    fn accept(&mut self, id: SecretId, share: Share) {
        self.inbox.entry(id).or_default().push(share);
    }

    fn reconstruct_secret(&self, id: SecretId) -> Result<u64> {
        let shares = self.inbox.get(&id).ok_or_else(|| {
            Error::PhaseViolation(format!(
                "party {} has no shares for {id:?} yet",
                self.id
            ))
        })?;
        reconstruct(shares)
    }
}

/// Runs the four-phase protocol over `ranges.len()` simulated parties and
/// returns the outcome.
///
/// Re-running with an identical seed stream reproduces the identical
/// scheme, salt included.
pub fn run_negotiation<R: Rng + ?Sized>(
    ranges: &[LocalRange],
    params: &NegotiationParams,
    rng: &mut R,
) -> Result<NegotiationOutcome> {
    let n = ranges.len();
    if n == 0 {
        return Err(Error::InvalidSharing("no parties".into()));
    }
    if n < 2 * params.threshold + 1 {
        return Err(Error::InvalidSharing(format!(
            "semi-honest security needs n ≥ 2t + 1; got n = {n}, t = {}",
            params.threshold
        )));
    }
    for (i, range) in ranges.iter().enumerate() {
        if !range.x_min.is_finite() || !range.x_max.is_finite() || range.x_min > range.x_max {
            return Err(Error::InvalidParameter(format!(
                "party {} has invalid local range [{}, {}]",
                i + 1,
                range.x_min,
                range.x_max
            )));
        }
    }

    let p = params.modulus;
    let t = params.threshold;
    let mut parties: Vec<Party> = (1..=n as u64).map(Party::new).collect();
    let mut transcript = Transcript::default();
    let mut round = 0u32;

    for party in &mut parties {
        party.advance(PartyState::RangeSharing)?;
    }

    // Dispatches one secret from `owner`: `owner` computes the shares and
    // sends the j-th to party j (keeping its own without a message).
    let dispatch = |parties: &mut [Party],
                        transcript: &mut Transcript,
                        round: u32,
                        phase: Phase,
                        owner: u64,
                        id: SecretId,
                        secret: u64,
                        rng: &mut R|
     -> Result<()> {
        let shares = share_secret(secret, t, n, p, rng)?;
        for share in shares {
            let receiver = share.party_id;
            if receiver != owner {
                transcript.log(
                    round,
                    owner,
                    receiver,
                    phase,
                    &share_payload(PAYLOAD_DISPATCH, id, &share),
                );
            }
            parties[receiver as usize - 1].accept(id, share);
        }
        Ok(())
    };

    // Opens one secret: every holder broadcasts its share so all parties
    // can reconstruct.
    fn open(
        parties: &mut [Party],
        transcript: &mut Transcript,
        round: u32,
        phase: Phase,
        id: SecretId,
    ) -> Result<()> {
        let n = parties.len();
        // Each party holds exactly its own share right now (index 0).
        let held: Vec<Share> = parties
            .iter()
            .map(|party| {
                party
                    .inbox
                    .get(&id)
                    .and_then(|shares| shares.iter().find(|s| s.party_id == party.id))
                    .copied()
                    .ok_or_else(|| {
                        Error::PhaseViolation(format!(
                            "party {} missing its own share of {id:?}",
                            party.id
                        ))
                    })
            })
            .collect::<Result<_>>()?;
        for sender in 1..=n as u64 {
            let share = held[sender as usize - 1];
            for receiver in 1..=n as u64 {
                if receiver == sender {
                    continue;
                }
                transcript.log(
                    round,
                    sender,
                    receiver,
                    phase,
                    &share_payload(PAYLOAD_OPEN, id, &share),
                );
                parties[receiver as usize - 1].accept(id, share);
            }
        }
        Ok(())
    }

    // Phase 1: share and open every party's x_max; the maximum elects the
    // coordinator.
    for owner in 1..=n as u64 {
        let secret = encode_fixed(ranges[owner as usize - 1].x_max, p)?;
        dispatch(
            &mut parties,
            &mut transcript,
            round,
            Phase::CoordinatorElection,
            owner,
            SecretId::PartyXMax(owner),
            secret,
            rng,
        )?;
    }
    round += 1;
    for owner in 1..=n as u64 {
        open(
            &mut parties,
            &mut transcript,
            round,
            Phase::CoordinatorElection,
            SecretId::PartyXMax(owner),
        )?;
    }
    round += 1;

    // Every party reconstructs all maxima and elects deterministically:
    // largest shared x_max, ties to the lowest id. The fixed-point
    // embedding is order-preserving, so field comparison equals real
    // comparison.
    let mut coordinator = 0u64;
    for party in &mut parties {
        let mut best = (0u64, 0u64);
        for owner in 1..=n as u64 {
            let value = party.reconstruct_secret(SecretId::PartyXMax(owner))?;
            if owner == 1 || value > best.1 {
                best = (owner, value);
            }
        }
        party.coordinator = Some(best.0);
        coordinator = best.0;
    }
    debug_assert!(parties
        .iter()
        .all(|party| party.coordinator == Some(coordinator)));

    // Phase 2: share and open every party's x_min.
    for owner in 1..=n as u64 {
        let secret = encode_fixed(ranges[owner as usize - 1].x_min, p)?;
        dispatch(
            &mut parties,
            &mut transcript,
            round,
            Phase::RangeSharing,
            owner,
            SecretId::PartyXMin(owner),
            secret,
            rng,
        )?;
    }
    round += 1;
    for owner in 1..=n as u64 {
        open(
            &mut parties,
            &mut transcript,
            round,
            Phase::RangeSharing,
            SecretId::PartyXMin(owner),
        )?;
    }
    round += 1;

    for party in &mut parties {
        party.advance(PartyState::Setup)?;
    }

    // Phase 3: the coordinator derives the scheme parameters and notifies
    // the others that set-up is complete. Parameter values stay private
    // until they are shared in phase 4.
    let coordinator_view = &parties[coordinator as usize - 1];
    let x_min_field = (1..=n as u64)
        .map(|owner| coordinator_view.reconstruct_secret(SecretId::PartyXMin(owner)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min()
        .expect("at least one party");
    let x_max_field = (1..=n as u64)
        .map(|owner| coordinator_view.reconstruct_secret(SecretId::PartyXMax(owner)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .expect("at least one party");
    let x_min = decode_fixed(x_min_field, p)?;
    let x_max = decode_fixed(x_max_field, p)?;
    let delta = match params.delta {
        Some(delta) => delta,
        None => (x_max - x_min) / 2.0,
    };
    let selection_p = match params.selection_p {
        Some(bias) => bias,
        None => solve_bias(params.target_mean_level, params.max_level)?,
    };
    let mut salt: Salt = [0u8; 16];
    rng.fill(&mut salt);

    let notice = {
        let mut payload = vec![PAYLOAD_SETUP_NOTICE];
        payload.extend_from_slice(&coordinator.to_le_bytes());
        payload
    };
    for receiver in 1..=n as u64 {
        if receiver != coordinator {
            transcript.log(
                round,
                coordinator,
                receiver,
                Phase::QuantizationSetup,
                &notice,
            );
        }
    }
    round += 1;

    for party in &mut parties {
        party.advance(PartyState::ParamSharing)?;
    }

    // Phase 4: the coordinator shares every scheme parameter; opening lets
    // all parties reconstruct them.
    let salt_words: Vec<u64> = salt
        .chunks_exact(4)
        .map(|chunk| u64::from(u32::from_le_bytes(chunk.try_into().expect("4-byte chunk"))))
        .collect();
    let secrets: Vec<(SecretId, u64)> = vec![
        (SecretId::GlobalXMin, x_min_field),
        (SecretId::GlobalXMax, x_max_field),
        (SecretId::GlobalDelta, encode_fixed(delta, p)?),
        (SecretId::GlobalLevels, u64::from(params.max_level)),
        (SecretId::GlobalSelectionP, encode_fixed(selection_p, p)?),
        (SecretId::GlobalSaltWord(0), salt_words[0]),
        (SecretId::GlobalSaltWord(1), salt_words[1]),
        (SecretId::GlobalSaltWord(2), salt_words[2]),
        (SecretId::GlobalSaltWord(3), salt_words[3]),
    ];
    for &(id, secret) in &secrets {
        dispatch(
            &mut parties,
            &mut transcript,
            round,
            Phase::HyperparameterSharing,
            coordinator,
            id,
            secret,
            rng,
        )?;
    }
    round += 1;
    for &(id, _) in &secrets {
        open(
            &mut parties,
            &mut transcript,
            round,
            Phase::HyperparameterSharing,
            id,
        )?;
    }

    // Every party independently reconstructs, decodes, and builds the
    // scheme; identical field elements guarantee byte-identical schemes.
    let mut party_schemes = Vec::with_capacity(n);
    for party in &mut parties {
        let x_min = decode_fixed(party.reconstruct_secret(SecretId::GlobalXMin)?, p)?;
        let x_max = decode_fixed(party.reconstruct_secret(SecretId::GlobalXMax)?, p)?;
        let delta = decode_fixed(party.reconstruct_secret(SecretId::GlobalDelta)?, p)?;
        let levels = party.reconstruct_secret(SecretId::GlobalLevels)?;
        if levels == 0 || levels > u64::from(u8::MAX) {
            return Err(Error::PhaseViolation(format!(
                "reconstructed level count {levels} is not a valid depth"
            )));
        }
        let bias = decode_fixed(party.reconstruct_secret(SecretId::GlobalSelectionP)?, p)?;
        let mut salt: Salt = [0u8; 16];
        for word in 0..4u8 {
            let value = party.reconstruct_secret(SecretId::GlobalSaltWord(word))?;
            let bytes = (value as u32).to_le_bytes();
            salt[word as usize * 4..word as usize * 4 + 4].copy_from_slice(&bytes);
        }
        let scheme =
            QuantizationScheme::new(x_min, x_max, delta, levels as u8, bias, salt)?;
        party.scheme = Some(scheme.clone());
        party.advance(PartyState::Done)?;
        party_schemes.push(scheme);
    }

    Ok(NegotiationOutcome {
        coordinator,
        scheme: party_schemes[coordinator as usize - 1].clone(),
        party_schemes,
        transcript,
    })
}
