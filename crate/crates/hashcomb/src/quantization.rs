//! Multi-level range quantization and biased-coin level selection.
//!
//! A [`QuantizationScheme`] fixes an enlarged parameter range
//! `[c_min, c_max] = [x_min − Δ, x_max + Δ]` together with a maximum depth
//! `L`, a coin bias `p`, and a 128-bit salt. Level `l` partitions the range
//! into `2^l` equal channels, so channels refine as a binary tree: each
//! level-`l` channel splits into two level-`l+1` children. Values quantize
//! to the channel containing them and decode to the channel midpoint, with
//! worst-case error `(c_max − c_min) / 2^{l+1}`.
//!
//! The depth used for one parameter is random: toss the biased coin `L`
//! times and keep the position of the last head. Depths are therefore
//! heavier near `L`, and the bias solving `expected_level(p, L) = target`
//! tunes the average depth; see [`solve_bias`].

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default maximum quantization depth.
pub const DEFAULT_MAX_LEVEL: u8 = 16;

/// Default target for the mean sampled depth.
pub const DEFAULT_TARGET_MEAN_LEVEL: f64 = 8.0;

/// Hard upper bound on depth: inverse digest tables hold `2^level` entries,
/// so deeper schemes would not fit a desk-scale memory budget.
pub const MAX_SUPPORTED_LEVEL: u8 = 24;

/// Absolute tolerance of the bias bisection in [`solve_bias`].
pub const SOLVE_BIAS_TOLERANCE: f64 = 1e-9;

/// 128-bit negotiated salt mixed into every channel digest.
pub type Salt = [u8; 16];

/// Widens `[x_min, x_max]` by `delta` on both sides.
///
/// The enlargement keeps extreme observed values away from the range edges
/// so they do not deterministically occupy the first or last channel.
pub fn enlarge_range(x_min: f64, x_max: f64, delta: f64) -> Result<(f64, f64)> {
    if !x_min.is_finite() || !x_max.is_finite() || !delta.is_finite() {
        return Err(Error::InvalidParameter(
            "range bounds and delta must be finite".into(),
        ));
    }
    if x_min > x_max {
        return Err(Error::InvalidParameter(format!(
            "x_min {x_min} exceeds x_max {x_max}"
        )));
    }
    if delta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "enlargement delta must be non-negative, got {delta}"
        )));
    }
    Ok((x_min - delta, x_max + delta))
}

/// One channel of the binary refinement tree: `index`-th of `2^level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelRef {
    /// Tree depth; level 0 is the single channel spanning the whole range.
    pub level: u8,
    /// Channel position within the level, in `[0, 2^level)`.
    pub index: u32,
}

/// Shared quantization hyper-parameters; the secret that negotiation
/// establishes and every node must hold identically.
///
/// Immutable after construction, hence freely shareable across concurrent
/// node workers.
#[derive(Clone, PartialEq)]
pub struct QuantizationScheme {
    c_min: f64,
    c_max: f64,
    delta: f64,
    max_level: u8,
    selection_p: f64,
    salt: Salt,
}

impl std::fmt::Debug for QuantizationScheme {
    /// Omits the salt so debug logging cannot leak the negotiated secret.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuantizationScheme")
            .field("c_min", &self.c_min)
            .field("c_max", &self.c_max)
            .field("delta", &self.delta)
            .field("max_level", &self.max_level)
            .field("selection_p", &self.selection_p)
            .field("salt", &"<redacted>")
            .finish()
    }
}

impl QuantizationScheme {
    /// Builds a scheme from a source range, enlarging it by `delta`.
    ///
    /// Rejects non-finite bounds, ranges that stay empty after enlargement
    /// (channel arithmetic needs positive width), depths outside
    /// `[1, MAX_SUPPORTED_LEVEL]`, and biases outside `(0, 1]`.
    pub fn new(
        x_min: f64,
        x_max: f64,
        delta: f64,
        max_level: u8,
        selection_p: f64,
        salt: Salt,
    ) -> Result<Self> {
        let (c_min, c_max) = enlarge_range(x_min, x_max, delta)?;
        if !(c_min < c_max) {
            return Err(Error::InvalidParameter(format!(
                "enlarged range [{c_min}, {c_max}] has zero width"
            )));
        }
        if max_level < 1 || max_level > MAX_SUPPORTED_LEVEL {
            return Err(Error::InvalidParameter(format!(
                "max_level must be in [1, {MAX_SUPPORTED_LEVEL}], got {max_level}"
            )));
        }
        if !selection_p.is_finite() || selection_p <= 0.0 || selection_p > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "selection probability must be in (0, 1], got {selection_p}"
            )));
        }
        Ok(Self {
            c_min,
            c_max,
            delta,
            max_level,
            selection_p,
            salt,
        })
    }

    /// Lower bound of the enlarged range.
    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    /// Upper bound of the enlarged range.
    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Enlargement applied on each side of the source range.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Maximum quantization depth `L`.
    pub fn max_level(&self) -> u8 {
        self.max_level
    }

    /// Head probability of the level-selection coin.
    pub fn selection_p(&self) -> f64 {
        self.selection_p
    }

    /// Negotiated salt.
    pub fn salt(&self) -> &Salt {
        &self.salt
    }

    /// Full range width `c_max − c_min`.
    pub fn span(&self) -> f64 {
        self.c_max - self.c_min
    }

    /// Number of channels at `level` (`2^level`).
    pub fn channel_count(&self, level: u8) -> u64 {
        1u64 << level
    }

    /// Width of each channel at `level`; exact because the count is a power
    /// of two.
    pub fn channel_width(&self, level: u8) -> f64 {
        self.span() / self.channel_count(level) as f64
    }

    /// Whether `x` lies inside the enlarged range (both ends closed).
    pub fn contains(&self, x: f64) -> bool {
        x >= self.c_min && x <= self.c_max
    }

    /// Clamps `x` into the enlarged range.
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.c_min, self.c_max)
    }

    /// Canonical byte serialization: bounds, delta, depth, bias, salt.
    ///
    /// This is the form compared across parties after negotiation; equal
    /// bytes mean operationally identical schemes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.public_bytes();
        out.extend_from_slice(&self.salt);
        out
    }

    /// Canonical bytes of everything except the salt.
    pub fn public_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(33);
        out.extend_from_slice(&self.c_min.to_be_bytes());
        out.extend_from_slice(&self.c_max.to_be_bytes());
        out.extend_from_slice(&self.delta.to_be_bytes());
        out.push(self.max_level);
        out.extend_from_slice(&self.selection_p.to_be_bytes());
        out
    }

    /// Digest of the salt-free canonical bytes; safe to record in run
    /// manifests as a scheme identity without revealing the salt.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.public_bytes()).into()
    }
}

/// Returns the channel containing `x` at `level`.
///
/// Channels are half-open `[lo, hi)` except the topmost, which is closed so
/// `x = c_max` maps to index `2^level − 1`. The index is
/// `floor((x − c_min) / width)`, computed through a single normalized
/// position so that the map is monotone in `x` and channels nest exactly
/// across levels (scaling the position by 2 per level is exact in binary
/// floating point).
pub fn channel_of(x: f64, scheme: &QuantizationScheme, level: u8) -> Result<ChannelRef> {
    if level > scheme.max_level() {
        return Err(Error::LevelTooDeep {
            level,
            max: scheme.max_level(),
        });
    }
    if !x.is_finite() || !scheme.contains(x) {
        return Err(Error::OutOfRange {
            value: x,
            lo: scheme.c_min(),
            hi: scheme.c_max(),
        });
    }
    let count = scheme.channel_count(level);
    let position = (x - scheme.c_min()) / scheme.span();
    let raw = (position * count as f64).floor();
    // The closed top channel and any last-ulp overshoot of the position map
    // both land here, clamped to the final index.
    let index = if raw < 0.0 {
        0
    } else if raw >= count as f64 {
        count - 1
    } else {
        raw as u64
    };
    Ok(ChannelRef {
        level,
        index: index as u32,
    })
}

/// Validates that `ch` is a real channel of `scheme`.
fn validate_channel(ch: &ChannelRef, scheme: &QuantizationScheme) -> Result<()> {
    if ch.level > scheme.max_level() {
        return Err(Error::LevelTooDeep {
            level: ch.level,
            max: scheme.max_level(),
        });
    }
    if u64::from(ch.index) >= scheme.channel_count(ch.level) {
        return Err(Error::InvalidParameter(format!(
            "channel index {} out of range at level {}",
            ch.index, ch.level
        )));
    }
    Ok(())
}

/// Midpoint of a channel: the decoded representative of every value in it.
///
/// For any `x` in the channel, `|x − midpoint| ≤ span / 2^{level+1}` up to
/// floating-point rounding of the position map.
pub fn midpoint_of(ch: &ChannelRef, scheme: &QuantizationScheme) -> Result<f64> {
    validate_channel(ch, scheme)?;
    Ok(scheme.c_min() + (f64::from(ch.index) + 0.5) * scheme.channel_width(ch.level))
}

/// Bounds `[lo, hi]` of a channel; the topmost channel's upper bound is
/// exactly `c_max` so digests of boundary channels are canonical.
pub fn channel_bounds(ch: &ChannelRef, scheme: &QuantizationScheme) -> Result<(f64, f64)> {
    validate_channel(ch, scheme)?;
    let width = scheme.channel_width(ch.level);
    let lo = scheme.c_min() + f64::from(ch.index) * width;
    let hi = if u64::from(ch.index) + 1 == scheme.channel_count(ch.level) {
        scheme.c_max()
    } else {
        scheme.c_min() + (f64::from(ch.index) + 1.0) * width
    };
    Ok((lo, hi))
}

/// Position of the last `true` in a toss sequence, 1-based; 0 when no toss
/// came up heads.
pub fn last_head_position<I: IntoIterator<Item = bool>>(tosses: I) -> u8 {
    let mut last = 0u8;
    for (i, head) in tosses.into_iter().enumerate() {
        if head {
            last = (i + 1) as u8;
        }
    }
    last
}

/// Tosses the coin `levels` times and returns the raw last-head position,
/// which is 0 with probability `(1 − p)^levels`.
///
/// The position `j ≥ 1` occurs with probability `p(1 − p)^{levels − j}`.
pub fn sample_level_raw<R: Rng + ?Sized>(rng: &mut R, p: f64, levels: u8) -> u8 {
    last_head_position((0..levels).map(|_| rng.gen::<f64>() < p))
}

/// Draws the quantization depth for one parameter: the raw last-head
/// position, clamped up to 1 so an all-tails draw still encodes something.
///
/// The clamp moves the all-tails probability mass `(1 − p)^L` from 0 to 1
/// and raises the mean by the same amount; with the defaults (`p ≈ 0.0878`,
/// `L = 16`) the raw mean 8.0 becomes ≈ 8.23. Resampling until a head
/// appears would be the alternative reading; the clamp is chosen because it
/// keeps one draw per parameter and a fixed toss budget.
pub fn sample_level<R: Rng + ?Sized>(rng: &mut R, scheme: &QuantizationScheme) -> u8 {
    sample_level_raw(rng, scheme.selection_p(), scheme.max_level()).max(1)
}

/// Mean of the raw last-head position: `Σ_{i=0}^{L} (L − i) · p(1 − p)^i`.
///
/// The `i = L` term is zero, so this equals the exact expectation of
/// [`sample_level_raw`] (the all-tails outcome contributes 0 · (1−p)^L).
pub fn expected_level(p: f64, levels: u8) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "selection probability must be in (0, 1], got {p}"
        )));
    }
    if levels < 1 {
        return Err(Error::InvalidParameter(
            "level count must be at least 1".into(),
        ));
    }
    let l = f64::from(levels);
    let mut sum = 0.0;
    let mut tail = 1.0; // (1 − p)^i
    for i in 0..=u32::from(levels) {
        sum += (l - f64::from(i)) * p * tail;
        tail *= 1.0 - p;
    }
    Ok(sum)
}

/// Solves `expected_level(p, levels) = target_mean` for the coin bias `p`
/// by bisection on (0, 1) to absolute tolerance [`SOLVE_BIAS_TOLERANCE`].
///
/// `expected_level` is strictly increasing in `p` with range `(0, levels)`
/// on the open interval, so any interior target has exactly one solution;
/// targets at or beyond the endpoints are rejected.
pub fn solve_bias(target_mean: f64, levels: u8) -> Result<f64> {
    if levels < 1 {
        return Err(Error::InvalidParameter(
            "level count must be at least 1".into(),
        ));
    }
    if !target_mean.is_finite() || target_mean <= 0.0 || target_mean >= f64::from(levels) {
        return Err(Error::UnreachableMean {
            target: target_mean,
            levels,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > SOLVE_BIAS_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        // mid is interior to (0, 1), so expected_level cannot fail.
        if expected_level(mid, levels)? < target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn test_scheme() -> QuantizationScheme {
        // Enlarged range [−1, 1]: the reference configuration with
        // x_max / Δ = 2 for symmetric data.
        QuantizationScheme::new(-0.5, 0.5, 0.5, 16, 0.087826, [7u8; 16]).unwrap()
    }

    #[test]
    fn enlarge_range_widens_both_sides() {
        assert_eq!(enlarge_range(-0.5, 0.5, 0.5).unwrap(), (-1.0, 1.0));
        assert_eq!(enlarge_range(0.0, 1.0, 0.5).unwrap(), (-0.5, 1.5));
        assert_eq!(enlarge_range(0.3, 0.3, 0.0).unwrap(), (0.3, 0.3));
    }

    #[test]
    fn enlarge_range_rejects_bad_inputs() {
        assert!(enlarge_range(1.0, 0.0, 0.5).is_err());
        assert!(enlarge_range(0.0, 1.0, -0.1).is_err());
        assert!(enlarge_range(f64::NAN, 1.0, 0.5).is_err());
        assert!(enlarge_range(0.0, f64::INFINITY, 0.5).is_err());
    }

    #[test]
    fn scheme_rejects_degenerate_ranges_and_parameters() {
        // Zero-width range: no channel arithmetic is possible.
        assert!(QuantizationScheme::new(0.3, 0.3, 0.0, 16, 0.5, [0; 16]).is_err());
        assert!(QuantizationScheme::new(0.0, 1.0, 0.0, 0, 0.5, [0; 16]).is_err());
        assert!(QuantizationScheme::new(0.0, 1.0, 0.0, 25, 0.5, [0; 16]).is_err());
        assert!(QuantizationScheme::new(0.0, 1.0, 0.0, 16, 0.0, [0; 16]).is_err());
        assert!(QuantizationScheme::new(0.0, 1.0, 0.0, 16, 1.1, [0; 16]).is_err());
        assert!(QuantizationScheme::new(0.0, 1.0, 0.0, 16, f64::NAN, [0; 16]).is_err());
    }

    #[test]
    fn channel_of_matches_hand_examples() {
        let scheme = test_scheme();
        // Level 2 has channels of width 0.5; 0.3 lies in [0, 0.5) = index 2.
        assert_eq!(channel_of(0.3, &scheme, 2).unwrap().index, 2);
        // The topmost channel is closed above.
        assert_eq!(channel_of(1.0, &scheme, 1).unwrap().index, 1);
        assert_eq!(channel_of(-1.0, &scheme, 1).unwrap().index, 0);
        // Level 0 is the single whole-range channel.
        assert_eq!(channel_of(0.7, &scheme, 0).unwrap().index, 0);
    }

    #[test]
    fn channel_of_agrees_with_linear_scan_oracle() {
        // Independent oracle: walk all 2^16 channel bound pairs and find the
        // one containing x, rather than trusting the floor arithmetic.
        let scheme = test_scheme();
        let x = 0.3;
        let level = 16;
        let count = scheme.channel_count(level);
        let width = scheme.channel_width(level);
        let mut found = None;
        for j in 0..count {
            let lo = scheme.c_min() + j as f64 * width;
            let hi = if j + 1 == count {
                scheme.c_max()
            } else {
                scheme.c_min() + (j + 1) as f64 * width
            };
            if x >= lo && (x < hi || (j + 1 == count && x <= hi)) {
                found = Some(j as u32);
                break;
            }
        }
        assert_eq!(found, Some(42598));
        assert_eq!(channel_of(x, &scheme, level).unwrap().index, 42598);
    }

    #[test]
    fn channel_of_rejects_out_of_range_and_deep_levels() {
        let scheme = test_scheme();
        assert!(matches!(
            channel_of(1.5, &scheme, 4),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            channel_of(f64::NAN, &scheme, 4),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            channel_of(0.0, &scheme, 17),
            Err(Error::LevelTooDeep { .. })
        ));
    }

    #[test]
    fn midpoint_matches_hand_examples() {
        let scheme = test_scheme();
        let mid = midpoint_of(&ChannelRef { level: 1, index: 1 }, &scheme).unwrap();
        assert_eq!(mid, 0.5);
        let whole = midpoint_of(&ChannelRef { level: 0, index: 0 }, &scheme).unwrap();
        assert_eq!(whole, 0.0);
        assert!(midpoint_of(&ChannelRef { level: 1, index: 2 }, &scheme).is_err());
    }

    #[test]
    fn midpoint_error_bounded_at_full_depth() {
        // Half of the level-16 channel width over a span of 2.
        let bound = 1.52587890625e-05;
        let scheme = test_scheme();
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
        for _ in 0..10_000 {
            let x = rng.gen_range(-1.0..=1.0);
            let ch = channel_of(x, &scheme, 16).unwrap();
            let mid = midpoint_of(&ch, &scheme).unwrap();
            assert!(
                (x - mid).abs() <= bound,
                "decode error {} exceeds {} for x={}",
                (x - mid).abs(),
                bound,
                x
            );
        }
    }

    #[test]
    fn channels_nest_and_stay_monotone() {
        let scheme = test_scheme();
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let mut previous_index = 0u32;
        let mut xs: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        xs.sort_by(f64::total_cmp);
        for (i, &x) in xs.iter().enumerate() {
            let idx = channel_of(x, &scheme, 10).unwrap().index;
            if i > 0 {
                assert!(idx >= previous_index, "channel map not monotone");
            }
            previous_index = idx;
            // Binary-tree refinement: the child index halves back to the
            // parent index at every consecutive level pair.
            let mut parent = channel_of(x, &scheme, 0).unwrap().index;
            for level in 1..=16u8 {
                let child = channel_of(x, &scheme, level).unwrap().index;
                assert!(child / 2 == parent, "level {level} does not refine its parent");
                parent = child;
            }
        }
    }

    #[test]
    fn channel_bounds_cover_the_range_without_gaps() {
        let scheme = test_scheme();
        for level in [0u8, 1, 2, 5] {
            let count = scheme.channel_count(level);
            let mut previous_hi = scheme.c_min();
            for index in 0..count {
                let ch = ChannelRef {
                    level,
                    index: index as u32,
                };
                let (lo, hi) = channel_bounds(&ch, &scheme).unwrap();
                assert_eq!(lo, previous_hi, "gap before channel {index}");
                assert!(hi > lo);
                previous_hi = hi;
            }
            assert_eq!(previous_hi, scheme.c_max());
        }
    }

    #[test]
    fn last_head_position_handles_edge_sequences() {
        assert_eq!(
            last_head_position([true].into_iter().chain(std::iter::repeat(false).take(15))),
            1
        );
        assert_eq!(last_head_position(std::iter::repeat(false).take(16)), 0);
        assert_eq!(last_head_position([false, true, false, true]), 4);
        assert_eq!(last_head_position(std::iter::empty()), 0);
    }

    #[test]
    fn certain_coin_always_selects_the_deepest_level() {
        let scheme = QuantizationScheme::new(-0.5, 0.5, 0.5, 16, 1.0, [0; 16]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..64 {
            assert_eq!(sample_level(&mut rng, &scheme), 16);
        }
    }

    #[test]
    fn sampled_levels_stay_in_bounds_and_near_target_mean() {
        let scheme = test_scheme();
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let draws = 100_000;
        let mut sum = 0u64;
        for _ in 0..draws {
            let level = sample_level(&mut rng, &scheme);
            assert!((1..=16).contains(&level));
            sum += u64::from(level);
        }
        let mean = sum as f64 / draws as f64;
        // Raw mean 8.0 plus the all-tails mass (1 − p)^16 ≈ 0.2297 moved
        // from 0 to 1, i.e. ≈ 8.23, within Monte Carlo tolerance.
        assert!((7.9..=8.55).contains(&mean), "clamped mean {mean} off target");
    }

    #[test]
    fn expected_level_matches_frozen_values() {
        // Exact closed form of the fair-coin sum, derived independently:
        // Σ_{j=1}^{16} j·2^{j−17} = ((16−1)·2^17 + 2) / 2^17 = 15 + 2^−16.
        let fair = expected_level(0.5, 16).unwrap();
        assert_eq!(fair, 15.0 + 2f64.powi(-16));

        // A certain coin always lands its last head on the final toss.
        assert_eq!(expected_level(1.0, 16).unwrap(), 16.0);
        assert_eq!(expected_level(1.0, 7).unwrap(), 7.0);

        // The production bias hits the mean-8 target.
        let prod = expected_level(0.087826, 16).unwrap();
        assert!((prod - 8.0).abs() <= 1e-3, "mean {prod} too far from 8");
    }

    #[test]
    fn expected_level_rejects_bad_inputs() {
        assert!(expected_level(0.0, 16).is_err());
        assert!(expected_level(-0.2, 16).is_err());
        assert!(expected_level(1.5, 16).is_err());
        assert!(expected_level(0.5, 0).is_err());
    }

    #[test]
    fn solve_bias_reproduces_known_solutions() {
        let p = solve_bias(8.0, 16).unwrap();
        assert!((p - 0.087826).abs() <= 1e-4, "solved bias {p}");
        let fair = solve_bias(15.0, 16).unwrap();
        assert!((fair - 0.5).abs() <= 1e-3, "solved bias {fair}");
    }

    #[test]
    fn solve_bias_rejects_unreachable_targets() {
        assert!(matches!(
            solve_bias(16.0, 16),
            Err(Error::UnreachableMean { .. })
        ));
        assert!(solve_bias(0.0, 16).is_err());
        assert!(solve_bias(-3.0, 16).is_err());
        assert!(solve_bias(f64::NAN, 16).is_err());
    }

    #[test]
    fn solve_bias_inverts_expected_level() {
        for p in [0.05, 0.087826, 0.3, 0.5] {
            let mean = expected_level(p, 16).unwrap();
            let recovered = solve_bias(mean, 16).unwrap();
            assert!(
                (recovered - p).abs() <= 1e-6,
                "bias {p} recovered as {recovered}"
            );
        }
    }

    #[test]
    fn canonical_bytes_separate_public_and_secret_parts() {
        let scheme = test_scheme();
        let full = scheme.to_bytes();
        let public = scheme.public_bytes();
        assert_eq!(full.len(), public.len() + 16);
        assert_eq!(&full[..public.len()], &public[..]);

        // Fingerprints ignore the salt; canonical bytes do not.
        let other_salt = QuantizationScheme::new(-0.5, 0.5, 0.5, 16, 0.087826, [8u8; 16]).unwrap();
        assert_eq!(scheme.fingerprint(), other_salt.fingerprint());
        assert_ne!(scheme.to_bytes(), other_salt.to_bytes());

        let other_p = QuantizationScheme::new(-0.5, 0.5, 0.5, 16, 0.5, [7u8; 16]).unwrap();
        assert_ne!(scheme.fingerprint(), other_p.fingerprint());
    }

    #[test]
    fn debug_output_redacts_the_salt() {
        let printed = format!("{:?}", test_scheme());
        assert!(printed.contains("<redacted>"));
        // The salt bytes [7, 7, ...] must not be rendered.
        assert!(!printed.contains("[7"));
    }
}
