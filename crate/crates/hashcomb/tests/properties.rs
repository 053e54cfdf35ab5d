//! Randomized invariant checks across the quantization, codec,
//! secret-sharing, negotiation, and aggregation layers.

use proptest::collection::vec as pvec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use hashcomb::codec::{encode, read_records, write_records, DigestTableSet, HashComb};
use hashcomb::federation::{fed_avg, fed_avg_hashed};
use hashcomb::quantization::{
    channel_of, expected_level, last_head_position, midpoint_of, solve_bias,
};
use hashcomb::secret_sharing::negotiation::{
    run_negotiation, LocalRange, NegotiationParams,
};
use hashcomb::secret_sharing::{
    decode_fixed, encode_fixed, reconstruct, share_secret, DEFAULT_MODULUS,
};
use hashcomb::QuantizationScheme;

/// Arbitrary valid scheme with a modest depth so table builds stay cheap.
fn scheme_strategy(max_depth: u8) -> impl Strategy<Value = QuantizationScheme> {
    (
        -1e3f64..1e3,
        1e-3f64..2e3,
        0.0f64..50.0,
        1u8..=max_depth,
        0.01f64..0.99,
        any::<[u8; 16]>(),
    )
        .prop_map(|(x_min, extent, delta, max_level, p, salt)| {
            QuantizationScheme::new(x_min, x_min + extent, delta, max_level, p, salt)
                .expect("strategy emits only valid scheme parameters")
        })
}

/// A point of the enlarged range, parameterized by a unit interpolant.
fn point_in(scheme: &QuantizationScheme, t: f64) -> f64 {
    scheme.clamp(scheme.c_min() + t * scheme.span())
}

/// Floating-point slack for decoded midpoints: a few ulps at the scale of
/// the range endpoints, far below any real channel-arithmetic bug.
fn midpoint_slack(scheme: &QuantizationScheme) -> f64 {
    let scale = scheme.c_min().abs().max(scheme.c_max().abs()).max(scheme.span());
    8.0 * f64::EPSILON * scale
}

proptest! {
    #[test]
    fn decoded_midpoints_stay_within_half_a_channel(
        scheme in scheme_strategy(16),
        t in 0.0f64..=1.0,
    ) {
        let x = point_in(&scheme, t);
        for level in 1..=scheme.max_level() {
            let mid = midpoint_of(&channel_of(x, &scheme, level).unwrap(), &scheme).unwrap();
            let bound = scheme.span() / 2f64.powi(i32::from(level) + 1);
            prop_assert!(
                (x - mid).abs() <= bound + midpoint_slack(&scheme),
                "level {level}: |{x} - {mid}| > {bound}"
            );
        }
    }

    #[test]
    fn channel_indices_are_monotone_in_the_value(
        scheme in scheme_strategy(16),
        t_a in 0.0f64..=1.0,
        t_b in 0.0f64..=1.0,
        level in 1u8..=16,
    ) {
        prop_assume!(level <= scheme.max_level());
        let (lo, hi) = if t_a <= t_b { (t_a, t_b) } else { (t_b, t_a) };
        let a = channel_of(point_in(&scheme, lo), &scheme, level).unwrap();
        let b = channel_of(point_in(&scheme, hi), &scheme, level).unwrap();
        prop_assert!(a.index <= b.index);
    }

    #[test]
    fn channels_nest_dyadically(
        scheme in scheme_strategy(16),
        t in 0.0f64..=1.0,
    ) {
        let x = point_in(&scheme, t);
        for level in 1..scheme.max_level() {
            let coarse = channel_of(x, &scheme, level).unwrap();
            let fine = channel_of(x, &scheme, level + 1).unwrap();
            prop_assert_eq!(
                coarse.index, fine.index / 2,
                "level {} index {} is not the parent of level {} index {}",
                level, coarse.index, level + 1, fine.index
            );
        }
    }

    #[test]
    fn shallower_encodings_are_chain_prefixes(
        scheme in scheme_strategy(12),
        t in 0.0f64..=1.0,
    ) {
        let x = point_in(&scheme, t);
        let deep = encode(x, scheme.max_level(), &scheme).unwrap();
        for level in 1..=scheme.max_level() {
            let shallow = encode(x, level, &scheme).unwrap();
            prop_assert_eq!(shallow.chain(), &deep.chain()[..level as usize]);
        }
    }

    #[test]
    fn codec_decoding_inverts_encoding_to_the_midpoint(
        scheme in scheme_strategy(10),
        t in 0.0f64..=1.0,
        level in 1u8..=10,
    ) {
        prop_assume!(level <= scheme.max_level());
        let x = point_in(&scheme, t);
        let tables = DigestTableSet::for_levels(&scheme, &[level]).unwrap();
        let decoded = hashcomb::codec::decode(&encode(x, level, &scheme).unwrap(), &tables).unwrap();
        let direct = midpoint_of(&channel_of(x, &scheme, level).unwrap(), &scheme).unwrap();
        prop_assert_eq!(decoded.to_bits(), direct.to_bits());
    }

    #[test]
    fn wire_round_trip_preserves_every_record(
        scheme in scheme_strategy(8),
        points in pvec((0.0f64..=1.0, 1u8..=8), 0..40),
    ) {
        let combs: Vec<HashComb> = points
            .iter()
            .map(|&(t, level)| {
                encode(point_in(&scheme, t), level.min(scheme.max_level()), &scheme).unwrap()
            })
            .collect();
        let bytes = write_records(&combs);
        prop_assert_eq!(read_records(&bytes).unwrap(), combs);
    }

    #[test]
    fn damaged_wire_buffers_are_rejected(
        scheme in scheme_strategy(6),
        points in pvec((0.0f64..=1.0, 1u8..=6), 1..10),
        cut in any::<prop::sample::Index>(),
    ) {
        let combs: Vec<HashComb> = points
            .iter()
            .map(|&(t, level)| {
                encode(point_in(&scheme, t), level.min(scheme.max_level()), &scheme).unwrap()
            })
            .collect();
        let bytes = write_records(&combs);
        let truncated = &bytes[..cut.index(bytes.len())];
        prop_assert!(read_records(truncated).is_err(), "accepted a strict prefix");
        let mut padded = bytes.clone();
        padded.push(0);
        prop_assert!(read_records(&padded).is_err(), "accepted trailing bytes");
    }

    #[test]
    fn sharing_reconstructs_from_any_full_window(
        secret in 0u64..DEFAULT_MODULUS,
        threshold in 1usize..=5,
        extra in 0usize..=2,
        offset in 0usize..12,
        seed in any::<u64>(),
    ) {
        let parties = 2 * threshold + 1 + extra;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let shares = share_secret(secret, threshold, parties, DEFAULT_MODULUS, &mut rng).unwrap();
        // Any window of threshold+1 distinct shares reconstructs exactly.
        let start = offset % (parties - threshold);
        let window = &shares[start..start + threshold + 1];
        prop_assert_eq!(reconstruct(window).unwrap(), secret);
        // So does the complete share set.
        prop_assert_eq!(reconstruct(&shares).unwrap(), secret);
    }

    #[test]
    fn fixed_point_embedding_round_trips_and_preserves_order(
        x in -1_000_000.0f64..1_000_000.0,
        y in -1_000_000.0f64..1_000_000.0,
    ) {
        let ex = encode_fixed(x, DEFAULT_MODULUS).unwrap();
        let back = decode_fixed(ex, DEFAULT_MODULUS).unwrap();
        prop_assert!((back - x).abs() <= 2f64.powi(-33) * x.abs().max(1.0) + 2f64.powi(-33));
        let ey = encode_fixed(y, DEFAULT_MODULUS).unwrap();
        if x <= y {
            prop_assert!(ex <= ey);
        } else {
            prop_assert!(ex >= ey);
        }
        if y - x > 2f64.powi(-31) {
            prop_assert!(ex < ey);
        }
    }

    #[test]
    fn last_head_position_matches_a_naive_scan(tosses in pvec(any::<bool>(), 0..32)) {
        let expected = tosses
            .iter()
            .rposition(|&head| head)
            .map_or(0, |i| (i + 1) as u8);
        prop_assert_eq!(last_head_position(tosses.iter().cloned()), expected);
    }

    #[test]
    fn solved_bias_reproduces_the_requested_mean(
        levels in 4u8..=20,
        fraction in 0.05f64..=0.95,
    ) {
        let target = 1.0 + fraction * (f64::from(levels) - 1.05);
        let p = solve_bias(target, levels).unwrap();
        prop_assert!(p > 0.0 && p < 1.0);
        let mean = expected_level(p, levels).unwrap();
        prop_assert!((mean - target).abs() <= 1e-6, "mean {mean} vs target {target}");
    }
}

proptest! {
    // The whole-protocol checks run fewer, heavier cases.
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn negotiation_always_converges_to_identical_schemes(
        seed in any::<u64>(),
        offsets in pvec((-100.0f64..100.0, 0.01f64..50.0), 3..=6),
    ) {
        let ranges: Vec<LocalRange> = offsets
            .iter()
            .map(|&(x_min, extent)| LocalRange { x_min, x_max: x_min + extent })
            .collect();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let outcome = run_negotiation(&ranges, &NegotiationParams::default(), &mut rng).unwrap();

        let reference = outcome.scheme.to_bytes();
        for scheme in &outcome.party_schemes {
            prop_assert_eq!(scheme.to_bytes(), reference.clone());
        }

        // The coordinator holds the largest maximum, ties to the lowest id.
        let expected = ranges
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| {
                a.x_max.partial_cmp(&b.x_max).unwrap().then(j.cmp(i))
            })
            .map(|(i, _)| i as u64 + 1)
            .unwrap();
        prop_assert_eq!(outcome.coordinator, expected);
    }

    #[test]
    fn hashed_aggregation_equals_decode_then_average(
        scheme_seed in any::<[u8; 16]>(),
        node_points in pvec(pvec((0.0f64..=1.0, 1u8..=6), 4), 2..=4),
    ) {
        let scheme = QuantizationScheme::new(-2.0, 2.0, 1.0, 6, 0.5, scheme_seed).unwrap();
        let tables = DigestTableSet::full(&scheme).unwrap();
        let messages: Vec<Vec<HashComb>> = node_points
            .iter()
            .map(|points| {
                points
                    .iter()
                    .map(|&(t, level)| encode(point_in(&scheme, t), level, &scheme).unwrap())
                    .collect()
            })
            .collect();
        let hashed = fed_avg_hashed(&messages, &tables).unwrap();

        let decoded: Vec<Vec<f64>> = messages
            .iter()
            .map(|combs| {
                combs
                    .iter()
                    .map(|c| hashcomb::codec::decode(c, &tables).unwrap())
                    .collect()
            })
            .collect();
        let plain = fed_avg(&decoded).unwrap();
        for (a, b) in hashed.iter().zip(&plain) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
