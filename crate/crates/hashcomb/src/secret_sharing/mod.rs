//! Shamir secret sharing over a prime field.
//!
//! A secret `s ∈ Z_p` is split by a random degree-`t` polynomial `q` with
//! `q(0) = s`; party `i` receives the share `(i, q(i))`. Any `t + 1` shares
//! reconstruct `s` by Lagrange interpolation at zero, while any `t` shares
//! are jointly uniform and reveal nothing. Real-valued hyper-parameters
//! enter the field through a fixed-point embedding.
//!
//! The production modulus is the Mersenne prime `2^61 − 1`, large enough
//! for the fixed-point image with room to spare; tiny primes (7, 11, 31)
//! support exhaustive privacy enumeration in tests.

pub mod negotiation;

use rand::Rng;

use crate::error::{Error, Result};

/// Production field modulus: the Mersenne prime `2^61 − 1`.
pub const DEFAULT_MODULUS: u64 = (1 << 61) - 1;

/// Fixed-point scale: reals are mapped to multiples of `2^−32`.
pub const FIXED_POINT_SCALE: f64 = 4_294_967_296.0; // 2^32

/// Largest magnitude representable by the fixed-point embedding.
pub const FIXED_POINT_MAX_ABS: f64 = 1_048_576.0; // 2^20

/// Offset that shifts signed scaled values into `[0, 2^54)`.
const FIXED_POINT_OFFSET: i64 = 1 << 53;

/// Smallest modulus that can hold the shifted fixed-point image
/// `[0, 2^53 + 2^52]`.
pub const MIN_FIXED_POINT_MODULUS: u64 = 1 << 54;

/// Field arithmetic helpers, all operating modulo a caller-supplied prime.
pub mod field {
    /// Addition in `Z_p`.
    pub fn add(a: u64, b: u64, p: u64) -> u64 {
        ((a as u128 + b as u128) % p as u128) as u64
    }

    /// Subtraction in `Z_p`.
    pub fn sub(a: u64, b: u64, p: u64) -> u64 {
        let b = (b as u128) % (p as u128);
        ((a as u128 + p as u128 - b) % p as u128) as u64
    }

    /// Multiplication in `Z_p`.
    pub fn mul(a: u64, b: u64, p: u64) -> u64 {
        ((a as u128 * b as u128) % p as u128) as u64
    }

    /// Exponentiation in `Z_p` by square-and-multiply.
    pub fn pow(mut base: u64, mut exp: u64, p: u64) -> u64 {
        if p == 1 {
            return 0;
        }
        let mut acc = 1u64;
        base %= p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul(acc, base, p);
            }
            base = mul(base, base, p);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat's little theorem (`p` prime,
    /// `a ≠ 0 mod p`).
    pub fn inv(a: u64, p: u64) -> u64 {
        debug_assert!(a % p != 0, "zero has no inverse");
        pow(a, p - 2, p)
    }

    /// Deterministic Miller–Rabin primality test, exact for all `u64`
    /// inputs with this base set.
    pub fn is_prime(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            if n == small {
                return true;
            }
            if n % small == 0 {
                return false;
            }
        }
        let mut d = n - 1;
        let mut r = 0u32;
        while d % 2 == 0 {
            d /= 2;
            r += 1;
        }
        'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            let mut x = pow(a, d, n);
            if x == 1 || x == n - 1 {
                continue;
            }
            for _ in 0..r - 1 {
                x = mul(x, x, n);
                if x == n - 1 {
                    continue 'witness;
                }
            }
            return false;
        }
        true
    }
}

/// One Shamir share: the polynomial evaluated at the party's index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    /// Evaluation point `x_i ≥ 1`; doubles as the party identifier.
    pub party_id: u64,
    /// Share value `q(party_id) mod p`.
    pub value: u64,
    /// Field modulus the share lives in.
    pub modulus: u64,
}

/// Validates the `(s, t, n, p)` combination common to both sharing entry
/// points.
fn validate_sharing(secret: u64, threshold: usize, parties: usize, modulus: u64) -> Result<()> {
    if !field::is_prime(modulus) {
        return Err(Error::NotPrime(modulus));
    }
    if parties == 0 || modulus <= parties as u64 {
        return Err(Error::InvalidSharing(format!(
            "modulus {modulus} must exceed the party count {parties}"
        )));
    }
    if parties < threshold + 1 {
        return Err(Error::InvalidSharing(format!(
            "{parties} parties cannot support threshold {threshold}; need at least t + 1"
        )));
    }
    if secret >= modulus {
        return Err(Error::InvalidSharing(format!(
            "secret {secret} is not reduced modulo {modulus}"
        )));
    }
    Ok(())
}

/// Splits `secret` into `parties` shares with reconstruction threshold
/// `threshold + 1`, drawing the polynomial coefficients from `rng`.
pub fn share_secret<R: Rng + ?Sized>(
    secret: u64,
    threshold: usize,
    parties: usize,
    modulus: u64,
    rng: &mut R,
) -> Result<Vec<Share>> {
    validate_sharing(secret, threshold, parties, modulus)?;
    let coefficients: Vec<u64> = (0..threshold).map(|_| rng.gen_range(0..modulus)).collect();
    share_secret_with_coeffs(secret, &coefficients, parties, modulus)
}

/// Deterministic sharing with caller-supplied coefficients
/// `a_1, …, a_t` (the constant term is the secret).
///
/// Exposed for reproducible protocols and for tests that pin the
/// polynomial by hand.
pub fn share_secret_with_coeffs(
    secret: u64,
    coefficients: &[u64],
    parties: usize,
    modulus: u64,
) -> Result<Vec<Share>> {
    validate_sharing(secret, coefficients.len(), parties, modulus)?;
    if coefficients.iter().any(|&c| c >= modulus) {
        return Err(Error::InvalidSharing(
            "coefficients must be reduced modulo the field".into(),
        ));
    }
    let shares = (1..=parties as u64)
        .map(|x| {
            // Horner evaluation of s + a_1 x + … + a_t x^t.
            let mut acc = 0u64;
            for &a in coefficients.iter().rev() {
                acc = field::add(field::mul(acc, x, modulus), a, modulus);
            }
            let value = field::add(field::mul(acc, x, modulus), secret, modulus);
            Share {
                party_id: x,
                value,
                modulus,
            }
        })
        .collect();
    Ok(shares)
}

/// Reconstructs the secret by Lagrange interpolation at zero through all
/// given shares.
///
/// The caller must supply at least `t + 1` shares of a degree-`t` sharing;
/// with fewer, interpolation yields an unrelated field element (that is the
/// privacy guarantee, not a detectable error).
pub fn reconstruct(shares: &[Share]) -> Result<u64> {
    let Some(first) = shares.first() else {
        return Err(Error::InvalidSharing("no shares provided".into()));
    };
    let p = first.modulus;
    if !field::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let mut seen = std::collections::HashSet::with_capacity(shares.len());
    for share in shares {
        if share.modulus != p {
            return Err(Error::InvalidSharing(format!(
                "mixed moduli {} and {}",
                p, share.modulus
            )));
        }
        if share.party_id == 0 || share.party_id >= p || share.value >= p {
            return Err(Error::InvalidSharing(format!(
                "share ({}, {}) is not a valid field point",
                share.party_id, share.value
            )));
        }
        if !seen.insert(share.party_id) {
            return Err(Error::InvalidSharing(format!(
                "duplicate share for party {}",
                share.party_id
            )));
        }
    }
    let mut secret = 0u64;
    for share_i in shares {
        let mut numerator = 1u64;
        let mut denominator = 1u64;
        for share_j in shares {
            if share_j.party_id == share_i.party_id {
                continue;
            }
            numerator = field::mul(numerator, share_j.party_id, p);
            denominator = field::mul(
                denominator,
                field::sub(share_j.party_id, share_i.party_id, p),
                p,
            );
        }
        let basis = field::mul(numerator, field::inv(denominator, p), p);
        secret = field::add(secret, field::mul(share_i.value, basis, p), p);
    }
    Ok(secret)
}

/// Embeds a real into the field as `round(x · 2^32) + 2^53`, reduced into
/// `[0, p)`.
///
/// Requires `|x| ≤ 2^20` and a modulus of at least `2^54` so the shifted
/// image never wraps; the default 61-bit modulus satisfies this with seven
/// bits to spare. The embedding is strictly increasing, so field-element
/// order equals real order.
pub fn encode_fixed(x: f64, modulus: u64) -> Result<u64> {
    if modulus < MIN_FIXED_POINT_MODULUS {
        return Err(Error::InvalidSharing(format!(
            "modulus {modulus} too small for the fixed-point embedding (need ≥ 2^54)"
        )));
    }
    if !x.is_finite() || x.abs() > FIXED_POINT_MAX_ABS {
        return Err(Error::FixedPointOverflow(x));
    }
    let scaled = (x * FIXED_POINT_SCALE).round() as i64;
    Ok((scaled + FIXED_POINT_OFFSET) as u64)
}

/// Inverts [`encode_fixed`]; round-trip error is at most `2^−33`.
pub fn decode_fixed(e: u64, modulus: u64) -> Result<f64> {
    if modulus < MIN_FIXED_POINT_MODULUS {
        return Err(Error::InvalidSharing(format!(
            "modulus {modulus} too small for the fixed-point embedding (need ≥ 2^54)"
        )));
    }
    if e >= modulus {
        return Err(Error::InvalidSharing(format!(
            "element {e} is not reduced modulo {modulus}"
        )));
    }
    let shifted = e as i128 - FIXED_POINT_OFFSET as i128;
    let max_scaled = (FIXED_POINT_MAX_ABS * FIXED_POINT_SCALE) as i128;
    if shifted.abs() > max_scaled {
        return Err(Error::InvalidSharing(format!(
            "element {e} lies outside the fixed-point image"
        )));
    }
    Ok(shifted as f64 / FIXED_POINT_SCALE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn primality_test_agrees_with_known_values() {
        for p in [2u64, 3, 5, 7, 11, 31, 61, 2_147_483_647, DEFAULT_MODULUS] {
            assert!(field::is_prime(p), "{p} should be prime");
        }
        for n in [0u64, 1, 4, 9, 15, 121, (1 << 61) - 2, 1 << 54] {
            assert!(!field::is_prime(n), "{n} should be composite");
        }
    }

    #[test]
    fn field_inverse_multiplies_to_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = rng.gen_range(1..DEFAULT_MODULUS);
            assert_eq!(
                field::mul(a, field::inv(a, DEFAULT_MODULUS), DEFAULT_MODULUS),
                1
            );
        }
    }

    #[test]
    fn degree_zero_sharing_repeats_the_secret() {
        let shares = share_secret_with_coeffs(5, &[], 3, 7).unwrap();
        assert_eq!(shares.len(), 3);
        for share in &shares {
            assert_eq!(share.value, 5);
        }
    }

    #[test]
    fn hand_evaluated_polynomial_matches() {
        // q(x) = 5 + 3x over Z_11: q(1) = 8, q(2) = 11 ≡ 0, q(3) = 14 ≡ 3.
        let shares = share_secret_with_coeffs(5, &[3], 3, 11).unwrap();
        let points: Vec<(u64, u64)> = shares.iter().map(|s| (s.party_id, s.value)).collect();
        assert_eq!(points, vec![(1, 8), (2, 0), (3, 3)]);
    }

    #[test]
    fn lagrange_recovers_the_hand_example() {
        let shares = share_secret_with_coeffs(5, &[3], 3, 11).unwrap();
        assert_eq!(reconstruct(&shares[..2]).unwrap(), 5);
        assert_eq!(reconstruct(&shares[1..]).unwrap(), 5);
        assert_eq!(reconstruct(&shares).unwrap(), 5);
    }

    #[test]
    fn lagrange_basis_is_the_identity_on_share_points() {
        // basis_j(x_i) = Π_{k≠j} (x_i − x_k) / (x_j − x_k) must be δ_ij.
        let p = 31u64;
        let xs = [1u64, 2, 3, 4, 5];
        for (j, &xj) in xs.iter().enumerate() {
            for (i, &xi) in xs.iter().enumerate() {
                let mut value = 1u64;
                for &xk in xs.iter().filter(|&&xk| xk != xj) {
                    let num = field::sub(xi, xk, p);
                    let den = field::sub(xj, xk, p);
                    value = field::mul(value, field::mul(num, field::inv(den, p), p), p);
                }
                assert_eq!(value, u64::from(i == j), "basis_{j}({xi})");
            }
        }
    }

    #[test]
    fn random_sharings_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let secret = rng.gen_range(0..DEFAULT_MODULUS);
            let threshold = rng.gen_range(0..=5usize);
            let parties = rng.gen_range(threshold + 1..=12);
            let shares = share_secret(secret, threshold, parties, DEFAULT_MODULUS, &mut rng)
                .unwrap();
            // Any t + 1 of the shares suffice; take a random contiguous run.
            let start = rng.gen_range(0..=parties - threshold - 1);
            let subset = &shares[start..start + threshold + 1];
            assert_eq!(reconstruct(subset).unwrap(), secret);
            assert_eq!(reconstruct(&shares).unwrap(), secret);
        }
    }

    #[test]
    fn single_share_is_exactly_uniform_over_the_polynomials() {
        // Z_11, t = 1: enumerate every coefficient a_1; for each party the
        // observed share value must take every field value exactly once, so
        // one share carries zero information about the secret.
        let p = 11u64;
        for secret in [0u64, 5, 10] {
            for party in 1..=3usize {
                let mut counts = vec![0u32; p as usize];
                for a1 in 0..p {
                    let shares = share_secret_with_coeffs(secret, &[a1], 3, p).unwrap();
                    counts[shares[party - 1].value as usize] += 1;
                }
                assert!(
                    counts.iter().all(|&c| c == 1),
                    "party {party} share distribution for secret {secret} is {counts:?}"
                );
            }
        }
    }

    #[test]
    fn sharing_rejects_invalid_parameters() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        assert!(matches!(
            share_secret(1, 1, 3, 12, &mut rng),
            Err(Error::NotPrime(12))
        ));
        // Modulus must exceed the party count.
        assert!(share_secret(1, 1, 7, 7, &mut rng).is_err());
        // Need at least t + 1 parties.
        assert!(share_secret(1, 3, 3, 11, &mut rng).is_err());
        // Secret must be reduced.
        assert!(share_secret(11, 1, 3, 11, &mut rng).is_err());
    }

    #[test]
    fn reconstruct_rejects_inconsistent_inputs() {
        assert!(reconstruct(&[]).is_err());
        let a = Share {
            party_id: 1,
            value: 3,
            modulus: 11,
        };
        let dup = Share {
            party_id: 1,
            value: 5,
            modulus: 11,
        };
        let foreign = Share {
            party_id: 2,
            value: 3,
            modulus: 31,
        };
        assert!(reconstruct(&[a, dup]).is_err());
        assert!(reconstruct(&[a, foreign]).is_err());
        let zero_point = Share {
            party_id: 0,
            value: 3,
            modulus: 11,
        };
        assert!(reconstruct(&[zero_point]).is_err());
    }

    #[test]
    fn fixed_point_round_trips_within_tolerance() {
        assert_eq!(decode_fixed(encode_fixed(0.0, DEFAULT_MODULUS).unwrap(), DEFAULT_MODULUS).unwrap(), 0.0);
        assert_eq!(decode_fixed(encode_fixed(1.0, DEFAULT_MODULUS).unwrap(), DEFAULT_MODULUS).unwrap(), 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let tolerance = 2f64.powi(-33);
        for _ in 0..10_000 {
            let x = rng.gen_range(-100.0..=100.0);
            let e = encode_fixed(x, DEFAULT_MODULUS).unwrap();
            let back = decode_fixed(e, DEFAULT_MODULUS).unwrap();
            assert!((x - back).abs() <= tolerance, "{x} -> {back}");
        }
    }

    #[test]
    fn fixed_point_order_matches_real_order() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let a = rng.gen_range(-1000.0..=1000.0);
            let b = rng.gen_range(-1000.0..=1000.0);
            let ea = encode_fixed(a, DEFAULT_MODULUS).unwrap();
            let eb = encode_fixed(b, DEFAULT_MODULUS).unwrap();
            if (a - b).abs() > 1e-9 {
                assert_eq!(a < b, ea < eb);
            }
        }
    }

    #[test]
    fn fixed_point_rejects_overflow_and_small_fields() {
        assert!(encode_fixed(FIXED_POINT_MAX_ABS * 2.0, DEFAULT_MODULUS).is_err());
        assert!(encode_fixed(f64::NAN, DEFAULT_MODULUS).is_err());
        assert!(encode_fixed(0.5, 31).is_err());
        assert!(decode_fixed(DEFAULT_MODULUS, DEFAULT_MODULUS).is_err());
        // Elements outside the shifted image are rejected, not misdecoded.
        assert!(decode_fixed(DEFAULT_MODULUS - 1, DEFAULT_MODULUS).is_err());
    }
}
