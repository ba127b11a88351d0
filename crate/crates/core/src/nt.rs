//! Exact integer utilities: square roots, perfect-square testing, the
//! congruence solver behind form composition, and a primality check.
//!
//! Continued-fraction quantities stay below `2·√N`, so the hot loops run on
//! machine words whenever the radicand allows it. [`CfInt`] abstracts over
//! `i64`, `i128` and [`BigInt`]; all three must produce bit-identical
//! sequences.

use std::fmt;
use std::hash::Hash;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::{Integer, Roots};
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

/// Arbitrary-precision non-negative integer.
pub type Nat = BigUint;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NtError {
    #[error("inconsistent congruence system")]
    Inconsistent,
    #[error("zero coefficient in congruence system")]
    ZeroCoefficient,
}

const fn square_table<const M: usize>() -> [bool; M] {
    let mut t = [false; M];
    let mut i = 0;
    while i < M {
        t[(i * i) % M] = true;
        i += 1;
    }
    t
}

static SQ64: [bool; 64] = square_table::<64>();
static SQ63: [bool; 63] = square_table::<63>();
static SQ65: [bool; 65] = square_table::<65>();
static SQ11: [bool; 11] = square_table::<11>();

/// `63 · 65 · 11`; one reduction feeds three residue tables.
pub const FILTER_MODULUS: u64 = 45045;

/// Cheap necessary condition for squareness from `v mod 64` and
/// `v mod 45045`. Rejects about 99% of non-squares.
#[inline]
pub fn passes_square_filter(mod64: u64, mod45045: u64) -> bool {
    SQ64[mod64 as usize]
        && SQ63[(mod45045 % 63) as usize]
        && SQ65[(mod45045 % 65) as usize]
        && SQ11[(mod45045 % 11) as usize]
}

pub fn isqrt(n: &BigUint) -> BigUint {
    n.sqrt()
}

pub fn isqrt_u64(n: u64) -> u64 {
    n.sqrt()
}

pub fn isqrt_u128(n: u128) -> u128 {
    n.sqrt()
}

pub fn is_perfect_square(n: &BigUint) -> Option<BigUint> {
    let m64 = (n & BigUint::from(63u32)).to_u64().unwrap_or(0);
    let mf = (n % FILTER_MODULUS).to_u64().unwrap_or(0);
    if !passes_square_filter(m64, mf) {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

pub fn is_perfect_square_u64(n: u64) -> Option<u64> {
    if !passes_square_filter(n & 63, n % FILTER_MODULUS) {
        return None;
    }
    let r = n.sqrt();
    (r * r == n).then_some(r)
}

pub fn is_perfect_square_u128(n: u128) -> Option<u128> {
    if !passes_square_filter((n & 63) as u64, (n % FILTER_MODULUS as u128) as u64) {
        return None;
    }
    let r = n.sqrt();
    (r * r == n).then_some(r)
}

/// Signed integer type usable by the continued-fraction engine.
pub trait CfInt:
    Clone
    + fmt::Debug
    + fmt::Display
    + Ord
    + Hash
    + Integer
    + Signed
    + Roots
    + ToPrimitive
    + FromPrimitive
    + Send
    + Sync
    + 'static
{
    /// Radicands up to this many bits expand without overflow; `None` means unbounded.
    const MAX_RADICAND_BITS: Option<u64>;

    fn from_bigint(v: &BigInt) -> Option<Self>;
    fn to_bigint(&self) -> BigInt;
    /// `(self mod 64, self mod 45045)` for a non-negative value.
    fn square_residues(&self) -> (u64, u64);

    fn fits_radicand(n: &BigUint) -> bool {
        Self::MAX_RADICAND_BITS.is_none_or(|b| n.bits() <= b)
    }

    fn perfect_sqrt(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let (a, b) = self.square_residues();
        if !passes_square_filter(a, b) {
            return None;
        }
        let r = self.sqrt();
        (r.clone() * r.clone() == *self).then_some(r)
    }
}

impl CfInt for i64 {
    const MAX_RADICAND_BITS: Option<u64> = Some(62);

    fn from_bigint(v: &BigInt) -> Option<Self> {
        v.to_i64()
    }
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
    #[inline]
    fn square_residues(&self) -> (u64, u64) {
        let u = *self as u64;
        (u & 63, u % FILTER_MODULUS)
    }
}

impl CfInt for i128 {
    const MAX_RADICAND_BITS: Option<u64> = Some(124);

    fn from_bigint(v: &BigInt) -> Option<Self> {
        v.to_i128()
    }
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
    #[inline]
    fn square_residues(&self) -> (u64, u64) {
        let u = *self as u128;
        ((u & 63) as u64, (u % FILTER_MODULUS as u128) as u64)
    }
}

impl CfInt for BigInt {
    const MAX_RADICAND_BITS: Option<u64> = None;

    fn from_bigint(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
    fn to_bigint(&self) -> BigInt {
        self.clone()
    }
    fn square_residues(&self) -> (u64, u64) {
        let m64 = self.mod_floor(&BigInt::from(64)).to_u64().unwrap_or(0);
        let mf = self
            .mod_floor(&BigInt::from(FILTER_MODULUS))
            .to_u64()
            .unwrap_or(0);
        (m64, mf)
    }
}

/// Natural log of an arbitrarily large integer's magnitude.
pub fn ln_abs(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        x.to_f64().map(|v| v.abs().ln()).unwrap_or(f64::INFINITY)
    } else {
        let shift = bits - 900;
        let top = (x.magnitude() >> shift).to_f64().unwrap_or(f64::INFINITY);
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// Solves `alpha·x ≡ beta (mod modulus)`, returning `(residue, reduced modulus)`.
fn solve_linear(alpha: &BigInt, beta: &BigInt, modulus: &BigInt) -> Result<(BigInt, BigInt), NtError> {
    let alpha = alpha.mod_floor(modulus);
    let beta = beta.mod_floor(modulus);
    let g = alpha.gcd(modulus);
    if g.is_zero() {
        return Err(NtError::ZeroCoefficient);
    }
    if !(&beta % &g).is_zero() {
        return Err(NtError::Inconsistent);
    }
    let n = modulus / &g;
    if n.is_one() {
        return Ok((BigInt::zero(), n));
    }
    let a = (&alpha / &g).mod_floor(&n);
    let inv = a.extended_gcd(&n).x.mod_floor(&n);
    Ok((((&beta / &g) * inv).mod_floor(&n), n))
}

/// Merges `x ≡ r1 (mod n1)` and `x ≡ r2 (mod n2)` for non-coprime moduli.
fn crt_merge(r1: &BigInt, n1: &BigInt, r2: &BigInt, n2: &BigInt) -> Result<(BigInt, BigInt), NtError> {
    let g = n1.gcd(n2);
    let diff = r2 - r1;
    if !(&diff % &g).is_zero() {
        return Err(NtError::Inconsistent);
    }
    let n2g = n2 / &g;
    let lcm = n1 * &n2g;
    if n2g.is_one() {
        return Ok((r1.mod_floor(&lcm), lcm));
    }
    let inv = (n1 / &g).extended_gcd(&n2g).x.mod_floor(&n2g);
    let t = ((diff / &g) * inv).mod_floor(&n2g);
    Ok(((r1 + n1 * t).mod_floor(&lcm), lcm))
}

/// Smallest-magnitude representative of `r (mod n)`; `+n/2` wins a tie.
pub fn min_abs_representative(r: &BigInt, n: &BigInt) -> BigInt {
    let r = r.mod_floor(n);
    let alt = &r - n;
    if alt.magnitude() < r.magnitude() {
        alt
    } else {
        r
    }
}

/// Solves the three simultaneous congruences of Dirichlet composition,
///
/// ```text
/// a2·m·B ≡ m·b1·a2                (mod 2·a1·a2)
/// a1·m·B ≡ m·b2·a1                (mod 2·a1·a2)
/// ((b1+b2)/2)·m·B ≡ m·(b1·b2+D)/2 (mod 2·a1·a2)
/// ```
///
/// and returns the solution `B` of least absolute value (positive on a tie).
pub fn solve_congruence_system(
    a1: &BigInt,
    b1: &BigInt,
    a2: &BigInt,
    b2: &BigInt,
    m: &BigInt,
    disc: &BigInt,
) -> Result<BigInt, NtError> {
    if a1.is_zero() || a2.is_zero() || m.is_zero() {
        return Err(NtError::ZeroCoefficient);
    }
    if (b1 + b2).is_odd() {
        return Err(NtError::Inconsistent);
    }
    let modulus = (BigInt::from(2) * a1 * a2).abs();
    let half_sum = (b1 + b2) / 2;
    let rhs3 = m * ((b1 * b2 + disc) / 2);
    let (r, n) = solve_linear(&(a2 * m), &(m * b1 * a2), &modulus)?;
    let (r2, n2) = solve_linear(&(a1 * m), &(m * b2 * a1), &modulus)?;
    let (r, n) = crt_merge(&r, &n, &r2, &n2)?;
    let (r, n) = match solve_linear(&(&half_sum * m), &rhs3, &modulus) {
        Ok((r3, n3)) => crt_merge(&r, &n, &r3, &n3)?,
        // 0·B ≡ 0 imposes nothing
        Err(NtError::ZeroCoefficient) if (&rhs3 % &modulus).is_zero() => (r, n),
        Err(e) => return Err(e),
    };
    Ok(min_abs_representative(&r, &n))
}

/// `gcd(a, b, c)` as a non-negative integer.
pub fn gcd3(a: &BigInt, b: &BigInt, c: &BigInt) -> BigInt {
    a.gcd(b).gcd(c)
}

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Miller–Rabin with fixed bases: deterministic below 3.3·10²⁴, probabilistic
/// (error < 4⁻²⁵) above.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for &a in &SMALL_PRIMES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime factor by trial division. Test oracle; `O(√n)`.
pub fn smallest_factor_by_trial_division(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return d;
        }
        d += 2;
    }
    n
}

/// Uniform random prime with exactly `bits` bits (`bits ≥ 2`).
pub fn random_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 2, "a prime needs at least two bits");
    loop {
        let mut c = rng.gen_biguint(bits);
        c.set_bit(bits - 1, true);
        if bits > 2 {
            c.set_bit(0, true);
        }
        if is_probable_prime(&c) {
            return c;
        }
    }
}

/// Product of two distinct random odd primes of `bits` bits each.
pub fn random_semiprime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> (BigUint, BigUint, BigUint) {
    assert!(bits >= 3, "odd prime factors need at least three bits");
    loop {
        let p = random_prime(bits, rng);
        let q = random_prime(bits, rng);
        if p != q {
            let (p, q) = if p < q { (p, q) } else { (q, p) };
            return (&p * &q, p, q);
        }
    }
}

/// Converts a non-negative `BigInt` to `BigUint`.
pub fn to_nat(v: &BigInt) -> Option<BigUint> {
    match v.sign() {
        Sign::Minus => None,
        _ => Some(v.magnitude().clone()),
    }
}

/// Parses decimal or `0x`-prefixed hexadecimal.
pub fn parse_nat(s: &str) -> Option<BigUint> {
    let s = s.trim().replace('_', "");
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        BigUint::parse_bytes(hex.as_bytes(), 16)
    } else {
        BigUint::parse_bytes(s.as_bytes(), 10)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bi(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn isqrt_examples() {
        assert_eq!(isqrt(&BigUint::from(0u32)), BigUint::from(0u32));
        assert_eq!(isqrt(&BigUint::from(21u32)), BigUint::from(4u32));
        assert_eq!(isqrt(&BigUint::from(10u64.pow(18))), BigUint::from(10u64.pow(9)));
        assert_eq!(isqrt_u64(u64::MAX), 4294967295);
        assert_eq!(isqrt_u128(u128::MAX), u64::MAX as u128);
    }

    #[test]
    fn perfect_square_examples() {
        assert_eq!(is_perfect_square(&BigUint::from(4u32)), Some(BigUint::from(2u32)));
        assert_eq!(is_perfect_square(&BigUint::from(5u32)), None);
        assert_eq!(is_perfect_square(&BigUint::from(1u32)), Some(BigUint::from(1u32)));
        assert_eq!(is_perfect_square_u64(0), Some(0));
        assert_eq!(is_perfect_square_u128(1u128 << 100), Some(1u128 << 50));
    }

    #[test]
    fn square_filter_never_rejects_a_square() {
        for r in 0u64..100_000 {
            let n = r * r;
            assert!(passes_square_filter(n & 63, n % FILTER_MODULUS), "{n}");
        }
    }

    #[test]
    fn word_types_agree_with_bigint_on_squares() {
        for v in [0i64, 1, 2, 3, 4, 15, 16, 17, 1 << 40, (1 << 20) * (1 << 20) + 1] {
            let b = BigInt::from(v);
            assert_eq!(v.perfect_sqrt().map(BigInt::from), b.perfect_sqrt());
            assert_eq!((v as i128).perfect_sqrt().map(BigInt::from), b.perfect_sqrt());
        }
    }

    /// Brute-force oracle: every B in (-2|a1 a2|, 2|a1 a2|] satisfying all three congruences.
    fn brute_solutions(a1: i64, b1: i64, a2: i64, b2: i64, m: i64, d: i64) -> Vec<i64> {
        let md = (2 * a1 * a2).abs();
        let h = (b1 + b2) / 2;
        (-md + 1..=md)
            .filter(|&b| {
                (a2 * m * b - m * b1 * a2).rem_euclid(md) == 0
                    && (a1 * m * b - m * b2 * a1).rem_euclid(md) == 0
                    && (h * m * b - m * (b1 * b2 + d) / 2).rem_euclid(md) == 0
            })
            .collect()
    }

    fn check_against_brute(a1: i64, b1: i64, a2: i64, b2: i64, d: i64) {
        let m = a1.gcd(&a2).gcd(&((b1 + b2) / 2));
        let got = solve_congruence_system(&bi(a1), &bi(b1), &bi(a2), &bi(b2), &bi(m), &bi(d))
            .expect("solvable");
        let sols = brute_solutions(a1, b1, a2, b2, m, d);
        assert!(sols.contains(&got.to_i64().unwrap()), "{got} not a solution");
        let best = sols.iter().map(|s| s.abs()).min().unwrap();
        assert_eq!(got.abs().to_i64().unwrap(), best);
        if sols.contains(&best) && sols.contains(&-best) {
            assert!(got.is_positive() || best == 0);
        }
    }

    #[test]
    fn principal_self_composition_returns_b() {
        // (1, 3, -1), D = 13
        let got = solve_congruence_system(&bi(1), &bi(3), &bi(1), &bi(3), &bi(1), &bi(13)).unwrap();
        // solutions are B ≡ 3 mod 2; least |B| with positive tie-break is 1
        assert!((got.clone() - bi(3)).is_even());
        assert_eq!(got, bi(1));
        check_against_brute(1, 3, 1, 3, 13);
    }

    #[test]
    fn self_composition_matches_brute_force() {
        // (a, b, c) with gcd(a, b) = 1, D = b^2 - 4ac
        for &(a, b, c) in &[(2, 3, -5), (3, 4, -7), (5, 7, -2), (4, 6, -3), (-3, 5, 2), (7, 9, -11)] {
            let d = b * b - 4 * a * c;
            check_against_brute(a, b, a, b, d);
        }
    }

    #[test]
    fn inconsistent_system_is_reported() {
        // wrong m: gcd is 1 but we claim 2
        let r = solve_congruence_system(&bi(3), &bi(1), &bi(5), &bi(3), &bi(2), &bi(13));
        assert!(r.is_err());
        let r = solve_congruence_system(&bi(3), &bi(1), &bi(5), &bi(2), &bi(1), &bi(13));
        assert_eq!(r, Err(NtError::Inconsistent));
    }

    #[test]
    fn primality_examples() {
        for p in [2u64, 3, 5, 101, 65537, 1_000_000_007, 2_305_843_009_213_693_951] {
            assert!(is_probable_prime(&BigUint::from(p)), "{p}");
        }
        for c in [0u64, 1, 4, 21, 561, 1_000_000_007 * 3, 3_215_031_751, 341_550_071_728_321] {
            assert!(!is_probable_prime(&BigUint::from(c)), "{c}");
        }
    }

    #[test]
    fn parse_decimal_and_hex() {
        assert_eq!(parse_nat("21"), Some(BigUint::from(21u32)));
        assert_eq!(parse_nat("0x15"), Some(BigUint::from(21u32)));
        assert_eq!(parse_nat("1_000"), Some(BigUint::from(1000u32)));
        assert_eq!(parse_nat("x"), None);
    }

    proptest! {
        #[test]
        fn isqrt_brackets(n in any::<u64>()) {
            let r = isqrt(&BigUint::from(n));
            let r1 = &r + 1u32;
            prop_assert!(&r * &r <= BigUint::from(n));
            prop_assert!(BigUint::from(n) < &r1 * &r1);
        }

        #[test]
        fn square_test_matches_isqrt(n in any::<u64>()) {
            let r = isqrt_u64(n);
            prop_assert_eq!(is_perfect_square_u64(n).is_some(), r * r == n);
            prop_assert_eq!(is_perfect_square(&BigUint::from(n)).is_some(), r * r == n);
        }

        #[test]
        fn squares_are_detected(r in 0u64..(1 << 32)) {
            prop_assert_eq!(is_perfect_square_u64(r * r), Some(r));
        }

        #[test]
        fn congruence_solution_satisfies_system(
            a1 in 1i64..30, a2 in 1i64..30, b1 in -40i64..40, k in -20i64..20, s1 in any::<bool>(), s2 in any::<bool>()
        ) {
            // pick b2 with the parity of b1, then a discriminant that both forms share
            let b2 = b1 + 2 * k;
            let a1 = if s1 { -a1 } else { a1 };
            let a2 = if s2 { -a2 } else { a2 };
            // need D ≡ b1^2 mod 4a1 and D ≡ b2^2 mod 4a2; search a small one
            let d = (1..4000i64).map(|t| b1 * b1 + 4 * a1.abs() * t)
                .find(|d| (d - b2 * b2).rem_euclid(4 * a2.abs()) == 0);
            prop_assume!(d.is_some());
            let d = d.unwrap();
            check_against_brute(a1, b1, a2, b2, d);
        }
    }
}
