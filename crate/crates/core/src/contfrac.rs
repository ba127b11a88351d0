//! Two-sided continued-fraction expansion of `√N` and of the normalized
//! square root `α = (√N + P₋₁)/2`.
//!
//! A [`CfState`] at index `i` holds `P_{i−1}`, `Q_i`, `Q_{i−1}` and
//! `b_i`, so that `x_i = (√N + P_{i−1})/Q_i`. Every quantity stays below
//! `2√N`, which is what lets the word-size engines run the hot loops.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nt::{self, CfInt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Expansion of `√N` with `Q₀ = 1`; forms of discriminant `4N`.
    Standard,
    /// Expansion of `(√N + P₋₁)/2` for `N ≡ 1 (mod 4)`; forms of discriminant `N`.
    Normalized,
}

impl Convention {
    /// `Normalized` when `N ≡ 1 (mod 4)`, `Standard` otherwise.
    pub fn preferred_for(n: &BigUint) -> Self {
        if (n % 4u32) == BigUint::one() {
            Convention::Normalized
        } else {
            Convention::Standard
        }
    }

    /// Discriminant of the forms attached to an expansion of `N`.
    pub fn discriminant(self, n: &BigUint) -> BigInt {
        match self {
            Convention::Standard => BigInt::from(n.clone()) * 4,
            Convention::Normalized => BigInt::from(n.clone()),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Standard => "standard",
            Convention::Normalized => "normalized",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfError {
    #[error("radicand must be at least 2")]
    TooSmall,
    #[error("{n} is a perfect square ({root}²)")]
    PerfectSquare { n: BigUint, root: BigUint },
    #[error("normalized expansion needs N ≡ 1 (mod 4), got N ≡ {residue}")]
    BadConvention { residue: u32 },
    #[error("radicand of {bits} bits overflows the selected integer engine")]
    Overflow { bits: u64 },
    #[error("the normalized convention applies to forms of odd discriminant only")]
    ParityViolation,
}

/// The number being expanded, with cached `⌊√N⌋` and `√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Radicand<T> {
    pub n: T,
    pub r: T,
    pub sqrt: f64,
    pub convention: Convention,
    pub n_big: BigUint,
}

impl<T: CfInt> Radicand<T> {
    pub fn new(n: &BigUint, convention: Convention) -> Result<Arc<Self>, CfError> {
        if *n < BigUint::from(2u32) {
            return Err(CfError::TooSmall);
        }
        if let Some(root) = nt::is_perfect_square(n) {
            return Err(CfError::PerfectSquare { n: n.clone(), root });
        }
        if convention == Convention::Normalized {
            let residue = (n % 4u32).to_u32().unwrap_or(0);
            if residue != 1 {
                return Err(CfError::BadConvention { residue });
            }
        }
        if !T::fits_radicand(n) {
            return Err(CfError::Overflow { bits: n.bits() });
        }
        let nb = BigInt::from(n.clone());
        let n_t = T::from_bigint(&nb).ok_or(CfError::Overflow { bits: n.bits() })?;
        let r = n_t.sqrt();
        Ok(Arc::new(Radicand {
            sqrt: sqrt_f64(n),
            n: n_t,
            r,
            convention,
            n_big: n.clone(),
        }))
    }

    pub fn discriminant(&self) -> BigInt {
        self.convention.discriminant(&self.n_big)
    }
}

/// `√n` as a float, accurate for any size.
pub fn sqrt_f64(n: &BigUint) -> f64 {
    if n.bits() < 1000 {
        n.to_f64().unwrap_or(f64::INFINITY).sqrt()
    } else {
        let shift = (n.bits() - 900) & !1;
        (n >> shift).to_f64().unwrap_or(f64::INFINITY).sqrt() * 2f64.powi((shift / 2) as i32)
    }
}

/// One position of the two-sided expansion: `x_i = (√N + P_{i−1})/Q_i`.
#[derive(Debug, Clone)]
pub struct CfState<T> {
    rad: Arc<Radicand<T>>,
    p_prev: T,
    q: T,
    q_prev: T,
    b: T,
    index: i64,
}

impl<T: CfInt> PartialEq for CfState<T> {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index && self.same_position(other)
    }
}

impl<T: CfInt> CfState<T> {
    /// Builds a state from `(Q_{i−1}, P_{i−1}, Q_i)`; `b_i` is derived.
    /// The caller guarantees `N = P_{i−1}² + Q_{i−1}·Q_i` and reducedness.
    pub fn from_parts(rad: Arc<Radicand<T>>, q_prev: T, p_prev: T, q: T, index: i64) -> Self {
        let b = (rad.r.clone() + p_prev.clone()) / q.clone();
        CfState { rad, p_prev, q, q_prev, b, index }
    }

    pub fn radicand(&self) -> &Arc<Radicand<T>> {
        &self.rad
    }
    pub fn n(&self) -> &T {
        &self.rad.n
    }
    pub fn r(&self) -> &T {
        &self.rad.r
    }
    pub fn convention(&self) -> Convention {
        self.rad.convention
    }
    pub fn index(&self) -> i64 {
        self.index
    }
    /// `P_{i−1}`.
    pub fn p_prev(&self) -> &T {
        &self.p_prev
    }
    /// `Q_i`.
    pub fn q(&self) -> &T {
        &self.q
    }
    /// `Q_{i−1}`.
    pub fn q_prev(&self) -> &T {
        &self.q_prev
    }
    /// `b_i`.
    pub fn b(&self) -> &T {
        &self.b
    }
    /// `P_i = b_i·Q_i − P_{i−1}`.
    pub fn p(&self) -> T {
        self.b.clone() * self.q.clone() - self.p_prev.clone()
    }
    /// `Q_{i+1} = Q_{i−1} + b_i(P_{i−1} − P_i)`.
    pub fn q_next(&self) -> T {
        self.q_prev.clone() + self.b.clone() * (self.p_prev.clone() - self.p())
    }

    /// Same `(P_{i−1}, Q_i, Q_{i−1}, b_i)`, ignoring the index.
    pub fn same_position(&self, other: &Self) -> bool {
        self.p_prev == other.p_prev && self.q == other.q && self.q_prev == other.q_prev && self.b == other.b
    }

    /// `x_i` as a float.
    pub fn complete_quotient(&self) -> f64 {
        (self.rad.sqrt + self.p_prev.to_f64().unwrap_or(f64::NAN)) / self.q.to_f64().unwrap_or(f64::NAN)
    }

    pub fn advance(&mut self) {
        let p = self.p();
        let q_next = self.q_prev.clone() + self.b.clone() * (self.p_prev.clone() - p.clone());
        let b_next = (self.rad.r.clone() + p.clone()) / q_next.clone();
        self.q_prev = std::mem::replace(&mut self.q, q_next);
        self.p_prev = p;
        self.b = b_next;
        self.index += 1;
    }

    pub fn retreat(&mut self) {
        let b_back = (self.rad.r.clone() + self.p_prev.clone()) / self.q_prev.clone();
        let p_back = b_back.clone() * self.q_prev.clone() - self.p_prev.clone();
        let q_back = self.q.clone() - b_back.clone() * (p_back.clone() - self.p_prev.clone());
        self.q = std::mem::replace(&mut self.q_prev, q_back);
        self.p_prev = p_back;
        self.b = b_back;
        self.index -= 1;
    }

    pub fn step_forward(&self) -> Self {
        let mut s = self.clone();
        s.advance();
        s
    }

    pub fn step_backward(&self) -> Self {
        let mut s = self.clone();
        s.retreat();
        s
    }

    /// Lifts to arbitrary precision.
    pub fn to_big(&self) -> CfState<BigInt> {
        let rad = Arc::new(Radicand {
            n: self.rad.n.to_bigint(),
            r: self.rad.r.to_bigint(),
            sqrt: self.rad.sqrt,
            convention: self.rad.convention,
            n_big: self.rad.n_big.clone(),
        });
        CfState {
            rad,
            p_prev: self.p_prev.to_bigint(),
            q: self.q.to_bigint(),
            q_prev: self.q_prev.to_bigint(),
            b: self.b.to_bigint(),
            index: self.index,
        }
    }

    /// Checks Theorem 2 (a)–(g) and (i) at this state, exactly.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = &self.rad.n;
        let r = &self.rad.r;
        let (pp, q, qp, b) = (&self.p_prev, &self.q, &self.q_prev, &self.b);
        let p = self.p();
        let qn = self.q_next();
        let fail = |what: &str| Err(format!("{what} fails at index {} ({self:?})", self.index));
        // (a), at i−1 and at i
        if pp.clone() * pp.clone() + qp.clone() * q.clone() != *n {
            return fail("(a) N = P_{i-1}^2 + Q_{i-1}Q_i");
        }
        if p.clone() * p.clone() + q.clone() * qn.clone() != *n {
            return fail("(a) N = P_i^2 + Q_iQ_{i+1}");
        }
        // (f) and positivity
        if !q.is_positive() || !qp.is_positive() || !qn.is_positive() {
            return fail("(f) Q positive integer");
        }
        // (c)
        if (r.clone() + pp.clone()) / q.clone() != *b || *b < T::one() {
            return fail("(c) b_i = floor((r + P_{i-1})/Q_i) >= 1");
        }
        // (d): 0 < P_i < √N  ⇔  0 < P_i ≤ r
        if !p.is_positive() || p > *r {
            return fail("(d) 0 < P_i < sqrt N");
        }
        // (e): |√N − Q_i| < P_{i−1}  ⇔  r − P_{i−1} < Q_i ≤ r + P_{i−1}
        if !(r.clone() - pp.clone() < *q && *q <= r.clone() + pp.clone()) {
            return fail("(e) |sqrt N - Q_i| < P_{i-1}");
        }
        // (i): floor((√N + P_i)/Q_i) = b_i
        if (r.clone() + p.clone()) / q.clone() != *b {
            return fail("(i) floor((sqrt N + P_i)/Q_i) = b_i");
        }
        // (g) is the recurrence itself; verify it against (a)
        if qn != qp.clone() + b.clone() * (pp.clone() - p) {
            return fail("(g) Q_{i+1} = Q_{i-1} + b_i(P_{i-1} - P_i)");
        }
        // P_{i−1}² ≡ N (mod Q_i)
        if !((n.clone() - pp.clone() * pp.clone()) % q.clone()).is_zero() {
            return fail("P_{i-1}^2 ≡ N mod Q_i");
        }
        Ok(())
    }
}

/// State at index 0.
///
/// `Standard` starts from the purely periodic surd `√N + ⌊√N⌋`, so
/// `P₋₁ = r`, `Q₀ = 1`, `b₀ = 2r`; from index 1 on it coincides with the
/// expansion of `√N`. `Normalized` starts from `α` with `Q₀ = 2`.
pub fn init_expansion<T: CfInt>(n: &BigUint, convention: Convention) -> Result<CfState<T>, CfError> {
    let rad = Radicand::<T>::new(n, convention)?;
    Ok(initial_state(rad))
}

pub fn initial_state<T: CfInt>(rad: Arc<Radicand<T>>) -> CfState<T> {
    let one = T::one();
    let two = one.clone() + one.clone();
    let r = rad.r.clone();
    match rad.convention {
        Convention::Standard => {
            let q_prev = rad.n.clone() - r.clone() * r.clone();
            CfState::from_parts(rad, q_prev, r, one, 0)
        }
        Convention::Normalized => {
            let p = if r.is_odd() { r } else { r - one };
            let q_prev = (rad.n.clone() - p.clone() * p.clone()) / two.clone();
            CfState::from_parts(rad, q_prev, p, two, 0)
        }
    }
}

/// Least `π > 0` with `state(π) = state(0)` within `max_steps` steps.
pub fn find_period<T: CfInt>(s0: &CfState<T>, max_steps: u64) -> Option<u64> {
    let mut s = s0.clone();
    for k in 1..=max_steps {
        s.advance();
        if s.same_position(s0) {
            return Some(k);
        }
    }
    None
}

/// Default step budget for exhaustive walks: `4·⌈√N⌉ + 16`.
pub fn default_max_steps(n: &BigUint) -> u64 {
    let r = nt::isqrt(n).to_u64().unwrap_or(u64::MAX / 8);
    r.saturating_add(1).saturating_mul(4).saturating_add(16)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryKind {
    /// `P_s = P_{s−1}`: the even-period symmetry point.
    Even,
    /// `Q_{s+1} = Q_s`: the odd-period symmetry point.
    Odd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SymmetryOutcome {
    Factor { factor: BigUint, q_s: BigUint, index: i64, kind: SymmetryKind },
    /// Even-period symmetry whose `Q_s` shares only trivial divisors with `N`.
    Trivial { q_s: BigUint, index: i64 },
    /// Odd period with `gcd(Q_s, N)` trivial: `−1` is a quadratic residue of `N`.
    OddPeriodQrMinusOne { q_s: BigUint, index: i64 },
    Exhausted { steps: u64 },
}

impl SymmetryOutcome {
    pub fn factor(&self) -> Option<&BigUint> {
        match self {
            SymmetryOutcome::Factor { factor, .. } => Some(factor),
            _ => None,
        }
    }
}

/// Walks forward from `s0` to the first symmetry point and extracts
/// `gcd(Q_s, N)`.
pub fn symmetry_factor<T: CfInt>(s0: &CfState<T>, max_steps: u64) -> SymmetryOutcome {
    let q0 = s0.q().clone();
    let mut s = s0.clone();
    for _ in 0..max_steps {
        s.advance();
        let p = s.p();
        let kind = if p == *s.p_prev() {
            SymmetryKind::Even
        } else if s.q_next() == *s.q() {
            SymmetryKind::Odd
        } else {
            continue;
        };
        let q_s = nt::to_nat(&s.q().to_bigint()).expect("Q is positive");
        let n = &s.radicand().n_big;
        let g = q_s.gcd(n);
        let index = s.index();
        if !g.is_one() && g != *n {
            return SymmetryOutcome::Factor { factor: g, q_s, index, kind };
        }
        return if kind == SymmetryKind::Even && *s.q() != q0 {
            SymmetryOutcome::Trivial { q_s, index }
        } else {
            SymmetryOutcome::OddPeriodQrMinusOne { q_s, index }
        };
    }
    SymmetryOutcome::Exhausted { steps: max_steps }
}

/// `A_{i−1}`, `B_{i−1}` for the convergents of `√N`, with `Q_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergentPair {
    pub a: BigUint,
    pub b: BigUint,
    pub q: BigUint,
    pub index: i64,
}

/// The first `count` convergent pairs of `√N` (`i = 0, 1, …`), reduced
/// mod `N` when `modular` is set and exact otherwise.
pub fn convergents(n: &BigUint, count: usize, modular: bool) -> Result<Vec<ConvergentPair>, CfError> {
    let mut s = init_expansion::<BigInt>(n, Convention::Standard)?;
    let nn = BigInt::from(n.clone());
    let reduce = |v: BigInt| if modular { v.mod_floor(&nn) } else { v };
    let (mut a_prev, mut a) = (BigInt::zero(), BigInt::one());
    let (mut b_prev, mut b) = (BigInt::one(), BigInt::zero());
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        out.push(ConvergentPair {
            a: a.magnitude().clone(),
            b: b.magnitude().clone(),
            q: s.q().magnitude().clone(),
            index: i as i64,
        });
        // partial quotient b_i of √N: r at i = 0, then the periodic tail
        let pq = if i == 0 { s.r().clone() } else { s.b().clone() };
        let a_next = reduce(&pq * &a + &a_prev);
        let b_next = reduce(&pq * &b + &b_prev);
        a_prev = std::mem::replace(&mut a, a_next);
        b_prev = std::mem::replace(&mut b, b_next);
        s.advance();
    }
    Ok(out)
}

/// One row of a continued-fraction table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfRow {
    pub i: i64,
    pub b: BigInt,
    pub p: BigInt,
    pub q: BigInt,
}

/// Rows `i = 0..steps` (or `0, −1, …` when `backward`), `(b_i, P_i, Q_i)`.
/// For `Standard`, row 0 shows the partial quotient `⌊√N⌋` of `√N` itself.
pub fn cf_table(n: &BigUint, convention: Convention, steps: usize, backward: bool) -> Result<Vec<CfRow>, CfError> {
    let mut s = init_expansion::<BigInt>(n, convention)?;
    let mut rows = Vec::with_capacity(steps);
    for _ in 0..steps {
        let b = if s.index() == 0 && convention == Convention::Standard {
            s.r().clone()
        } else {
            s.b().clone()
        };
        rows.push(CfRow { i: s.index(), b, p: s.p(), q: s.q().clone() });
        if backward {
            s.retreat();
        } else {
            s.advance();
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkDirection {
    Forward,
    Backward,
}

/// A symmetry point found by [`tandem_symmetry_search`].
#[derive(Debug, Clone)]
pub struct TandemHit<T> {
    pub state: CfState<T>,
    pub steps: u64,
    pub direction: WalkDirection,
    /// Distance walked, negative for the reversed cursor.
    pub distance: f64,
    pub kind: SymmetryKind,
}

fn symmetric<T: CfInt>(s: &CfState<T>, accept_odd: bool) -> Option<SymmetryKind> {
    if s.p() == *s.p_prev() {
        Some(SymmetryKind::Even)
    } else if accept_odd && s.q_next() == *s.q() {
        Some(SymmetryKind::Odd)
    } else {
        None
    }
}

/// Advances `forward` and `reversed` alternately until either sits on a
/// symmetry point. `reversed` is the cursor of the reversed form, so
/// stepping it forward walks the original cycle backward.
pub fn tandem_symmetry_search<T: CfInt>(
    forward: CfState<T>,
    reversed: CfState<T>,
    max_steps: u64,
    accept_odd: bool,
) -> Option<TandemHit<T>> {
    tandem_symmetry_search_until(forward, reversed, max_steps, accept_odd, |_| true).map(|o| o.hit)
}

/// Result of [`tandem_symmetry_search_until`].
#[derive(Debug, Clone)]
pub struct TandemOutcome<T: CfInt> {
    /// The first accepted hit, or the first hit seen if none was accepted.
    pub hit: TandemHit<T>,
    pub accepted: bool,
    /// Signed distances of every symmetry point passed, in order.
    pub seen: Vec<f64>,
}

/// As [`tandem_symmetry_search`], but walks past symmetry points that
/// `accept` rejects.
pub fn tandem_symmetry_search_until<T: CfInt>(
    forward: CfState<T>,
    reversed: CfState<T>,
    max_steps: u64,
    accept_odd: bool,
    mut accept: impl FnMut(&CfState<T>) -> bool,
) -> Option<TandemOutcome<T>> {
    let start = forward.clone();
    let (mut f, mut r) = (forward, reversed);
    let (mut df, mut dr) = (0.0f64, 0.0f64);
    let mut first = None;
    let mut seen = Vec::new();
    for steps in 0..=max_steps {
        for (state, direction, distance) in [(&f, WalkDirection::Forward, df), (&r, WalkDirection::Backward, -dr)] {
            if let Some(kind) = symmetric(state, accept_odd) {
                seen.push(distance);
                let hit = TandemHit { state: state.clone(), steps, direction, distance, kind };
                if accept(state) {
                    return Some(TandemOutcome { hit, accepted: true, seen });
                }
                first.get_or_insert(hit);
            }
        }
        // ρ-distance of the form being left behind
        df += f.complete_quotient().ln();
        dr += r.complete_quotient().ln();
        f.advance();
        r.advance();
        if f.same_position(&start) {
            // the forward walk alone has covered the cycle
            break;
        }
    }
    first.map(|hit| TandemOutcome { hit, accepted: false, seen })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn init_21_standard() {
        let s = init_expansion::<i64>(&nat(21), Convention::Standard).unwrap();
        assert_eq!((s.p(), *s.q(), s.q_next()), (4, 1, 5));
        assert_eq!(*s.p_prev(), 4);
        s.check_invariants().unwrap();
    }

    #[test]
    fn init_13_normalized() {
        let s = init_expansion::<i64>(&nat(13), Convention::Normalized).unwrap();
        assert_eq!((*s.p_prev(), *s.q(), *s.b()), (3, 2, 3));
        let t = s.step_forward();
        assert!(t.same_position(&s));
        assert_eq!(find_period(&s, 10), Some(1));
    }

    #[test]
    fn init_errors() {
        assert!(matches!(
            init_expansion::<i64>(&nat(25), Convention::Standard),
            Err(CfError::PerfectSquare { .. })
        ));
        assert_eq!(
            init_expansion::<i64>(&nat(23), Convention::Normalized).unwrap_err(),
            CfError::BadConvention { residue: 3 }
        );
        assert_eq!(init_expansion::<i64>(&nat(1), Convention::Standard).unwrap_err(), CfError::TooSmall);
        assert!(matches!(
            init_expansion::<i64>(&((BigUint::one() << 70u32) + 1u32), Convention::Standard),
            Err(CfError::Overflow { .. })
        ));
    }

    #[test]
    fn step_21_by_hand() {
        let s1 = init_expansion::<i64>(&nat(21), Convention::Standard).unwrap().step_forward();
        assert_eq!((*s1.p_prev(), *s1.q(), *s1.b(), s1.p(), s1.q_next()), (4, 5, 1, 1, 4));
    }

    #[test]
    fn quotients_of_sqrt_21() {
        let rows = cf_table(&nat(21), Convention::Standard, 14, false).unwrap();
        let b: Vec<i64> = rows.iter().map(|r| r.b.to_i64().unwrap()).collect();
        assert_eq!(b, [4, 1, 1, 2, 1, 1, 8, 1, 1, 2, 1, 1, 8, 1]);
        let q: Vec<i64> = rows.iter().take(7).map(|r| r.q.to_i64().unwrap()).collect();
        assert_eq!(q, [1, 5, 4, 3, 4, 5, 1]);
    }

    #[test]
    fn quotients_match_fixed_point_expansion() {
        // 512-bit fixed point: x_{k+1} = 1/(x_k - b_k)
        let scale = BigUint::one() << 512u32;
        for n in [2u64, 3, 7, 21, 94, 139, 1_000_003, 999_999_999_989] {
            let rows = cf_table(&nat(n), Convention::Standard, 12, false).unwrap();
            let mut x = (nat(n) * &scale * &scale).sqrt();
            for row in &rows {
                let bf = &x >> 512u32;
                assert_eq!(BigInt::from(bf.clone()), row.b, "N={n} i={}", row.i);
                let frac = &x - (&bf << 512u32);
                x = (&scale * &scale) / frac;
            }
        }
    }

    #[test]
    fn periods() {
        let s = init_expansion::<i64>(&nat(21), Convention::Standard).unwrap();
        assert_eq!(find_period(&s, 100), Some(6));
        assert_eq!(find_period(&s, 0), None);
        assert_eq!(find_period(&s, 5), None);
    }

    #[test]
    fn backward_from_zero_mirrors() {
        let s = init_expansion::<i64>(&nat(21), Convention::Standard).unwrap();
        let back = s.step_backward();
        assert_eq!(back.index(), -1);
        assert_eq!(*back.q(), 5);
        assert_eq!(back.step_forward(), s);
    }

    #[test]
    fn symmetry_21() {
        let s = init_expansion::<i64>(&nat(21), Convention::Standard).unwrap();
        match symmetry_factor(&s, 100) {
            SymmetryOutcome::Factor { factor, q_s, index, kind } => {
                assert_eq!((factor, q_s, index, kind), (nat(3), nat(3), 3, SymmetryKind::Even));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symmetry_prime_is_not_a_factor() {
        let s = init_expansion::<i64>(&nat(13), Convention::Standard).unwrap();
        assert!(symmetry_factor(&s, 100).factor().is_none());
        let s = init_expansion::<i64>(&nat(13), Convention::Normalized).unwrap();
        assert!(matches!(symmetry_factor(&s, 100), SymmetryOutcome::OddPeriodQrMinusOne { .. }));
    }

    #[test]
    fn convergent_identity_exact() {
        for n in [2u64, 21, 97, 1234, 99991] {
            let nn = BigInt::from(n);
            for c in convergents(&nat(n), 30, false).unwrap() {
                let lhs = BigInt::from(c.a.clone()).pow(2) - BigInt::from(c.b.clone()).pow(2) * &nn;
                let sign: i32 = if c.index % 2 == 0 { 1 } else { -1 };
                assert_eq!(lhs, BigInt::from(c.q.clone()) * sign, "N={n} i={}", c.index);
            }
        }
    }

    #[test]
    fn convergent_identity_mod_n() {
        let n = 1_000_000_007u64 * 3;
        let nn = BigInt::from(n);
        for c in convergents(&nat(n), 200, true).unwrap() {
            let lhs = (BigInt::from(c.a.clone()).pow(2)).mod_floor(&nn);
            let sign: i32 = if c.index % 2 == 0 { 1 } else { -1 };
            assert_eq!(lhs, (BigInt::from(c.q.clone()) * sign).mod_floor(&nn));
        }
    }

    #[test]
    fn engines_agree() {
        for n in [21u64, 1_000_003, (1 << 61) - 1, 999_999_999_989 * 7] {
            let a = init_expansion::<i64>(&nat(n), Convention::Standard).unwrap();
            let b = init_expansion::<i128>(&nat(n), Convention::Standard).unwrap();
            let c = init_expansion::<BigInt>(&nat(n), Convention::Standard).unwrap();
            let (mut a, mut b, mut c) = (a, b, c);
            for _ in 0..500 {
                assert_eq!(a.to_big(), c);
                assert_eq!(b.to_big(), c);
                a.advance();
                b.advance();
                c.advance();
            }
        }
    }

    #[test]
    fn tandem_finds_half_period_of_21() {
        let s = init_expansion::<i64>(&nat(21), Convention::Standard).unwrap().step_forward().step_forward();
        let rev = CfState::from_parts(s.radicand().clone(), *s.q(), *s.p_prev(), *s.q_prev(), 0);
        let hit = tandem_symmetry_search(s, rev, 20, false).unwrap();
        assert_eq!(*hit.state.q(), 3);
        assert_eq!(hit.steps, 1);
        assert_eq!(hit.direction, WalkDirection::Forward);
    }
}
