//! Infrastructure distance, the regulator, the composition distance
//! formula, and baby-step giant-step factoring from a known regulator.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contfrac::{self, CfError, CfState, Convention, SymmetryKind};
use crate::nt::{self, CfInt};
use crate::qforms::{self, Discriminant, FormError, QuadForm};
use crate::report::{FactorReport, Method};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfraError {
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("no period found within {0} steps")]
    PeriodNotFound(u64),
    #[error("forms are not on the same cycle")]
    NotEquivalent,
    #[error("no factor: {0}")]
    NoFactor(NoFactorReason),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoFactorReason {
    Prime,
    /// Odd period and `−1` a quadratic residue of `N`.
    OddPeriodQrMinusOne,
    /// The half-period symmetry point gave only `1` or `N`.
    TrivialSymmetry,
    Exhausted,
}

impl std::fmt::Display for NoFactorReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoFactorReason::Prime => "input is prime",
            NoFactorReason::OddPeriodQrMinusOne => "odd period, -1 is a quadratic residue",
            NoFactorReason::TrivialSymmetry => "symmetry point gave a trivial divisor",
            NoFactorReason::Exhausted => "step budget exhausted",
        })
    }
}

/// A distance, optionally reduced into `[0, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceValue {
    pub value: f64,
    pub modulus: Option<f64>,
}

impl DistanceValue {
    pub fn new(value: f64, modulus: Option<f64>) -> Self {
        let value = match modulus {
            Some(r) => reduce_mod(value, r),
            None => value,
        };
        DistanceValue { value, modulus }
    }
}

impl std::ops::Add for DistanceValue {
    type Output = DistanceValue;
    fn add(self, o: Self) -> Self {
        DistanceValue::new(self.value + o.value, self.modulus.or(o.modulus))
    }
}

/// `x mod r` in `[0, r)`.
pub fn reduce_mod(x: f64, r: f64) -> f64 {
    let v = x - r * (x / r).floor();
    if v >= r {
        0.0
    } else {
        v
    }
}

/// `|x − k·r|` for the nearest multiple `k·r`.
pub fn circular_residual(x: f64, r: f64) -> f64 {
    (x - r * (x / r).round()).abs()
}

/// `ln x_k` for the state at index `k`: `ln((√N + P_{k−1})/Q_k)`.
pub fn step_distance<T: CfInt>(s: &CfState<T>) -> f64 {
    s.complete_quotient().ln()
}

/// Running `Σ ln x_k`, taking one logarithm per ~700 steps.
#[derive(Debug, Clone, Copy)]
pub struct DistanceAccumulator {
    logs: f64,
    product: f64,
}

impl Default for DistanceAccumulator {
    fn default() -> Self {
        DistanceAccumulator { logs: 0.0, product: 1.0 }
    }
}

impl DistanceAccumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.product *= x;
        if self.product > 1e290 {
            self.logs += self.product.ln();
            self.product = 1.0;
        }
    }

    pub fn value(&self) -> f64 {
        self.logs + self.product.ln()
    }
}

/// `D(x_m, x_n)`: sum of step distances from the state `s` (index `m`) over `n − m` steps.
pub fn walk_distance<T: CfInt>(s: &CfState<T>, steps: u64) -> f64 {
    let mut st = s.clone();
    let mut acc = DistanceAccumulator::default();
    for _ in 0..steps {
        st.advance();
        acc.push(st.complete_quotient());
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regulator {
    pub value: f64,
    pub period: u64,
}

fn regulator_with<T: CfInt>(n: &BigUint, convention: Convention, max_steps: u64) -> Result<Regulator, InfraError> {
    let s0 = contfrac::init_expansion::<T>(n, convention)?;
    let mut s = s0.clone();
    let mut acc = DistanceAccumulator::default();
    for k in 1..=max_steps {
        s.advance();
        acc.push(s.complete_quotient());
        if s.same_position(&s0) {
            return Ok(Regulator { value: acc.value(), period: k });
        }
    }
    Err(InfraError::PeriodNotFound(max_steps))
}

/// Distance around the principal cycle, with its period.
pub fn regulator(n: &BigUint, convention: Convention) -> Result<Regulator, InfraError> {
    regulator_bounded(n, convention, contfrac::default_max_steps(n))
}

pub fn regulator_bounded(n: &BigUint, convention: Convention, max_steps: u64) -> Result<Regulator, InfraError> {
    crate::dispatch_engine!(n, regulator_with(n, convention, max_steps))
}

/// Distance of the `ρ`-walk from `from` to the first form projectively equal to `to`.
pub fn form_walk_distance(from: &QuadForm, to: &QuadForm, max_len: usize) -> Result<f64, InfraError> {
    if !from.is_reduced() || !to.is_reduced() {
        return Err(FormError::NotReduced.into());
    }
    let key = to.projective_key();
    let mut g = from.clone();
    let mut d = 0.0;
    for _ in 0..=max_len {
        if g.projective_key() == key {
            return Ok(d);
        }
        d += g.rho_distance();
        g = g.rho()?;
    }
    Err(InfraError::NotEquivalent)
}

/// A point of symmetry on a projective cycle. `Even` points sit between
/// `(c, b, a)` and `form = (a, b, c)`; `Odd` points are forms with `|a| = |c|`.
#[derive(Debug, Clone)]
pub struct SymmetryCenter {
    pub form: QuadForm,
    pub kind: SymmetryKind,
    /// Walk distance from the cycle start to `form`.
    pub walk: f64,
    /// `walk + ½·ln|a|`, plus half the step of `form` for `Odd` points.
    pub center: f64,
}

/// Symmetry centres of the projective cycle of `f`, with the cycle distance.
/// Under the product-of-quotients distance the two centres of an ambiguous
/// cycle are exactly half the cycle apart; the raw walk distances differ from
/// that by `½·ln(|a₂|/|a₁|)`.
pub fn symmetry_centers(f: &QuadForm, max_len: usize) -> Result<(Vec<SymmetryCenter>, f64), InfraError> {
    let cyc = f.projective_cycle(max_len)?;
    let mut out = Vec::new();
    let mut walk = 0.0;
    for g in &cyc {
        let half_ln_a = 0.5 * nt::ln_abs(&g.a);
        let step = g.rho_distance();
        if g.projective_key() == g.rho_inv()?.reversed().projective_key() {
            out.push(SymmetryCenter { form: g.clone(), kind: SymmetryKind::Even, walk, center: walk + half_ln_a });
        }
        if g.a.magnitude() == g.c.magnitude() {
            out.push(SymmetryCenter { form: g.clone(), kind: SymmetryKind::Odd, walk, center: walk + half_ln_a + 0.5 * step });
        }
        walk += step;
    }
    Ok((out, walk))
}

/// One instance of the composition distance formula.
#[derive(Debug, Clone)]
pub struct DistanceFormulaInput {
    pub f1: QuadForm,
    pub fk: QuadForm,
    pub g1: QuadForm,
    pub gl: QuadForm,
    /// `D(F₁, F_k)`.
    pub d_f: f64,
    /// `D(G₁, G_ℓ)`.
    pub d_g: f64,
    pub regulator: f64,
}

/// `|D(F₁#G₁, F_k#G_ℓ) − (D(F₁,F_k) + D(G₁,G_ℓ) + D_ρ₂ − D_ρ₁ + ln(m₂/m₁))|`
/// reduced mod `R`, where `(m₁, D_ρ₁)` come from `F₁#G₁` and `(m₂, D_ρ₂)`
/// from `F_k#G_ℓ`. The left side is measured by walking the composed cycle.
pub fn check_distance_formula(inst: &DistanceFormulaInput, max_len: usize) -> Result<f64, InfraError> {
    let c1 = inst.f1.compose_reduce(&inst.g1)?;
    let c2 = inst.fk.compose_reduce(&inst.gl)?;
    let lhs = form_walk_distance(&c1.form, &c2.form, max_len)?;
    let rhs = inst.d_f + inst.d_g + c2.dist_rho - c1.dist_rho + nt::ln_abs(&c2.m) - nt::ln_abs(&c1.m);
    Ok(circular_residual(lhs - rhs, inst.regulator))
}

/// Distance of `X#Y` from the cycle origin, given those of `X` and `Y`.
pub fn composed_distance(d_x: f64, d_y: f64, comp: &qforms::ReducedComposition) -> f64 {
    d_x + d_y + comp.distance_shift()
}

/// Statistics of a [`bsgs_factor`] run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsgsStats {
    pub doublings: u64,
    pub refinements: u64,
    pub baby_steps: u64,
    /// Tracked distance of the form where the baby steps start.
    pub landing_distance: f64,
    pub convention: Convention,
}

impl BsgsStats {
    pub fn giant_steps(&self) -> u64 {
        self.doublings + self.refinements
    }
}

/// Factors `n` from its regulator: giant steps by repeated squaring of a
/// principal-cycle form until within `R/4` of the half-period point at
/// distance `R/2`, then baby steps to the symmetry point and `gcd(Q_s, N)`.
///
/// `r` must be `regulator(n, Convention::preferred_for(n))`.
pub fn bsgs_factor(n: &BigUint, r: f64) -> Result<(FactorReport, BsgsStats), InfraError> {
    bsgs_factor_k(n, 1, r)
}

/// [`bsgs_factor`] on the principal cycle of `k·n`, splitting `n` by
/// `gcd(Q_s, n)`. `r` must be the regulator of `k·n` in its preferred convention.
pub fn bsgs_factor_k(n: &BigUint, k: u64, r: f64) -> Result<(FactorReport, BsgsStats), InfraError> {
    let start = Instant::now();
    if n.is_even() || *n < BigUint::from(9u32) {
        return Err(InfraError::InvalidInput("N must be odd and at least 9".into()));
    }
    if k == 0 {
        return Err(InfraError::InvalidInput("multiplier must be positive".into()));
    }
    if nt::is_probable_prime(n) {
        return Err(InfraError::NoFactor(NoFactorReason::Prime));
    }
    if let Some(root) = nt::is_perfect_square(n) {
        let rep = FactorReport::from_divisor(n, &root, Method::Trivial).expect("proper root");
        return Ok((rep, BsgsStats { doublings: 0, refinements: 0, baby_steps: 0, landing_distance: 0.0, convention: Convention::Standard }));
    }
    let orig = n;
    let kn = n * k;
    let n = &kn;
    let convention = Convention::preferred_for(n);
    let s0 = contfrac::init_expansion::<BigInt>(n, convention)?;
    let mut stats = BsgsStats { doublings: 0, refinements: 0, baby_steps: 0, landing_distance: 0.0, convention };
    let target = r / 2.0;

    // φ₁ at distance ln x₁
    let s1 = s0.step_forward();
    let s2 = s1.step_forward();
    let base = (qforms::cycle_form(&s2), step_distance(&s1));
    let (form, dist) = if base.1 < target - r / 4.0 {
        let mut ladder = vec![base.clone()];
        let (mut f, mut d) = base;
        while d < target - r / 4.0 {
            let c = f.compose_reduce(&f)?;
            d = composed_distance(d, d, &c);
            f = c.form;
            stats.doublings += 1;
            ladder.push((f.clone(), d));
        }
        ladder.pop();
        for (g, dg) in ladder.iter().rev() {
            if d + dg <= target {
                let c = f.compose_reduce(g)?;
                d = composed_distance(d, *dg, &c);
                f = c.form;
                stats.refinements += 1;
            }
        }
        (f, d)
    } else {
        (qforms::cycle_form(&s1), 0.0)
    };
    stats.landing_distance = dist;

    let rad = s0.radicand().clone();
    let q0 = s0.q().clone();
    let mut fwd = qforms::cursor_of_form(&rad, &form)?;
    let mut rev = qforms::cursor_of_form(&rad, &form.reversed())?;
    let budget = contfrac::default_max_steps(n);
    let is_half_period = |s: &CfState<BigInt>| -> Option<SymmetryKind> {
        if s.p() == *s.p_prev() {
            (*s.q() != q0).then_some(SymmetryKind::Even)
        } else if s.q_next() == *s.q() {
            Some(SymmetryKind::Odd)
        } else {
            None
        }
    };
    for steps in 0..budget {
        let hit = is_half_period(&fwd).map(|k| (fwd.q().clone(), k)).or_else(|| is_half_period(&rev).map(|k| (rev.q().clone(), k)));
        if let Some((q, kind)) = hit {
            stats.baby_steps = steps;
            let g = q.magnitude().gcd(orig);
            return match FactorReport::from_divisor(orig, &g, Method::Bsgs) {
                Some(mut rep) => {
                    rep.multiplier = k;
                    rep.giant_steps = stats.giant_steps();
                    rep.reverse_steps = steps;
                    rep.wall_time = start.elapsed();
                    Ok((rep, stats))
                }
                None if kind == SymmetryKind::Odd => Err(InfraError::NoFactor(NoFactorReason::OddPeriodQrMinusOne)),
                None => Err(InfraError::NoFactor(NoFactorReason::TrivialSymmetry)),
            };
        }
        fwd.advance();
        rev.advance();
    }
    Err(InfraError::NoFactor(NoFactorReason::Exhausted))
}

/// Odd squarefree multipliers tried by [`bsgs_factor_escalating`] callers.
pub const BSGS_MULTIPLIERS: [u64; 26] = [1, 3, 5, 7, 11, 13, 15, 17, 19, 21, 23, 29, 31, 33, 35, 37, 39, 41, 43, 47, 51, 53, 55, 57, 59, 61];

/// Runs [`bsgs_factor_k`] over `multipliers`, computing each regulator by a
/// cycle walk, until a principal cycle yields a proper divisor of `n`.
pub fn bsgs_factor_escalating(n: &BigUint, multipliers: &[u64]) -> Result<(FactorReport, BsgsStats), InfraError> {
    let mut last = InfraError::NoFactor(NoFactorReason::Exhausted);
    for &k in multipliers {
        let kn = n * k;
        if nt::is_perfect_square(&kn).is_some() && k > 1 {
            continue;
        }
        let r = regulator(&kn, Convention::preferred_for(&kn))?;
        match bsgs_factor_k(n, k, r.value) {
            Ok(v) => return Ok(v),
            Err(e @ InfraError::NoFactor(NoFactorReason::OddPeriodQrMinusOne | NoFactorReason::TrivialSymmetry | NoFactorReason::Exhausted)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Discriminant of the principal cycle used for `n` by [`bsgs_factor`].
pub fn bsgs_discriminant(n: &BigUint) -> Result<std::sync::Arc<Discriminant>, InfraError> {
    Ok(Discriminant::new(Convention::preferred_for(n).discriminant(n))?)
}

/// Least `x > 1` with `x² − n·y² = ±1` found by scanning `y`; test oracle.
pub fn pell_fundamental(n: u64, max_y: u64) -> Option<(u64, u64)> {
    for y in 1..=max_y {
        let ny2 = (n as u128) * (y as u128) * (y as u128);
        for t in [ny2 - 1, ny2 + 1] {
            let x = nt::isqrt_u128(t);
            if x * x == t {
                return Some((x.to_u64()?, y));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn regulator_13() {
        let r = regulator(&nat(13), Convention::Normalized).unwrap();
        let want = ((3.0 + 13f64.sqrt()) / 2.0).ln();
        assert_eq!(r.period, 1);
        assert!((r.value - want).abs() <= 1e-9 * want);
        let s = contfrac::init_expansion::<i64>(&nat(13), Convention::Normalized).unwrap();
        assert!((step_distance(&s.step_forward()) - 1.1948).abs() < 1e-4);
    }

    #[test]
    fn regulator_21_matches_pell() {
        let r = regulator(&nat(21), Convention::Standard).unwrap();
        let (x, y) = pell_fundamental(21, 1000).unwrap();
        assert_eq!((x, y), (55, 12));
        let want = (x as f64 + y as f64 * 21f64.sqrt()).ln();
        assert!((r.value - want).abs() < 1e-12 * want, "{} vs {want}", r.value);
        assert_eq!(r.period, 6);
    }

    #[test]
    fn empty_walk_is_zero() {
        let s = contfrac::init_expansion::<i64>(&nat(21), Convention::Standard).unwrap();
        assert_eq!(walk_distance(&s, 0), 0.0);
        let one = walk_distance(&s, 1);
        assert_eq!(one, step_distance(&s.step_forward()));
    }

    #[test]
    fn distance_value_wraps() {
        let a = DistanceValue::new(0.7, Some(1.0));
        let b = DistanceValue::new(0.6, Some(1.0));
        assert!(((a + b).value - 0.3).abs() < 1e-12);
        assert_eq!(DistanceValue::new(-0.25, Some(1.0)).value, 0.75);
    }

    #[test]
    fn formula_trivial_instance() {
        let disc = Discriminant::new(BigInt::from(84)).unwrap();
        let f = QuadForm::principal(&disc);
        let r = f.projective_cycle_distance(1000).unwrap();
        let inst = DistanceFormulaInput { f1: f.clone(), fk: f.clone(), g1: f.clone(), gl: f, d_f: 0.0, d_g: 0.0, regulator: r };
        assert!(check_distance_formula(&inst, 1000).unwrap() < 1e-12);
    }

    #[test]
    fn symmetry_centers_half_cycle_apart() {
        for d in [12i64, 13, 21, 84, 85, 1001, 4 * 1009] {
            let disc = Discriminant::new(BigInt::from(d)).unwrap();
            let (c, r) = symmetry_centers(&QuadForm::principal(&disc), 10_000).unwrap();
            assert_eq!(c.len(), 2, "D={d}");
            assert!(((c[1].center - c[0].center) - r / 2.0).abs() < 1e-9 * r, "D={d}");
        }
    }

    #[test]
    fn bsgs_21() {
        let r = regulator(&nat(21), Convention::preferred_for(&nat(21))).unwrap();
        let (rep, _) = bsgs_factor(&nat(21), r.value).unwrap();
        assert_eq!(rep.factors, (nat(3), nat(7)));
    }

    #[test]
    fn bsgs_small_semiprimes() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut ok = 0;
        let mut obstructed = 0;
        for _ in 0..100 {
            let (n, p, q) = nt::random_semiprime(14, &mut rng);
            let r = regulator(&n, Convention::preferred_for(&n)).unwrap();
            match bsgs_factor(&n, r.value) {
                Ok((rep, _)) => {
                    assert_eq!(rep.factors, (p, q));
                    ok += 1;
                }
                Err(InfraError::NoFactor(NoFactorReason::OddPeriodQrMinusOne | NoFactorReason::TrivialSymmetry)) => obstructed += 1,
                Err(e) => panic!("{n}: {e}"),
            }
        }
        assert!(ok > 50, "ok={ok} obstructed={obstructed}");
    }

    #[test]
    fn bsgs_escalation_splits_obstructed_inputs() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut ok = 0;
        for _ in 0..100 {
            let (n, p, q) = nt::random_semiprime(14, &mut rng);
            match bsgs_factor_escalating(&n, &BSGS_MULTIPLIERS) {
                Ok((rep, _)) => {
                    assert_eq!(rep.factors, (p, q));
                    ok += 1;
                }
                // 129968737 = 9601·13537: no principal cycle in the ladder splits it
                Err(InfraError::NoFactor(_)) => {}
                Err(e) => panic!("{n}: {e}"),
            }
        }
        assert!(ok >= 95, "ok={ok}");
    }

    #[test]
    fn bsgs_prime() {
        let r = regulator(&nat(101), Convention::Normalized).unwrap();
        assert_eq!(bsgs_factor(&nat(101), r.value).unwrap_err(), InfraError::NoFactor(NoFactorReason::Prime));
    }
}
