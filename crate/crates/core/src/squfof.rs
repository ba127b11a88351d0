//! Serial SQUFOF: forward scan for a square pseudo-square at an even
//! index, square root of the associated form, fast return through the
//! stored power-of-two forms, and a tandem walk to the symmetry point.

use std::sync::Arc;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contfrac::{self, CfError, CfState, Convention, Radicand};
use crate::infra::DistanceAccumulator;
use crate::nt::{self, CfInt};
use crate::qforms::{self, FormError, QuadForm};
use crate::report::{FactorReport, Method};

/// Squarefree odd multipliers tried in order.
pub const MULTIPLIER_LADDER: [u64; 9] = [1, 3, 5, 7, 11, 13, 15, 17, 19];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SqufofError {
    #[error("{0} is prime")]
    Prime(BigUint),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("exhausted after {steps} forward steps")]
    Exhausted { steps: u64 },
    #[error("symmetry point gave a trivial divisor")]
    TrivialSymmetry,
    #[error("cancelled")]
    Cancelled,
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Cf(#[from] CfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrivialSquarePolicy {
    /// Resume the forward scan after a square that gave a trivial divisor.
    #[default]
    SkipAndContinue,
    /// Give up on the current multiplier at the first trivial square.
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqufofConfig {
    /// Forward-step bound per multiplier; `None` uses `6·⌈(kN)^{1/4}⌉·log₂(kN)`.
    pub max_forward_steps: Option<u64>,
    /// Keep the forms at indices `2ⁿ` for the fast return. Without them the
    /// tandem walk starts from the square root form itself.
    pub store_powers_of_two: bool,
    /// First multiplier to try.
    pub multiplier: u64,
    pub trivial_square_policy: TrivialSquarePolicy,
    /// Escalate through [`MULTIPLIER_LADDER`] after a failed attempt.
    pub escalate: bool,
    /// Record predicted against observed reverse-walk distances.
    pub track_distance: bool,
}

impl Default for SqufofConfig {
    fn default() -> Self {
        SqufofConfig {
            max_forward_steps: None,
            store_powers_of_two: true,
            multiplier: 1,
            trivial_square_policy: TrivialSquarePolicy::SkipAndContinue,
            escalate: true,
            track_distance: false,
        }
    }
}

/// `6·⌈M^{1/4}⌉·log₂ M`.
pub fn default_step_bound(m: &BigUint) -> u64 {
    let quarter = m.nth_root(4) + 1u32;
    let q = quarter.to_u64().unwrap_or(u64::MAX / 1024);
    q.saturating_mul(6).saturating_mul(m.bits().max(1))
}

/// Predicted against observed signed distance from the fast-return form
/// to the symmetry point found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BookkeepingSample {
    pub index: u64,
    pub predicted: f64,
    pub observed: f64,
}

/// A square pseudo-square `Q_i = root²` at even index `i`.
#[derive(Debug, Clone)]
pub struct SquareHit<T> {
    /// State at index `i`.
    pub state: CfState<T>,
    pub root: T,
    /// `δ(φ_{i−1})`, when distances are tracked.
    pub distance: f64,
}

/// A form `φ_{2ⁿ}` kept for the fast return, with its distance from `φ₀`.
#[derive(Debug, Clone)]
pub struct StoredForm {
    pub form: QuadForm,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttemptStats {
    pub forward_steps: u64,
    pub reverse_steps: u64,
    pub squares_tested: u64,
    pub trivial_squares: u64,
    pub bookkeeping: Vec<BookkeepingSample>,
}

/// Forward scan over the expansion of `√(kN)`.
pub struct ForwardScan<T> {
    state: CfState<T>,
    stored: Vec<StoredForm>,
    acc: DistanceAccumulator,
    track_distance: bool,
    store: bool,
}

impl<T: CfInt> ForwardScan<T> {
    pub fn new(rad: Arc<Radicand<T>>, store: bool, track_distance: bool) -> Self {
        let mut state = contfrac::initial_state(rad);
        state.advance();
        ForwardScan { state, stored: Vec::new(), acc: DistanceAccumulator::default(), track_distance, store }
    }

    pub fn state(&self) -> &CfState<T> {
        &self.state
    }

    pub fn stored(&self) -> &[StoredForm] {
        &self.stored
    }

    /// Advances to the next even index with a square `Q_i`, stopping early
    /// once the index passes `max_index` or `cancel` fires.
    pub fn next_square(&mut self, max_index: i64, cancel: &dyn Fn() -> bool) -> Result<SquareHit<T>, SqufofError> {
        loop {
            let i = self.state.index();
            if i > max_index {
                return Err(SqufofError::Exhausted { steps: i as u64 });
            }
            if i & 4095 == 0 && cancel() {
                return Err(SqufofError::Cancelled);
            }
            let before = if self.track_distance { self.acc.value() } else { 0.0 };
            let hit = if i & 1 == 0 { self.state.q().perfect_sqrt() } else { None };
            if self.track_distance {
                self.acc.push(self.state.complete_quotient());
            }
            let found = hit.map(|root| SquareHit { state: self.state.clone(), root, distance: before });
            self.state.advance();
            if self.store && i & (i - 1) == 0 {
                // φ_i, read off the state at index i + 1
                let distance = if self.track_distance { self.acc.value() } else { 0.0 };
                self.stored.push(StoredForm { form: qforms::cycle_form(&self.state), distance });
            }
            if let Some(h) = found {
                return Ok(h);
            }
        }
    }
}

/// Result of [`jump_to_inverse_cycle`].
#[derive(Debug, Clone)]
pub struct Jump {
    pub form: QuadForm,
    /// Predicted signed distance from `form` to the symmetry point.
    pub predicted: f64,
    pub compositions: u32,
}

/// Builds `F₀ = (√Q_i, 2P_{i−1}, (P_{i−1}² − N)/√Q_i)`, reduces it, and
/// composes with `φ_{2ⁿ}` for each set bit `n` of `i/2`, least significant
/// bit first, reducing after every composition.
pub fn jump_to_inverse_cycle<T: CfInt>(hit: &SquareHit<T>, stored: &[StoredForm]) -> Result<Jump, SqufofError> {
    let s = &hit.state;
    let n = s.n().to_bigint();
    let root = hit.root.to_bigint();
    let p = s.p_prev().to_bigint();
    let c = (&p * &p - &n) / &root;
    let disc = qforms::Discriminant::new(BigInt::from(4) * &n)?;
    let f0 = QuadForm::with_disc(root, BigInt::from(2) * &p, &disc)?;
    debug_assert_eq!(f0.c, c);
    let red = f0.reduce()?;
    let mut form = red.form;
    let mut track = red.dist;
    let mut compositions = 0;
    let half = (s.index() / 2) as u64;
    for bit in 0..64 {
        if half >> bit & 1 == 1 {
            let Some(sf) = stored.get(bit) else { break };
            let comp = form.compose_reduce(&sf.form)?;
            track += sf.distance + comp.distance_shift();
            form = comp.form;
            compositions += 1;
        }
    }
    Ok(Jump { form, predicted: hit.distance / 2.0 - track, compositions })
}

/// A symmetry point reached from a fast-return form.
#[derive(Debug, Clone)]
pub struct SymmetryHit {
    pub q: BigUint,
    pub factor: Option<BigUint>,
    pub steps: u64,
    pub observed: f64,
    /// Distances of every symmetry point passed on the way.
    pub seen: Vec<f64>,
}

impl SymmetryHit {
    /// The symmetry point passed closest to `predicted`.
    pub fn nearest(&self, predicted: f64) -> f64 {
        self.seen.iter().copied().min_by(|a, b| (a - predicted).abs().total_cmp(&(b - predicted).abs())).unwrap_or(self.observed)
    }
}

/// Tandem walk from `g` and from its reversal until one of them sits on a
/// symmetry point `P_i = P_{i−1}`; the candidate factor is `gcd(Q_i, N)`.
pub fn reverse_symmetry_search<T: CfInt>(rad: &Arc<Radicand<T>>, g: &QuadForm, n: &BigUint, bound: u64) -> Result<SymmetryHit, SqufofError> {
    let fwd = qforms::cursor_of_form(rad, g)?;
    let rev = qforms::cursor_of_form(rad, &g.reversed())?;
    let split = |s: &CfState<T>| {
        let d = s.q().to_bigint().magnitude().gcd(n);
        (!d.is_one() && d != *n).then_some(d)
    };
    // the point the fast return aims at can lie beyond a trivial one on short cycles
    let out = contfrac::tandem_symmetry_search_until(fwd, rev, bound, false, |s| split(s).is_some())
        .ok_or(SqufofError::Exhausted { steps: bound })?;
    let hit = out.hit;
    let q = hit.state.q().to_bigint().magnitude().clone();
    Ok(SymmetryHit { factor: split(&hit.state), q, steps: hit.steps, observed: hit.distance, seen: out.seen })
}

/// One SQUFOF run on `kN` with engine `T`; returns a proper divisor of `n`.
pub fn attempt<T: CfInt>(n: &BigUint, k: u64, cfg: &SqufofConfig, cancel: &dyn Fn() -> bool) -> Result<(BigUint, AttemptStats), (SqufofError, AttemptStats)> {
    let kn = n * k;
    let mut stats = AttemptStats::default();
    let rad = match Radicand::<T>::new(&kn, Convention::Standard) {
        Ok(r) => r,
        Err(e) => return Err((e.into(), stats)),
    };
    let bound = cfg.max_forward_steps.unwrap_or_else(|| default_step_bound(&kn));
    let mut scan = ForwardScan::new(rad.clone(), cfg.store_powers_of_two, cfg.track_distance);
    let max_index = i64::try_from(bound).unwrap_or(i64::MAX);
    loop {
        let hit = match scan.next_square(max_index, cancel) {
            Ok(h) => h,
            Err(e) => {
                stats.forward_steps = scan.state().index() as u64;
                return Err((e, stats));
            }
        };
        stats.squares_tested += 1;
        let i = hit.state.index() as u64;
        stats.forward_steps = i;
        let root = hit.root.to_bigint().magnitude().clone();
        if root.is_one() {
            // back at the principal form: every later square repeats one already tested
            stats.trivial_squares += 1;
            return Err((SqufofError::Exhausted { steps: i }, stats));
        }
        let g = root.gcd(n);
        if !g.is_one() && g != *n {
            return Ok((g, stats));
        }
        let outcome = jump_to_inverse_cycle(&hit, scan.stored()).and_then(|jump| {
            let bound = i + 1024;
            reverse_symmetry_search(&rad, &jump.form, n, bound).map(|h| (jump, h))
        });
        match outcome {
            Ok((jump, sym)) => {
                stats.reverse_steps += sym.steps;
                if cfg.track_distance {
                    stats.bookkeeping.push(BookkeepingSample { index: i, predicted: jump.predicted, observed: sym.nearest(jump.predicted) });
                }
                if let Some(f) = sym.factor {
                    return Ok((f, stats));
                }
            }
            Err(SqufofError::Exhausted { .. }) => {}
            Err(e) => return Err((e, stats)),
        }
        stats.trivial_squares += 1;
        if cfg.trivial_square_policy == TrivialSquarePolicy::Abort {
            return Err((SqufofError::TrivialSymmetry, stats));
        }
    }
}

/// Handles the inputs SQUFOF itself cannot: tiny, even, square, prime.
pub fn preflight(n: &BigUint) -> Result<Option<FactorReport>, SqufofError> {
    if *n < BigUint::from(4u32) {
        return if *n >= BigUint::from(2u32) {
            Err(SqufofError::Prime(n.clone()))
        } else {
            Err(SqufofError::InvalidInput(format!("{n} has no proper factorization")))
        };
    }
    if n.is_even() {
        return Ok(FactorReport::from_divisor(n, &BigUint::from(2u32), Method::Trivial));
    }
    if let Some(r) = nt::is_perfect_square(n) {
        return Ok(FactorReport::from_divisor(n, &r, Method::Trivial));
    }
    if nt::is_probable_prime(n) {
        return Err(SqufofError::Prime(n.clone()));
    }
    Ok(None)
}

/// The multipliers tried for a configuration, in order.
pub fn multiplier_sequence(cfg: &SqufofConfig) -> Vec<u64> {
    let mut ks = vec![cfg.multiplier];
    if cfg.escalate {
        ks.extend(MULTIPLIER_LADDER.iter().copied().filter(|&k| k != cfg.multiplier));
    }
    ks
}

/// Runs [`attempt`] on the narrowest engine that fits `kN`.
pub fn attempt_dispatch(n: &BigUint, k: u64, cfg: &SqufofConfig, cancel: &dyn Fn() -> bool) -> Result<(BigUint, AttemptStats), (SqufofError, AttemptStats)> {
    let kn = n * k;
    crate::dispatch_engine!(&kn, attempt(n, k, cfg, cancel))
}

/// Full SQUFOF with multiplier escalation.
pub fn squfof_factor(n: &BigUint, cfg: &SqufofConfig) -> Result<FactorReport, SqufofError> {
    squfof_factor_with_stats(n, cfg).map(|(r, _)| r)
}

/// As [`squfof_factor`], also returning the per-attempt statistics of the last attempt.
pub fn squfof_factor_with_stats(n: &BigUint, cfg: &SqufofConfig) -> Result<(FactorReport, AttemptStats), SqufofError> {
    let start = Instant::now();
    if let Some(rep) = preflight(n)? {
        return Ok((rep, AttemptStats::default()));
    }
    if cfg.multiplier == 0 || cfg.max_forward_steps == Some(0) {
        return Err(SqufofError::InvalidInput("multiplier and step bound must be positive".into()));
    }
    let mut total = AttemptStats::default();
    let mut last_err = SqufofError::Exhausted { steps: 0 };
    for k in multiplier_sequence(cfg) {
        match attempt_dispatch(n, k, cfg, &|| false) {
            Ok((d, stats)) => {
                let mut rep = FactorReport::from_divisor(n, &d, Method::Squfof).expect("attempt returns a proper divisor");
                rep.forward_steps = total.forward_steps + stats.forward_steps;
                rep.reverse_steps = total.reverse_steps + stats.reverse_steps;
                rep.squares_tested = total.squares_tested + stats.squares_tested;
                rep.multiplier = k;
                rep.wall_time = start.elapsed();
                return Ok((rep, stats));
            }
            Err((e, stats)) => {
                total.forward_steps += stats.forward_steps;
                total.reverse_steps += stats.reverse_steps;
                total.squares_tested += stats.squares_tested;
                last_err = match e {
                    SqufofError::Exhausted { .. } | SqufofError::TrivialSymmetry => SqufofError::Exhausted { steps: total.forward_steps },
                    other => return Err(other),
                };
            }
        }
    }
    Err(last_err)
}

/// First even-index square `(i, √Q_i)` of the expansion of `√N` and the stored forms; a thin wrapper over [`ForwardScan`].
pub fn find_square_form(n: &BigUint, cfg: &SqufofConfig) -> Result<(CfState<BigInt>, Vec<QuadForm>), SqufofError> {
    let rad = Radicand::<BigInt>::new(&(n * cfg.multiplier), Convention::Standard)?;
    let bound = cfg.max_forward_steps.unwrap_or_else(|| default_step_bound(n));
    let mut scan = ForwardScan::new(rad, true, false);
    loop {
        let hit = scan.next_square(bound as i64, &|| false)?;
        if !hit.root.is_one() || cfg.trivial_square_policy == TrivialSquarePolicy::Abort {
            let stored = scan.stored().iter().map(|s| s.form.clone()).collect();
            return Ok((hit.state, stored));
        }
    }
}

/// All even indices `i ≤ max_index` with `Q_i` a square, and whether the
/// classical reverse walk from the square root form yields a nontrivial
/// factor. Test oracle without fast return or composition.
pub fn scan_all_squares(n: &BigUint, max_index: i64) -> Result<Vec<(i64, bool)>, SqufofError> {
    let rad = Radicand::<BigInt>::new(n, Convention::Standard)?;
    let mut s = contfrac::initial_state(rad.clone());
    s.advance();
    let mut out = Vec::new();
    while s.index() <= max_index {
        if s.index() % 2 == 0 {
            if let Some(root) = s.q().perfect_sqrt() {
                let usable = !root.is_one() && classical_reverse_walk(&s, &root, n);
                out.push((s.index(), usable));
            }
        }
        s.advance();
    }
    Ok(out)
}

/// Shanks's reverse cycle: from `(√Q_i, −P_{i−1})` step forward to the first
/// `P_j = P_{j−1}` and test `gcd(Q_j, N)`.
fn classical_reverse_walk(s: &CfState<BigInt>, root: &BigInt, n: &BigUint) -> bool {
    let nn = BigInt::from(n.clone());
    let r = s.r().clone();
    // x = (√N − P_{i−1})/√Q_i; first quotient b = ⌊(r − P)/root⌋, then P₀ = b·root + P
    let p = s.p_prev().clone();
    let b0 = (&r - &p).div_floor(root);
    let mut p_prev = &b0 * root + &p;
    let mut q_prev = root.clone();
    let mut q = (&nn - &p_prev * &p_prev) / root;
    for _ in 0..(4 * s.index().max(16) as u64 + 4096) {
        let b = (&r + &p_prev).div_floor(&q);
        let p_new = &b * &q - &p_prev;
        if p_new == p_prev {
            let d = q.magnitude().gcd(n);
            return !d.is_one() && d != *n;
        }
        let q_new = &q_prev + &b * (&p_prev - &p_new);
        q_prev = std::mem::replace(&mut q, q_new);
        p_prev = p_new;
        if q.is_zero() {
            return false;
        }
    }
    false
}
