//! Indefinite binary quadratic forms `(a, b, c)` of positive non-square
//! discriminant: reduction with tracked distance, the adjacency map `ρ`,
//! composition, cycles, and the bridge to continued-fraction states.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::contfrac::{CfError, CfState, Convention, Radicand};
use crate::nt::{self, CfInt, NtError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormError {
    #[error("degenerate form (a = 0)")]
    Degenerate,
    #[error("invalid discriminant {0}: must be a positive non-square ≡ 0, 1 (mod 4)")]
    InvalidDiscriminant(BigInt),
    #[error("form is not reduced")]
    NotReduced,
    #[error("discriminant mismatch: {0} vs {1}")]
    DiscriminantMismatch(BigInt, BigInt),
    #[error("coefficients do not define an integral form")]
    NotIntegral,
    #[error("leading coefficient is not a positive perfect square")]
    NotSquareForm,
    #[error("cycle exceeds {0} forms")]
    CycleTooLong(usize),
    #[error("reduction did not terminate within {0} iterations")]
    ReductionBound(usize),
    #[error(transparent)]
    Congruence(#[from] NtError),
    #[error(transparent)]
    Cf(#[from] CfError),
}

/// Discriminant with cached `⌊√D⌋` and `√D`.
#[derive(Debug, PartialEq)]
pub struct Discriminant {
    pub d: BigInt,
    pub s: BigInt,
    pub sqrt: f64,
}

impl Discriminant {
    pub fn new(d: BigInt) -> Result<Arc<Self>, FormError> {
        let r4 = d.mod_floor(&BigInt::from(4));
        if !d.is_positive() || r4 > BigInt::one() || (d.sqrt().pow(2) == d) {
            return Err(FormError::InvalidDiscriminant(d));
        }
        let s = d.sqrt();
        let sqrt = crate::contfrac::sqrt_f64(d.magnitude());
        Ok(Arc::new(Discriminant { d, s, sqrt }))
    }

    /// `ln(√D + b)`, exact in sign and free of cancellation for `b < 0`.
    pub fn ln_sqrt_plus(&self, b: &BigInt) -> f64 {
        if !b.is_negative() {
            if b.bits() > 1000 {
                nt::ln_abs(b)
            } else {
                (self.sqrt + b.to_f64().unwrap_or(0.0)).ln()
            }
        } else {
            // √D + b = (D − b²)/(√D − b)
            let num = &self.d - b * b;
            let den = self.sqrt - b.to_f64().unwrap_or(f64::NEG_INFINITY);
            nt::ln_abs(&num) - den.ln()
        }
    }
}

/// An indefinite binary quadratic form `a·x² + b·xy + c·y²`.
#[derive(Clone)]
pub struct QuadForm {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    disc: Arc<Discriminant>,
}

impl PartialEq for QuadForm {
    fn eq(&self, o: &Self) -> bool {
        self.a == o.a && self.b == o.b && self.c == o.c && self.disc.d == o.disc.d
    }
}
impl Eq for QuadForm {}

impl std::hash::Hash for QuadForm {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        (&self.a, &self.b, &self.c).hash(h)
    }
}

impl fmt::Debug for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

impl Serialize for QuadForm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("QuadForm", 4)?;
        st.serialize_field("a", &self.a.to_string())?;
        st.serialize_field("b", &self.b.to_string())?;
        st.serialize_field("c", &self.c.to_string())?;
        st.serialize_field("disc", &self.disc.d.to_string())?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReductionMove {
    T(BigInt),
    W,
}

/// 2×2 integer matrix `[[s, t], [u, v]]` acting by `f ↦ f(sx + ty, ux + vy)`.
pub type Matrix = [[BigInt; 2]; 2];

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub form: QuadForm,
    /// Reduction distance `D_ρ`.
    pub dist: f64,
    /// Number of `W` applications.
    pub steps: usize,
    /// Loop iterations of the reduction (one `T` normalization each).
    pub iterations: usize,
    pub moves: Vec<ReductionMove>,
}

impl ReductionResult {
    /// Product of the move matrices, in application order.
    pub fn matrix(&self) -> Matrix {
        let mut m = identity_matrix();
        for mv in &self.moves {
            let g = match mv {
                ReductionMove::T(k) => [[BigInt::one(), k.clone()], [BigInt::zero(), BigInt::one()]],
                ReductionMove::W => [[BigInt::zero(), -BigInt::one()], [BigInt::one(), BigInt::zero()]],
            };
            m = mat_mul(&m, &g);
        }
        m
    }
}

pub fn identity_matrix() -> Matrix {
    [[BigInt::one(), BigInt::zero()], [BigInt::zero(), BigInt::one()]]
}

pub fn mat_mul(x: &Matrix, y: &Matrix) -> Matrix {
    let e = |i: usize, j: usize| &x[i][0] * &y[0][j] + &x[i][1] * &y[1][j];
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

pub fn mat_det(m: &Matrix) -> BigInt {
    &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0]
}

/// Result of [`QuadForm::compose`].
#[derive(Debug, Clone)]
pub struct Composition {
    pub form: QuadForm,
    /// `gcd(a₁, a₂, (b₁+b₂)/2)`.
    pub m: BigInt,
}

/// Result of [`QuadForm::compose_reduce`].
#[derive(Debug, Clone)]
pub struct ReducedComposition {
    pub form: QuadForm,
    pub m: BigInt,
    pub dist_rho: f64,
}

impl ReducedComposition {
    /// `ln m + D_ρ`, the shift added to the sum of the operand distances.
    pub fn distance_shift(&self) -> f64 {
        nt::ln_abs(&self.m) + self.dist_rho
    }
}

/// A symmetry pair `(c, b, a) → (a, b, c)` on a cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymmetryPoint {
    /// The right-hand form `(a, b, c)`.
    pub form: QuadForm,
    /// `|a|` or `|a|/2`, whichever divides the determinant.
    pub divisor: BigUint,
}

impl QuadForm {
    pub fn new(a: BigInt, b: BigInt, c: BigInt) -> Result<Self, FormError> {
        let d = &b * &b - BigInt::from(4) * &a * &c;
        let disc = Discriminant::new(d)?;
        if a.is_zero() || c.is_zero() {
            return Err(FormError::Degenerate);
        }
        Ok(QuadForm { a, b, c, disc })
    }

    pub fn from_i64(a: i64, b: i64, c: i64) -> Result<Self, FormError> {
        Self::new(a.into(), b.into(), c.into())
    }

    /// The form `(a, b, (b² − D)/(4a))`.
    pub fn with_disc(a: BigInt, b: BigInt, disc: &Arc<Discriminant>) -> Result<Self, FormError> {
        if a.is_zero() {
            return Err(FormError::Degenerate);
        }
        let num = &b * &b - &disc.d;
        let den = BigInt::from(4) * &a;
        let (c, rem) = num.div_rem(&den);
        if !rem.is_zero() {
            return Err(FormError::NotIntegral);
        }
        Ok(QuadForm { a, b, c, disc: disc.clone() })
    }

    fn raw(a: BigInt, b: BigInt, c: BigInt, disc: &Arc<Discriminant>) -> Self {
        QuadForm { a, b, c, disc: disc.clone() }
    }

    /// `(1, b₀, (b₀² − D)/4)` with `b₀` the largest `b ≤ √D` of the parity of `D`.
    pub fn principal(disc: &Arc<Discriminant>) -> Self {
        let mut b = disc.s.clone();
        if (&b - &disc.d).is_odd() {
            b -= 1;
        }
        Self::with_disc(BigInt::one(), b, disc).expect("principal form is integral")
    }

    pub fn discriminant(&self) -> &BigInt {
        &self.disc.d
    }

    pub fn disc(&self) -> &Arc<Discriminant> {
        &self.disc
    }

    pub fn is_primitive(&self) -> bool {
        nt::gcd3(&self.a, &self.b, &self.c).is_one()
    }

    /// `|√D − 2|a|| < b < √D`, in exact integer arithmetic.
    pub fn is_reduced(&self) -> bool {
        let s = &self.disc.s;
        let two_a = BigInt::from(2) * self.a.abs();
        self.b.is_positive() && self.b <= *s && *s < &two_a + &self.b && &two_a - &self.b <= *s
    }

    pub fn apply_tm(&self, m: &BigInt) -> Result<Self, FormError> {
        if self.a.is_zero() {
            return Err(FormError::Degenerate);
        }
        let b = &self.b + BigInt::from(2) * &self.a * m;
        Self::with_disc(self.a.clone(), b, &self.disc)
    }

    /// `(c, −b, a)`.
    pub fn apply_w(&self) -> Self {
        Self::raw(self.c.clone(), -&self.b, self.a.clone(), &self.disc)
    }

    /// `(c, b, a)`.
    pub fn reversed(&self) -> Self {
        Self::raw(self.c.clone(), self.b.clone(), self.a.clone(), &self.disc)
    }

    /// `(a, −b, c)`, the class inverse.
    pub fn inverse(&self) -> Self {
        Self::raw(self.a.clone(), -&self.b, self.c.clone(), &self.disc)
    }

    /// `(|a|, b, |c|)`: forms that differ only in the signs of `a`, `c`.
    pub fn projective_key(&self) -> (BigInt, BigInt, BigInt) {
        (self.a.abs(), self.b.clone(), self.c.abs())
    }

    /// `f(sx + ty, ux + vy)`.
    pub fn act(&self, m: &Matrix) -> Self {
        let [[s, t], [u, v]] = m;
        let eval = |x: &BigInt, y: &BigInt| &self.a * x * x + &self.b * x * y + &self.c * y * y;
        let a = eval(s, u);
        let c = eval(t, v);
        let b = BigInt::from(2) * &self.a * s * t + &self.b * (s * v + t * u) + BigInt::from(2) * &self.c * u * v;
        Self::raw(a, b, c, &self.disc)
    }

    /// Runs reduction, returning the reduced form, `D_ρ` and the move word.
    pub fn reduce(&self) -> Result<ReductionResult, FormError> {
        if self.a.is_zero() && self.c.is_zero() {
            return Err(FormError::Degenerate);
        }
        let disc = &self.disc;
        let mut f = if self.a.is_zero() { self.apply_w() } else { self.clone() };
        let mut moves = Vec::new();
        if self.a.is_zero() {
            moves.push(ReductionMove::W);
        }
        let mut dist = 0.0;
        let mut steps = 0;
        let cap = 8 * (self.a.bits().max(self.b.bits()).max(self.c.bits()) as usize) + 64;
        for iterations in 1..=cap {
            let b = j_normalize(&f.b, &f.a, disc);
            if b != f.b {
                let m = (&b - &f.b) / (BigInt::from(2) * &f.a);
                moves.push(ReductionMove::T(m));
                f = Self::with_disc(f.a.clone(), b, disc)?;
            }
            if f.is_reduced() {
                return Ok(ReductionResult { form: f, dist, steps, iterations, moves });
            }
            // the surd of this W step is (√D + b)/(2c)
            dist += disc.ln_sqrt_plus(&f.b) - nt::ln_abs(&(BigInt::from(2) * &f.c));
            f = f.apply_w();
            moves.push(ReductionMove::W);
            steps += 1;
        }
        Err(FormError::ReductionBound(cap))
    }

    /// The unique reduced form adjacent on the right.
    pub fn rho(&self) -> Result<Self, FormError> {
        if !self.is_reduced() {
            return Err(FormError::NotReduced);
        }
        Ok(self.rho_unchecked())
    }

    fn rho_unchecked(&self) -> Self {
        let b = j_normalize(&(-&self.b), &self.c, &self.disc);
        let c = (&b * &b - &self.disc.d) / (BigInt::from(4) * &self.c);
        Self::raw(self.c.clone(), b, c, &self.disc)
    }

    /// The unique reduced form adjacent on the left.
    pub fn rho_inv(&self) -> Result<Self, FormError> {
        if !self.is_reduced() {
            return Err(FormError::NotReduced);
        }
        Ok(self.reversed().rho_unchecked().reversed())
    }

    /// Distance from a reduced `f` to `ρ(f)`: `ln((√D + b)/(2|c|))`.
    pub fn rho_distance(&self) -> f64 {
        self.disc.ln_sqrt_plus(&self.b) - nt::ln_abs(&(BigInt::from(2) * &self.c))
    }

    pub fn compose(&self, g: &Self) -> Result<Composition, FormError> {
        if self.disc.d != g.disc.d {
            return Err(FormError::DiscriminantMismatch(self.disc.d.clone(), g.disc.d.clone()));
        }
        let (a1, b1, a2, b2) = (&self.a, &self.b, &g.a, &g.b);
        let m = nt::gcd3(a1, a2, &((b1 + b2) / 2));
        let b = nt::solve_congruence_system(a1, b1, a2, b2, &m, &self.disc.d)?;
        let m2 = &m * &m;
        let a = (a1 * a2) / &m2;
        let form = Self::with_disc(a, b, &self.disc)?;
        Ok(Composition { form, m })
    }

    /// Composition followed by reduction (`#`).
    pub fn compose_reduce(&self, g: &Self) -> Result<ReducedComposition, FormError> {
        let Composition { form, m } = self.compose(g)?;
        let red = form.reduce()?;
        Ok(ReducedComposition { form: red.form, m, dist_rho: red.dist })
    }

    /// Signed `ρ`-orbit of a reduced form, starting at `self`.
    pub fn cycle(&self, max_len: usize) -> Result<Vec<Self>, FormError> {
        if !self.is_reduced() {
            return Err(FormError::NotReduced);
        }
        let mut out = vec![self.clone()];
        let mut g = self.rho_unchecked();
        while g != *self {
            if out.len() >= max_len {
                return Err(FormError::CycleTooLong(max_len));
            }
            out.push(g.clone());
            g = g.rho_unchecked();
        }
        Ok(out)
    }

    /// `ρ`-orbit up to the first form equal to `self` up to the signs of `a` and `c`.
    pub fn projective_cycle(&self, max_len: usize) -> Result<Vec<Self>, FormError> {
        if !self.is_reduced() {
            return Err(FormError::NotReduced);
        }
        let key = self.projective_key();
        let mut out = vec![self.clone()];
        let mut g = self.rho_unchecked();
        while g.projective_key() != key {
            if out.len() >= max_len {
                return Err(FormError::CycleTooLong(max_len));
            }
            out.push(g.clone());
            g = g.rho_unchecked();
        }
        Ok(out)
    }

    /// Whether `self` is the right-hand form of a symmetry pair, that is,
    /// `ρ⁻¹(a, b, c) = (c, b, a)`.
    pub fn is_symmetry_point(&self) -> bool {
        self.is_reduced() && self.reversed().rho_unchecked() == *self
    }

    fn symmetry_point(&self) -> SymmetryPoint {
        let det = if self.disc.d.is_odd() { self.disc.d.clone() } else { &self.disc.d / 4 };
        let a = self.a.abs();
        let divisor = if det.is_multiple_of(&a) { a } else { a / 2 };
        SymmetryPoint { form: self.clone(), divisor: divisor.magnitude().clone() }
    }

    /// All symmetry points on the signed cycle of `self`.
    pub fn symmetry_points(&self, max_len: usize) -> Result<Vec<SymmetryPoint>, FormError> {
        Ok(self
            .cycle(max_len)?
            .into_iter()
            .filter(QuadForm::is_symmetry_point)
            .map(|f| f.symmetry_point())
            .collect())
    }

    /// Walks the cycle of `self` and returns the first symmetry point, if any.
    pub fn is_ambiguous_class_symmetry(&self, max_len: usize) -> Result<Option<SymmetryPoint>, FormError> {
        if !self.is_reduced() {
            return Err(FormError::NotReduced);
        }
        let mut g = self.clone();
        for _ in 0..max_len {
            if g.is_symmetry_point() {
                return Ok(Some(g.symmetry_point()));
            }
            g = g.rho_unchecked();
            if g == *self {
                return Ok(None);
            }
        }
        Err(FormError::CycleTooLong(max_len))
    }

    /// For `F = (r², b, c)`, reduces `(r, b, r·c)`: a form whose square lies on the cycle of `F`.
    pub fn sqrt_of_square_form(&self) -> Result<ReductionResult, FormError> {
        if !self.a.is_positive() {
            return Err(FormError::NotSquareForm);
        }
        let r = nt::is_perfect_square(self.a.magnitude()).ok_or(FormError::NotSquareForm)?;
        let r = BigInt::from(r);
        let rc = &r * &self.c;
        Self::raw(r, self.b.clone(), rc, &self.disc).reduce()
    }

    /// Step distance sum around the signed cycle.
    pub fn cycle_distance(&self, max_len: usize) -> Result<f64, FormError> {
        Ok(self.cycle(max_len)?.iter().map(QuadForm::rho_distance).sum())
    }

    /// Step distance sum around the projective cycle.
    pub fn projective_cycle_distance(&self, max_len: usize) -> Result<f64, FormError> {
        Ok(self.projective_cycle(max_len)?.iter().map(QuadForm::rho_distance).sum())
    }
}

/// The representative `b' ≡ b (mod 2|a|)` in `J_{a,D}`: the interval
/// `(√D − 2|a|, √D)` when `|a| < √D`, and `(−|a|, |a|]` otherwise.
pub fn j_normalize(b: &BigInt, a: &BigInt, disc: &Discriminant) -> BigInt {
    let a_abs = a.abs();
    let two_a = BigInt::from(2) * &a_abs;
    if a_abs <= disc.s {
        &disc.s - (&disc.s - b).mod_floor(&two_a)
    } else {
        let r = b.mod_floor(&two_a);
        if r > a_abs {
            r - two_a
        } else {
            r
        }
    }
}

/// Every reduced form of discriminant `d`, sorted.
pub fn all_reduced_forms(disc: &Arc<Discriminant>) -> Vec<QuadForm> {
    let s = disc.s.to_i64().expect("small discriminant");
    let d = disc.d.to_i64().expect("small discriminant");
    let mut out = Vec::new();
    let mut b = if (s - d) % 2 == 0 { s } else { s - 1 };
    while b > 0 {
        let ac = (b * b - d) / 4;
        let lo = (s - b) / 2 + 1;
        let hi = (s + b) / 2;
        for a in lo..=hi {
            if a > 0 && ac % a == 0 {
                for sign in [1i64, -1] {
                    let f = QuadForm::raw((sign * a).into(), b.into(), (ac / (sign * a)).into(), disc);
                    if f.is_reduced() {
                        out.push(f);
                    }
                }
            }
        }
        b -= 2;
    }
    out.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn apply(self, v: BigInt) -> BigInt {
        match self {
            Sign::Plus => v,
            Sign::Minus => -v,
        }
    }
}

fn scaled_coeffs(conv: Convention, q: BigInt, p: BigInt, q_prev: BigInt) -> (BigInt, BigInt, BigInt, Convention) {
    match conv {
        Convention::Normalized if q.is_even() && q_prev.is_even() => (q / 2, p, q_prev / 2, Convention::Normalized),
        _ => (q, BigInt::from(2) * p, q_prev, Convention::Standard),
    }
}

/// `(σQ_i, 2P_{i−1}, −σQ_{i−1})`, halved to `(σQ_i/2, P_{i−1}, −σQ_{i−1}/2)`
/// for `Normalized` states. A `Normalized` state with an odd `Q` maps to the
/// discriminant-`4N` form instead.
pub fn form_from_cf<T: CfInt>(s: &CfState<T>, sign: Sign) -> QuadForm {
    let (a, b, c, conv) = scaled_coeffs(s.convention(), s.q().to_bigint(), s.p_prev().to_bigint(), s.q_prev().to_bigint());
    let disc = Discriminant::new(conv.discriminant(&s.radicand().n_big)).expect("non-square radicand");
    QuadForm::raw(sign.apply(a), b, -sign.apply(c), &disc)
}

fn cursor_parts(f: &QuadForm) -> Result<(Convention, BigUint, BigInt, BigInt, BigInt), FormError> {
    let d = &f.disc.d;
    if d.is_odd() {
        let two = BigInt::from(2);
        Ok((Convention::Normalized, d.magnitude().clone(), &two * f.a.abs(), f.b.clone(), two * f.c.abs()))
    } else {
        if f.b.is_odd() {
            return Err(FormError::NotIntegral);
        }
        Ok((Convention::Standard, (d / BigInt::from(4)).magnitude().clone(), f.a.abs(), &f.b / 2, f.c.abs()))
    }
}

/// Inverse of [`form_from_cf`]: the state at index 0 with `Q_i = |a|`,
/// `P_{i−1} = b/2`, `Q_{i−1} = |c|` (doubled, `P = b`, for odd discriminants).
pub fn cf_from_form(f: &QuadForm) -> Result<CfState<BigInt>, FormError> {
    if !f.is_reduced() {
        return Err(FormError::NotReduced);
    }
    let (conv, n, q, p, q_prev) = cursor_parts(f)?;
    let rad = Radicand::<BigInt>::new(&n, conv)?;
    Ok(CfState::from_parts(rad, q_prev, p, q, 0))
}

/// The `ρ`-compatible form of a state at index `i`:
/// `φ_{i−1} = ((−1)^{i−1}Q_{i−1}, 2P_{i−1}, (−1)^i Q_i)`, halved for `Normalized`.
/// Stepping the state forward applies `ρ` to this form.
pub fn cycle_form<T: CfInt>(s: &CfState<T>) -> QuadForm {
    let sign = if s.index().rem_euclid(2) == 1 { Sign::Plus } else { Sign::Minus };
    let (a, b, c, conv) = scaled_coeffs(s.convention(), s.q_prev().to_bigint(), s.p_prev().to_bigint(), s.q().to_bigint());
    let disc = Discriminant::new(conv.discriminant(&s.radicand().n_big)).expect("non-square radicand");
    QuadForm::raw(sign.apply(a), b, -sign.apply(c), &disc)
}

/// Inverse of [`cycle_form`] on a given radicand.
pub fn cursor_of_form<T: CfInt>(rad: &Arc<Radicand<T>>, f: &QuadForm) -> Result<CfState<T>, FormError> {
    if !f.is_reduced() {
        return Err(FormError::NotReduced);
    }
    let (conv, n, q_prev, p, q) = cursor_parts(f)?;
    if conv != rad.convention || n != rad.n_big {
        return Err(FormError::DiscriminantMismatch(f.disc.d.clone(), rad.discriminant()));
    }
    let t = |v: &BigInt| T::from_bigint(v).ok_or(CfError::Overflow { bits: v.bits() });
    let index = if f.a.is_positive() { 1 } else { 0 };
    Ok(CfState::from_parts(rad.clone(), t(&q_prev)?, t(&p)?, t(&q)?, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::init_expansion;

    fn f(a: i64, b: i64, c: i64) -> QuadForm {
        QuadForm::from_i64(a, b, c).unwrap()
    }

    #[test]
    fn discriminants() {
        assert_eq!(*f(1, 3, -1).discriminant(), BigInt::from(13));
        assert_eq!(*f(2, 2, -10).discriminant(), BigInt::from(84));
        assert!(matches!(QuadForm::from_i64(1, 1, 0), Err(FormError::InvalidDiscriminant(_))));
        assert!(QuadForm::from_i64(1, 2, 0).is_err());
    }

    #[test]
    fn reducedness() {
        assert!(f(1, 3, -1).is_reduced());
        assert!(!f(1, 1, -3).is_reduced());
        assert!(f(4, 2, -5).is_reduced());
    }

    #[test]
    fn t_and_w() {
        let g = f(1, 1, -3);
        assert_eq!(g.apply_tm(&BigInt::one()).unwrap(), f(1, 3, -1));
        assert_eq!(g.apply_tm(&BigInt::zero()).unwrap(), g);
        let m = BigInt::from(7);
        assert_eq!(g.apply_tm(&m).unwrap().apply_tm(&-m).unwrap(), g);
        assert_eq!(f(1, 3, -1).apply_w(), f(-1, -3, 1));
        assert_eq!(f(1, 3, -1).apply_w().apply_w(), f(1, 3, -1));
    }

    #[test]
    fn reduce_examples() {
        let r = f(1, 1, -3).reduce().unwrap();
        assert_eq!(r.form, f(1, 3, -1));
        assert_eq!((r.dist, r.steps), (0.0, 0));
        let r = f(1, 3, -1).reduce().unwrap();
        assert_eq!((r.form, r.dist, r.steps), (f(1, 3, -1), 0.0, 0));
    }

    #[test]
    fn reduce_word_reproduces_output() {
        for g in [f(7, 31, 11), f(-12, 5, 19), f(100, 1, -3), f(3, 101, 5), f(1, 1, -1000)] {
            let r = g.reduce().unwrap();
            assert!(r.form.is_reduced());
            let m = r.matrix();
            assert_eq!(mat_det(&m), BigInt::one());
            assert_eq!(g.act(&m), r.form, "{g}");
        }
    }

    #[test]
    fn rho_21() {
        let g = f(4, 2, -5);
        let h = g.rho().unwrap();
        assert_eq!(h, f(-5, 8, 1));
        assert_eq!(h.rho_inv().unwrap(), g);
        assert_eq!(f(1, 1, -3).rho(), Err(FormError::NotReduced));
    }

    #[test]
    fn compose_with_principal_is_identity_on_cycle() {
        let disc = Discriminant::new(BigInt::from(84)).unwrap();
        let one = QuadForm::principal(&disc);
        assert_eq!(one, f(1, 8, -5));
        for g in all_reduced_forms(&disc) {
            let c = one.compose_reduce(&g).unwrap();
            assert_eq!(c.m, BigInt::one());
            assert!(g.cycle(1000).unwrap().contains(&c.form), "{g}");
        }
    }

    #[test]
    fn form_from_cf_21() {
        let s2 = init_expansion::<i64>(&BigUint::from(21u32), Convention::Standard)
            .unwrap()
            .step_forward()
            .step_forward();
        assert_eq!((*s2.p_prev(), *s2.q()), (1, 4));
        let g = form_from_cf(&s2, Sign::Plus);
        assert_eq!(g, f(4, 2, -5));
        assert!(cf_from_form(&g).unwrap().same_position(&s2.to_big()));
        // ρ walks this map backward, flipping the sign
        assert_eq!(g.rho().unwrap(), form_from_cf(&s2.step_backward(), Sign::Minus));
    }

    #[test]
    fn cycle_form_steps_with_rho() {
        let s = init_expansion::<i64>(&BigUint::from(21u32), Convention::Standard).unwrap();
        let mut st = s.clone();
        for _ in 0..12 {
            let g = cycle_form(&st);
            assert!(g.is_reduced());
            st.advance();
            assert_eq!(g.rho().unwrap(), cycle_form(&st));
            let back = cursor_of_form(st.radicand(), &cycle_form(&st)).unwrap();
            assert!(back.same_position(&st));
        }
    }

    #[test]
    fn symmetry_points_of_principal_cycle() {
        let disc = Discriminant::new(BigInt::from(84)).unwrap();
        let pts = QuadForm::principal(&disc).symmetry_points(1000).unwrap();
        assert_eq!(pts.len(), 2);
        let divs: Vec<u32> = pts.iter().map(|p| p.divisor.to_u32().unwrap()).collect();
        assert!(divs.contains(&1) && divs.contains(&3), "{divs:?}");
    }

    #[test]
    fn sqrt_of_square_form_checks_input() {
        assert_eq!(f(2, 2, -10).sqrt_of_square_form().unwrap_err(), FormError::NotSquareForm);
        let r = f(1, 8, -5).sqrt_of_square_form().unwrap();
        assert_eq!(r.form, f(1, 8, -5));
    }
}
