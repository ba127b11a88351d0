//! Invariant suites run by the acceptance tests and by `squfof selftest`.
//!
//! Each suite returns one [`CriterionReport`]; `Scale::Quick` shrinks the
//! sample sizes for interactive use.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::contfrac::{self, CfState, Convention, SymmetryKind, SymmetryOutcome};
use crate::infra::{self, DistanceFormulaInput};
use crate::nt;
use crate::parallel::{self, ParallelConfig, TaskOutcome, WorkerPool};
use crate::qforms::{self, Discriminant, Matrix, QuadForm};
use crate::squfof::{self, SqufofConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick<T>(self, quick: T, full: T) -> T {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] criterion {} ({}): {} [{:.1}s]", self.id, self.name, self.detail, self.seconds)
    }
}

fn report(id: u32, name: &'static str, t: Instant, passed: bool, detail: String) -> CriterionReport {
    CriterionReport { id, name, passed, detail, seconds: t.elapsed().as_secs_f64() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_nonsquare(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    loop {
        let n = rng.gen_range(lo..hi);
        if nt::is_perfect_square_u64(n).is_none() {
            return n;
        }
    }
}

/// Discriminants `5 ≤ D < bound` with `D ≡ 0, 1 (mod 4)` and `D` not a square.
pub fn valid_discriminants(bound: i64) -> Vec<i64> {
    (5..bound).filter(|&d| d.rem_euclid(4) <= 1 && nt::is_perfect_square_u64(d as u64).is_none()).collect()
}

fn conventions_for(n: u64) -> Vec<Convention> {
    if n % 4 == 1 && n >= 5 {
        vec![Convention::Standard, Convention::Normalized]
    } else {
        vec![Convention::Standard]
    }
}

/// Theorem 2 (a)–(g), (i) along `steps` forward steps, plus the
/// pseudo-square congruence and engine agreement on a subset.
pub fn criterion_1(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let (count, steps) = scale.pick((300, 200), (10_000, 1_000));
    let mut rng = rng(1);
    let mut failures = Vec::new();
    let mut checked = 0u64;
    for k in 0..count {
        let n = random_nonsquare(&mut rng, 2, 1 << 48);
        let nb = BigUint::from(n);
        for conv in conventions_for(n) {
            let mut s = contfrac::init_expansion::<i64>(&nb, conv).expect("valid radicand");
            let mut big = (k < count / 20).then(|| contfrac::init_expansion::<BigInt>(&nb, conv).expect("valid radicand"));
            for _ in 0..steps {
                if let Err(e) = s.check_invariants() {
                    failures.push(format!("N={n} {conv:?}: {e}"));
                    break;
                }
                if let Some(b) = big.as_mut() {
                    if s.to_big() != *b {
                        failures.push(format!("N={n} {conv:?}: engines disagree at {}", s.index()));
                        break;
                    }
                    b.advance();
                }
                s.advance();
                checked += 1;
            }
        }
        if k < count / 10 {
            // A_{i−1}² ≡ (−1)^i Q_i (mod N)
            let pairs = contfrac::convergents(&nb, 100, true).expect("valid radicand");
            let nn = BigInt::from(n);
            for p in pairs {
                let a = BigInt::from(p.a);
                let q = if p.index % 2 == 0 { BigInt::from(p.q) } else { -BigInt::from(p.q) };
                if !(&a * &a - q).mod_floor(&nn).is_zero() {
                    failures.push(format!("N={n}: pseudo-square congruence fails at {}", p.index));
                    break;
                }
            }
        }
    }
    let passed = failures.is_empty();
    let detail = format!("{count} radicands, {checked} states checked, {} failures{}", failures.len(), first(&failures));
    report(1, "theorem-2 suite", t, passed, detail)
}

fn first(v: &[String]) -> String {
    v.first().map(|s| format!("; first: {s}")).unwrap_or_default()
}

fn states_around<T: nt::CfInt>(s0: &CfState<T>, back: u64, fwd: u64) -> Vec<CfState<T>> {
    let mut s = s0.clone();
    for _ in 0..back {
        s.retreat();
    }
    let mut out = Vec::with_capacity((back + fwd + 1) as usize);
    out.push(s.clone());
    for _ in 0..back + fwd {
        s.advance();
        out.push(s.clone());
    }
    out
}

/// Checks reversal round trips, the reversed-form bridge, two-sided
/// periodicity and the symmetry about `Q₀` on one radicand.
fn two_sided_checks(n: u64, conv: Convention, window: Option<u64>, failures: &mut Vec<String>) {
    let nb = BigUint::from(n);
    let s0 = contfrac::init_expansion::<i64>(&nb, conv).expect("valid radicand");
    let (period, w) = match window {
        None => {
            let p = contfrac::find_period(&s0, contfrac::default_max_steps(&nb)).expect("periodic");
            (Some(p), p)
        }
        Some(w) => (None, w),
    };
    let span = states_around(&s0, w, 2 * w);
    let at = |i: i64| &span[(i + w as i64) as usize];
    for pair in span.windows(2) {
        if pair[1].step_backward() != pair[0] || pair[0].step_forward() != pair[1] {
            failures.push(format!("N={n} {conv:?}: reversal round trip fails at {}", pair[0].index()));
            return;
        }
    }
    for i in 0..=w as i64 {
        if at(i).q() != at(-i).q() {
            failures.push(format!("N={n} {conv:?}: Q_{i} != Q_-{i}"));
            return;
        }
    }
    if let Some(p) = period {
        let p = p as i64;
        for i in -p..=p {
            if !at(i).same_position(at(i + p)) {
                failures.push(format!("N={n} {conv:?}: state({i}) != state({i}+π)"));
                return;
            }
        }
    }
    // stepping the reversed form's cursor walks the original backward
    let mid = at(w as i64 / 2 + 1);
    let mut rc = qforms::cursor_of_form(mid.radicand(), &qforms::cycle_form(mid)).and_then(|_| {
        qforms::cursor_of_form(mid.radicand(), &qforms::cycle_form(mid).reversed())
    });
    let Ok(rc) = rc.as_mut() else {
        failures.push(format!("N={n} {conv:?}: reversed form has no cursor"));
        return;
    };
    let mut back = mid.clone();
    for _ in 0..w.min(50) {
        if rc.p_prev() != back.p_prev() || rc.q() != back.q_prev() || rc.q_prev() != back.q() {
            failures.push(format!("N={n} {conv:?}: reversed-form bridge fails at {}", back.index()));
            return;
        }
        rc.advance();
        back.retreat();
    }
}

/// Reversal, two-sided periodicity and `Q_i = Q_{−i}`.
pub fn criterion_2(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let (bound, randoms) = scale.pick((2_000u64, 100), (10_000, 1_000));
    let mut failures = Vec::new();
    let mut full = 0;
    for n in 2..bound {
        if nt::is_perfect_square_u64(n).is_some() {
            continue;
        }
        for conv in conventions_for(n) {
            two_sided_checks(n, conv, None, &mut failures);
            full += 1;
        }
    }
    let mut rng = rng(2);
    for _ in 0..randoms {
        let n = random_nonsquare(&mut rng, 1 << 20, 1 << 48);
        for conv in conventions_for(n) {
            two_sided_checks(n, conv, Some(300), &mut failures);
        }
    }
    let detail = format!("{full} full-period expansions (N < {bound}), {randoms} windowed radicands, {} failures{}", failures.len(), first(&failures));
    report(2, "reversal/periodicity suite", t, failures.is_empty(), detail)
}

/// Half-period symmetry points of random odd semiprimes.
pub fn criterion_3(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let (count, bits) = scale.pick((100, 14), (1_000, 20));
    let mut rng = rng(3);
    let mut failures = Vec::new();
    let mut counts: HashMap<&'static str, usize> = HashMap::new();
    for _ in 0..count {
        let (n, p, q) = nt::random_semiprime(bits, &mut rng);
        let n64 = n.to_u64().expect("below 2^40");
        if nt::smallest_factor_by_trial_division(n64) != p.to_u64().expect("small") {
            failures.push(format!("N={n}: trial division disagrees with the generator"));
            continue;
        }
        let conv = Convention::preferred_for(&n);
        let s0 = contfrac::init_expansion::<i64>(&n, conv).expect("valid radicand");
        let two_n = &n * 2u32;
        let out = contfrac::symmetry_factor(&s0, contfrac::default_max_steps(&n));
        let one_mod_4 = n64 % 4 == 1;
        match out {
            SymmetryOutcome::Factor { factor, q_s, kind, .. } => {
                if factor != p && factor != q {
                    failures.push(format!("N={n}: extracted {factor}, expected {p} or {q}"));
                }
                if kind == SymmetryKind::Even && !two_n.is_multiple_of(&q_s) {
                    failures.push(format!("N={n}: Q_s={q_s} does not divide 2N"));
                }
                *counts.entry(if kind == SymmetryKind::Even { "even-factor" } else { "odd-factor" }).or_default() += 1;
            }
            SymmetryOutcome::Trivial { q_s, .. } => {
                if !two_n.is_multiple_of(&q_s) {
                    failures.push(format!("N={n}: Q_s={q_s} does not divide 2N"));
                }
                if one_mod_4 {
                    failures.push(format!("N={n}: even period with trivial Q_s={q_s} under N ≡ 1 (mod 4)"));
                }
                *counts.entry("even-trivial-Q2").or_default() += 1;
            }
            SymmetryOutcome::OddPeriodQrMinusOne { .. } => *counts.entry("odd-qr-minus-one").or_default() += 1,
            SymmetryOutcome::Exhausted { steps } => failures.push(format!("N={n}: no symmetry point within {steps} steps")),
        }
    }
    let mut keys: Vec<_> = counts.into_iter().collect();
    keys.sort();
    let detail = format!(
        "{count} semiprimes of {bits}-bit primes, outcomes {keys:?} (trivial Q_s=2 occurs only for N ≡ 3 mod 4 under 4N), {} failures{}",
        failures.len(),
        first(&failures)
    );
    report(3, "symmetry-factor suite", t, failures.is_empty(), detail)
}

fn random_sl2(rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = qforms::identity_matrix();
    for _ in 0..rng.gen_range(1..6) {
        let k = BigInt::from(rng.gen_range(-30i64..=30));
        let t = [[BigInt::one(), k], [BigInt::zero(), BigInt::one()]];
        let w = [[BigInt::zero(), -BigInt::one()], [BigInt::one(), BigInt::zero()]];
        m = qforms::mat_mul(&qforms::mat_mul(&m, &t), &w);
    }
    m
}

fn in_cycle(f: &QuadForm, cycle: &[QuadForm]) -> bool {
    cycle.iter().any(|g| g == f)
}

/// Cycle partition, principal period, ambiguous cycles, reduction and composition.
pub fn criterion_4(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let (bound, triples) = scale.pick((1_500i64, 200), (10_000, 1_000));
    let mut rng = rng(4);
    let mut failures = Vec::new();
    let (mut cycles, mut ambiguous, mut reductions) = (0usize, 0usize, 0usize);
    let discs = valid_discriminants(bound);
    for &d in &discs {
        let disc = Discriminant::new(BigInt::from(d)).expect("valid");
        let forms = qforms::all_reduced_forms(&disc);
        let mut owner: HashMap<(BigInt, BigInt), usize> = HashMap::new();
        let mut cycle_list: Vec<Vec<QuadForm>> = Vec::new();
        for f in &forms {
            if owner.contains_key(&(f.a.clone(), f.b.clone())) {
                continue;
            }
            let cyc = f.cycle(forms.len() + 1).expect("cycle within F(D)_r");
            for g in &cyc {
                if owner.insert((g.a.clone(), g.b.clone()), cycle_list.len()).is_some() {
                    failures.push(format!("D={d}: cycles overlap at {g}"));
                }
            }
            cycle_list.push(cyc);
        }
        let covered: usize = cycle_list.iter().map(Vec::len).sum();
        if covered != forms.len() {
            failures.push(format!("D={d}: cycles cover {covered} of {} reduced forms", forms.len()));
        }
        for cyc in &cycle_list {
            cycles += 1;
            let inv = cyc[0].inverse().reduce().expect("reducible").form;
            let amb = in_cycle(&inv, cyc);
            let syms = cyc.iter().filter(|g| g.is_symmetry_point()).count();
            if amb {
                ambiguous += 1;
            }
            if (amb && syms != 2) || (!amb && syms != 0) {
                failures.push(format!("D={d}: cycle of {} (ambiguous={amb}) has {syms} symmetry points", cyc[0]));
            }
        }
        // principal cycle against the CF period
        let (n, conv) = if d % 4 == 1 { (d as u64, Convention::Normalized) } else { ((d / 4) as u64, Convention::Standard) };
        if nt::is_perfect_square_u64(n).is_none() {
            let s0 = contfrac::init_expansion::<i64>(&BigUint::from(n), conv).expect("valid radicand");
            let period = contfrac::find_period(&s0, 1 << 24).expect("periodic");
            let pc = QuadForm::principal(&disc).projective_cycle(forms.len() + 1).expect("principal cycle");
            if pc.len() as u64 != period {
                failures.push(format!("D={d}: principal cycle {} vs period {period}", pc.len()));
            }
            // b_1 … b_{π−1} is a palindrome
            let mut s = s0.clone();
            let word: Vec<i64> = (1..period).map(|_| {
                s.advance();
                *s.b()
            }).collect();
            if word.iter().ne(word.iter().rev()) {
                failures.push(format!("D={d}: partial quotients {word:?} are not a palindrome"));
            }
        }
        // reduction replay on a random equivalent form
        if let Some(f) = forms.get(rng.gen_range(0..forms.len().max(1))) {
            let m = random_sl2(&mut rng);
            let g = f.act(&m);
            match g.reduce() {
                Ok(red) => {
                    reductions += 1;
                    let big = g.a.abs().max(g.b.abs()).max(g.c.abs());
                    let bound = 2 * big.bits() as usize + 8;
                    let w = red.matrix();
                    if !red.form.is_reduced() || g.act(&w) != red.form || qforms::mat_det(&w) != BigInt::one() {
                        failures.push(format!("D={d}: reduction of {g} does not replay"));
                    } else if red.iterations > bound {
                        failures.push(format!("D={d}: reduction of {g} took {} > {bound} iterations", red.iterations));
                    } else if !in_cycle(&red.form, &cycle_list[owner[&(f.a.clone(), f.b.clone())]]) {
                        failures.push(format!("D={d}: reduction of {g} left the cycle of {f}"));
                    }
                }
                Err(e) => failures.push(format!("D={d}: reduce({g}) failed: {e}")),
            }
        }
    }
    // composition on random primitive triples
    let mut done = 0;
    while done < triples {
        let d = discs[rng.gen_range(0..discs.len())];
        let disc = Discriminant::new(BigInt::from(d)).expect("valid");
        let prim: Vec<QuadForm> = qforms::all_reduced_forms(&disc).into_iter().filter(QuadForm::is_primitive).collect();
        let pick = |rng: &mut ChaCha8Rng| prim[rng.gen_range(0..prim.len())].clone();
        let (f, g, h) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let comp = |x: &QuadForm, y: &QuadForm| x.compose_reduce(y).map(|c| c.form);
        let res = (|| -> Result<(), String> {
            let fg = comp(&f, &g).map_err(|e| e.to_string())?;
            let left = comp(&fg, &h).map_err(|e| e.to_string())?;
            let right = comp(&f, &comp(&g, &h).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            for x in [&fg, &left, &right] {
                if &x.b * &x.b - BigInt::from(4) * &x.a * &x.c != BigInt::from(d) {
                    return Err(format!("discriminant changed in {x}"));
                }
            }
            let cyc = left.cycle(prim.len() + 1).map_err(|e| e.to_string())?;
            if !in_cycle(&right, &cyc) {
                return Err(format!("({f}#{g})#{h} and {f}#({g}#{h}) lie on different cycles"));
            }
            let id = comp(&f, &QuadForm::principal(&disc)).map_err(|e| e.to_string())?;
            if !in_cycle(&id, &f.cycle(prim.len() + 1).map_err(|e| e.to_string())?) {
                return Err(format!("{f}#1 left the cycle of {f}"));
            }
            if !in_cycle(&comp(&g, &f).map_err(|e| e.to_string())?, &fg.cycle(prim.len() + 1).map_err(|e| e.to_string())?) {
                return Err(format!("{f}#{g} and {g}#{f} differ"));
            }
            Ok(())
        })();
        if let Err(e) = res {
            failures.push(format!("D={d}: {e}"));
        }
        done += 1;
    }
    let detail = format!(
        "{} discriminants < {bound}: {cycles} cycles ({ambiguous} ambiguous), {reductions} reductions replayed, {triples} composition triples, {} failures{}",
        discs.len(),
        failures.len(),
        first(&failures)
    );
    report(4, "form-calculus suite", t, failures.is_empty(), detail)
}

fn forms_at_random(rng: &mut ChaCha8Rng, cyc: &[QuadForm]) -> (QuadForm, QuadForm, f64) {
    let i = rng.gen_range(0..cyc.len());
    let k = rng.gen_range(0..cyc.len());
    let d: f64 = (0..k).map(|j| cyc[(i + j) % cyc.len()].rho_distance()).sum();
    (cyc[i].clone(), cyc[(i + k) % cyc.len()].clone(), d)
}

/// Regulator of 13, start-point independence, Theorem 6 and symmetry centres.
pub fn criterion_5(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let (samples, instances) = scale.pick((60, 200), (400, 1_500));
    let mut rng = rng(5);
    let mut failures = Vec::new();
    let r13 = infra::regulator(&BigUint::from(13u32), Convention::Normalized).map(|r| r.value).unwrap_or(f64::NAN);
    let want = ((3.0 + 13f64.sqrt()) / 2.0).ln();
    if !((r13 - want).abs() <= 1e-9 * want) {
        failures.push(format!("regulator(13) = {r13}, expected {want}"));
    }
    let mut worst_start = 0f64;
    let mut worst_sym = 0f64;
    let big = valid_discriminants(1_000_000);
    for j in 0..samples {
        let d = if j < 40 { big[j * 7] } else { big[rng.gen_range(0..big.len())] };
        let disc = Discriminant::new(BigInt::from(d)).expect("valid");
        let p = QuadForm::principal(&disc);
        let Ok(pc) = p.projective_cycle(1 << 20) else {
            failures.push(format!("D={d}: principal cycle too long"));
            continue;
        };
        let r: f64 = pc.iter().map(QuadForm::rho_distance).sum();
        for _ in 0..4 {
            let g = &pc[rng.gen_range(0..pc.len())];
            let rg = g.projective_cycle_distance(1 << 20).unwrap_or(f64::NAN);
            let e = (rg - r).abs() / r;
            worst_start = worst_start.max(e);
            if !(e <= 1e-9) {
                failures.push(format!("D={d}: cycle distance from {g} is {rg}, from 1 is {r}"));
            }
        }
        match infra::symmetry_centers(&p, 1 << 20) {
            Ok((c, rr)) if c.len() == 2 => {
                let e = ((c[1].center - c[0].center) - rr / 2.0).abs() / rr;
                worst_sym = worst_sym.max(e);
                if !(e <= 1e-9) {
                    failures.push(format!("D={d}: symmetry centres {} and {} are not R/2 apart", c[0].center, c[1].center));
                }
            }
            Ok((c, _)) => failures.push(format!("D={d}: principal cycle has {} symmetry points", c.len())),
            Err(e) => failures.push(format!("D={d}: {e}")),
        }
    }
    // Theorem 6 on random same-cycle instances
    let small = valid_discriminants(20_000);
    let mut worst_thm6 = 0f64;
    let mut done = 0;
    while done < instances {
        let d = small[rng.gen_range(0..small.len())];
        let disc = Discriminant::new(BigInt::from(d)).expect("valid");
        let prim: Vec<QuadForm> = qforms::all_reduced_forms(&disc).into_iter().filter(QuadForm::is_primitive).collect();
        let r = QuadForm::principal(&disc).projective_cycle_distance(1 << 20).expect("principal cycle");
        let f = prim[rng.gen_range(0..prim.len())].projective_cycle(1 << 20).expect("cycle");
        let g = prim[rng.gen_range(0..prim.len())].projective_cycle(1 << 20).expect("cycle");
        let (f1, fk, d_f) = forms_at_random(&mut rng, &f);
        let (g1, gl, d_g) = forms_at_random(&mut rng, &g);
        let inst = DistanceFormulaInput { f1, fk, g1, gl, d_f, d_g, regulator: r };
        match infra::check_distance_formula(&inst, 1 << 20) {
            Ok(res) => {
                worst_thm6 = worst_thm6.max(res / r);
                if !(res <= 1e-9 * r) {
                    failures.push(format!("D={d}: distance formula residual {res:e} (R={r})"));
                }
            }
            Err(e) => failures.push(format!("D={d}: {e}")),
        }
        done += 1;
    }
    let detail = format!(
        "R(13) rel err {:.1e}; start independence worst {worst_start:.1e}·R over {samples} D < 10^6; {instances} composition instances worst {worst_thm6:.1e}·R; symmetry centres worst {worst_sym:.1e}·R from R/2; {} failures{}",
        (r13 - want).abs() / want,
        failures.len(),
        first(&failures)
    );
    report(5, "distance suite", t, failures.is_empty(), detail)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// Least-squares slope of `y` on `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Serial SQUFOF success, exact validation and step scaling.
pub fn criterion_6(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let (n20, n32, per_size) = scale.pick((100, 10, 60), (1_000, 100, 300));
    let mut rng = rng(6);
    let cfg = SqufofConfig { track_distance: true, ..SqufofConfig::default() };
    let mut failures = Vec::new();
    let mut worst_bk = 0f64;
    let mut samples = 0usize;
    let mut run = |n: &BigUint, p: &BigUint, q: &BigUint, failures: &mut Vec<String>| -> Option<u64> {
        match squfof::squfof_factor_with_stats(n, &cfg) {
            Ok((rep, st)) => {
                if &rep.factors.0 * &rep.factors.1 != *n || rep.factors != (p.clone(), q.clone()) {
                    failures.push(format!("N={n}: wrong factors {:?}", rep.factors));
                }
                let ln_n = nt::ln_abs(&BigInt::from(n.clone()));
                samples += st.bookkeeping.len();
                for b in &st.bookkeeping {
                    worst_bk = worst_bk.max((b.predicted - b.observed).abs() / ln_n);
                }
                Some(st.forward_steps)
            }
            Err(e) => {
                failures.push(format!("N={n}: {e}"));
                None
            }
        }
    };
    for (count, bits) in [(n20, 20u64), (n32, 32)] {
        for _ in 0..count {
            let (n, p, q) = nt::random_semiprime(bits, &mut rng);
            run(&n, &p, &q, &mut failures);
        }
    }
    let mut points = Vec::new();
    let mut medians = Vec::new();
    for bits in [16u64, 20, 24, 28] {
        let mut steps: Vec<f64> = (0..per_size)
            .filter_map(|_| {
                let (n, p, q) = nt::random_semiprime(bits, &mut rng);
                run(&n, &p, &q, &mut failures).map(|s| s as f64)
            })
            .collect();
        let m = median(&mut steps);
        medians.push((2 * bits, m));
        points.push(((2 * bits) as f64 * std::f64::consts::LN_2, m.ln()));
    }
    let s = slope(&points);
    let slope_ok = (s - 0.25).abs() <= 0.08;
    let passed = failures.is_empty() && slope_ok && worst_bk <= 2.0;
    let detail = format!(
        "{n20} semiprimes of 20-bit primes and {n32} of 32-bit primes; median forward steps by N bits {medians:?}; log-log slope {s:.3} (target 0.25 ± 0.08); worst bookkeeping residual {worst_bk:.2}·ln N over {samples} reverse walks (bound 2); {} failures{}",
        failures.len(),
        first(&failures)
    );
    report(6, "serial SQUFOF", t, passed, detail)
}

/// Fixed constant `c` in `giant_steps ≤ c·log₂ N`.
pub const BSGS_GIANT_STEP_CONSTANT: f64 = 1.0;

/// Baby-step giant-step factoring from the regulator.
pub fn criterion_7(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let count = scale.pick(30, 100);
    let mut rng = rng(7);
    let mut failures = Vec::new();
    let mut growth = Vec::new();
    let (mut ok, mut first_try, mut obstructed) = (0, 0, Vec::new());
    for bits in [12u64, 16, 20] {
        let mut ratios = Vec::new();
        for _ in 0..count {
            let (n, p, q) = nt::random_semiprime(bits, &mut rng);
            match infra::bsgs_factor_escalating(&n, &infra::BSGS_MULTIPLIERS) {
                Ok((rep, st)) => {
                    if rep.factors != (p.clone(), q.clone()) || &rep.factors.0 * &rep.factors.1 != n {
                        failures.push(format!("N={n}: wrong factors {:?}", rep.factors));
                    }
                    let ratio = st.giant_steps() as f64 / (n.bits() as f64);
                    ratios.push(ratio);
                    if ratio > BSGS_GIANT_STEP_CONSTANT {
                        failures.push(format!("N={n}: {} giant steps exceed {BSGS_GIANT_STEP_CONSTANT}·log2 N", st.giant_steps()));
                    }
                    if bits == 20 {
                        ok += 1;
                        first_try += (rep.multiplier == 1) as usize;
                    }
                }
                Err(infra::InfraError::NoFactor(r)) if bits == 20 => obstructed.push(format!("{n} ({r:?})")),
                Err(infra::InfraError::NoFactor(_)) => {}
                Err(e) => failures.push(format!("N={n}: {e}")),
            }
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
        growth.push((2 * bits, (mean * 1000.0).round() / 1000.0));
    }
    let passed = failures.is_empty() && ok == count;
    let detail = format!(
        "{ok}/{count} semiprimes < 2^40 factored ({first_try} on k=1, rest after multiplier escalation); obstructed on every multiplier: {obstructed:?}; mean giant_steps/log2 N by N bits {growth:?} (c = {BSGS_GIANT_STEP_CONSTANT}); {} failures{}",
        failures.len(),
        first(&failures)
    );
    report(7, "baby-step giant-step", t, passed, detail)
}

/// Brute-force segment placement on the principal cycle of `4N`.
fn check_disjointness(n: u64, failures: &mut Vec<String>) -> usize {
    let nb = BigUint::from(n);
    let disc = Discriminant::new(BigInt::from(4 * n)).expect("valid");
    let pc = QuadForm::principal(&disc).projective_cycle(1 << 20).expect("principal cycle");
    let r: f64 = pc.iter().map(QuadForm::rho_distance).sum();
    let mut pos = HashMap::new();
    let mut acc = 0.0;
    for f in &pc {
        pos.insert(f.projective_key(), acc);
        acc += f.rho_distance();
    }
    // largest ladder whose segments stay below R/8
    let mut size = 1;
    while size < 12 {
        let l = parallel::prepare_ladder(&nb, 1, size + 1, 1).expect("ladder");
        if 2.0 * l.forms[size].dist > r / 8.0 {
            break;
        }
        size += 1;
    }
    let ladder = Arc::new(parallel::prepare_ladder(&nb, 1, size, 1).expect("ladder"));
    let mut minter = parallel::SegmentMinter::new(0, ladder).expect("minter");
    let mut unwrapped = 0.0;
    let mut prev_end: Option<QuadForm> = None;
    let mut segs = 0;
    let mut seen: HashSet<u64> = HashSet::new();
    while unwrapped < r {
        let seg = minter.next_segment().expect("segment");
        segs += 1;
        let (Some(&ps), Some(&pe)) = (pos.get(&seg.start.form.projective_key()), pos.get(&seg.end.form.projective_key())) else {
            failures.push(format!("N={n}: segment {} leaves the principal cycle", seg.seq));
            return segs;
        };
        if let Some(pe_prev) = &prev_end {
            if pe_prev.projective_key() != seg.start.form.projective_key() {
                failures.push(format!("N={n}: segment {} does not start where {} ended", seg.seq, seg.seq - 1));
            }
        }
        let len = seg.nominal_length();
        // brute-force arc length from start to end agrees with the tracked length
        let arc = (pe - ps).rem_euclid(r);
        let res = infra::circular_residual(arc - len, r);
        if !(res <= 1e-6 * r) || len <= 0.0 {
            failures.push(format!("N={n}: segment {} arc {arc:.6} vs tracked {len:.6} (R={r:.3})", seg.seq));
        }
        // unwrapped start agrees with the brute-force position mod R
        if infra::circular_residual(unwrapped - ps, r) > 1e-6 * r {
            failures.push(format!("N={n}: segment {} starts at {ps:.4}, expected {unwrapped:.4} mod R", seg.seq));
        }
        // cycle positions covered by this segment must be new until the total passes R
        let end = unwrapped + len;
        let mut x = 0.0;
        for (i, f) in pc.iter().enumerate().chain(pc.iter().enumerate()) {
            let _ = f;
            let p = pos[&pc[i].projective_key()];
            let lifted = if x >= r { p + r } else { p };
            x += pc[i].rho_distance();
            let mut q = lifted;
            while q < unwrapped {
                q += r;
            }
            if q > unwrapped + 1e-9 && q < end - 1e-9 && end <= r + 1e-9 && !seen.insert(i as u64) {
                failures.push(format!("N={n}: position {i} covered twice before wraparound"));
            }
        }
        unwrapped = end;
        prev_end = Some(seg.end.form.clone());
    }
    segs
}

/// Segment-parallel SQUFOF: validity, timing trend and segment disjointness.
pub fn criterion_8(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let (set, disj) = scale.pick((20, 20), (100, 60));
    let mut rng = rng(8);
    let mut failures = Vec::new();
    let inputs: Vec<(BigUint, BigUint, BigUint)> = (0..set).map(|_| nt::random_semiprime(24, &mut rng)).collect();
    for (n, _, _) in &inputs {
        if let Err(e) = squfof::squfof_factor(n, &SqufofConfig::default()) {
            failures.push(format!("serial N={n}: {e}"));
        }
    }
    let mut means = Vec::new();
    for w in [1usize, 2, 4, 8] {
        let mut pool = match WorkerPool::new(w) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("pool of {w}: {e}"));
                continue;
            }
        };
        // warm-up
        let _ = pool.factor_segments(&inputs[0].0, &ParallelConfig::default());
        let mut total = 0.0;
        for (n, p, q) in &inputs {
            let s = Instant::now();
            match pool.factor_segments(n, &ParallelConfig::default()) {
                Ok(r) => {
                    total += s.elapsed().as_secs_f64() * 1e3;
                    if r.report.factors != (p.clone(), q.clone()) || &r.report.factors.0 * &r.report.factors.1 != *n {
                        failures.push(format!("w={w} N={n}: wrong factors"));
                    }
                    if r.tasks.iter().filter(|t| t.outcome == TaskOutcome::Won).count() != 1 {
                        failures.push(format!("w={w} N={n}: accepted count is not one"));
                    }
                }
                Err(e) => failures.push(format!("w={w} N={n}: {e}")),
            }
        }
        means.push((w, total / inputs.len() as f64));
    }
    let monotone = means.windows(2).all(|p| p[1].1 <= 1.10 * p[0].1);
    let mut disj_rng = rng;
    let mut segs = 0;
    for _ in 0..disj {
        let n = random_nonsquare(&mut disj_rng, 1_000, 250_000);
        segs += check_disjointness(n, &mut failures);
    }
    let timing_applies = scale == Scale::Full;
    let passed = failures.is_empty() && (monotone || !timing_applies);
    let cpus = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let pretty: Vec<String> = means.iter().map(|(w, m)| format!("w={w}: {m:.3} ms")).collect();
    let detail = format!(
        "{set} semiprimes of 24-bit primes valid for serial and workers 1/2/4/8; mean wall {} on {cpus} CPU(s), non-increasing within 10%: {monotone}{}; {segs} segments on {disj} principal cycles (4N < 10^6) checked disjoint; {} failures{}",
        pretty.join(", "),
        if timing_applies { "" } else { " (not enforced at quick scale)" },
        failures.len(),
        first(&failures)
    );
    report(8, "parallel segments", t, passed, detail)
}

/// Multiplier-race baseline with per-multiplier statistics.
pub fn criterion_9(scale: Scale) -> CriterionReport {
    let t = Instant::now();
    let set = scale.pick(20, 100);
    let ks = [1u64, 3, 5, 7, 11];
    let mut rng = rng(8);
    let inputs: Vec<(BigUint, BigUint, BigUint)> = (0..set).map(|_| nt::random_semiprime(24, &mut rng)).collect();
    let mut failures = Vec::new();
    let mut wins: HashMap<u64, usize> = HashMap::new();
    let mut pool = match WorkerPool::new(ks.len()) {
        Ok(p) => p,
        Err(e) => return report(9, "multiplier baseline", t, false, e.to_string()),
    };
    for (n, p, q) in &inputs {
        match pool.factor_multipliers(n, &ks, None) {
            Ok(r) => {
                if r.report.factors != (p.clone(), q.clone()) {
                    failures.push(format!("N={n}: wrong factors"));
                }
                for task in r.tasks.iter().filter(|t| t.outcome == TaskOutcome::Won) {
                    *wins.entry(task.multiplier).or_default() += 1;
                }
            }
            Err(e) => failures.push(format!("N={n}: {e}")),
        }
    }
    // per-multiplier serial statistics: success rate and steps to success
    let mut per_k = Vec::new();
    let mut best_steps = vec![f64::INFINITY; inputs.len()];
    let mut k1_steps = vec![f64::NAN; inputs.len()];
    for &k in &ks {
        let cfg = SqufofConfig { multiplier: k, escalate: false, ..SqufofConfig::default() };
        let (mut succ, mut steps) = (0, 0u64);
        for (i, (n, _, _)) in inputs.iter().enumerate() {
            match squfof::attempt_dispatch(n, k, &cfg, &|| false) {
                Ok((_, st)) => {
                    succ += 1;
                    steps += st.forward_steps;
                    best_steps[i] = best_steps[i].min(st.forward_steps as f64);
                    if k == 1 {
                        k1_steps[i] = st.forward_steps as f64;
                    }
                }
                Err((_, st)) => {
                    if k == 1 {
                        k1_steps[i] = st.forward_steps as f64;
                    }
                }
            }
        }
        per_k.push(format!("k={k}: {succ}/{} ok, mean steps {:.0}, race wins {}", inputs.len(), steps as f64 / succ.max(1) as f64, wins.get(&k).copied().unwrap_or(0)));
    }
    let mean = |v: &[f64]| v.iter().filter(|x| x.is_finite()).sum::<f64>() / v.iter().filter(|x| x.is_finite()).count().max(1) as f64;
    let improvement = 1.0 - mean(&best_steps) / mean(&k1_steps);
    let detail = format!(
        "{set} semiprimes of 24-bit primes, ladder {ks:?}; {}; best-of-ladder mean steps {:.1}% below k=1 (observed, not asserted); {} failures{}",
        per_k.join("; "),
        100.0 * improvement,
        failures.len(),
        first(&failures)
    );
    report(9, "multiplier baseline", t, failures.is_empty(), detail)
}

pub fn run_criterion(id: u32, scale: Scale) -> Option<CriterionReport> {
    Some(match id {
        1 => criterion_1(scale),
        2 => criterion_2(scale),
        3 => criterion_3(scale),
        4 => criterion_4(scale),
        5 => criterion_5(scale),
        6 => criterion_6(scale),
        7 => criterion_7(scale),
        8 => criterion_8(scale),
        9 => criterion_9(scale),
        _ => return None,
    })
}

pub fn run_all(scale: Scale) -> Vec<CriterionReport> {
    (1..=9).filter_map(|id| run_criterion(id, scale)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let pts = [(0.0, 1.0), (1.0, 1.25), (2.0, 1.5)];
        assert!((slope(&pts) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn discriminant_list() {
        assert_eq!(valid_discriminants(22), vec![5, 8, 12, 13, 17, 20, 21]);
    }

    #[test]
    fn report_line() {
        let r = CriterionReport { id: 3, name: "x", passed: false, detail: "d".into(), seconds: 0.0 };
        assert!(r.to_string().starts_with("[FAIL] criterion 3 (x): d"));
    }
}
