//! Factorization results shared by every factoring entry point.

use std::time::Duration;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Small prime factor or perfect square found before any expansion.
    Trivial,
    Squfof,
    Bsgs,
    Parallel,
    /// Half-period symmetry point reached by a plain cycle walk.
    Symmetry,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Trivial => "trivial",
            Method::Squfof => "squfof",
            Method::Bsgs => "bsgs",
            Method::Parallel => "parallel",
            Method::Symmetry => "symmetry",
        };
        f.write_str(s)
    }
}

/// A validated split `n = factors.0 · factors.1` with `1 < factors.0 ≤ factors.1 < n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorReport {
    pub n: BigUint,
    pub factors: (BigUint, BigUint),
    pub method: Method,
    pub forward_steps: u64,
    pub reverse_steps: u64,
    pub squares_tested: u64,
    pub giant_steps: u64,
    pub multiplier: u64,
    pub wall_time: Duration,
}

impl FactorReport {
    /// Builds a report from any proper divisor `d` of `n`; `None` if `d` is not one.
    pub fn from_divisor(n: &BigUint, d: &BigUint, method: Method) -> Option<Self> {
        if d <= &BigUint::one() || d >= n || !n.is_multiple_of(d) {
            return None;
        }
        let e = n / d;
        let factors = if *d <= e { (d.clone(), e) } else { (e, d.clone()) };
        Some(FactorReport {
            n: n.clone(),
            factors,
            method,
            forward_steps: 0,
            reverse_steps: 0,
            squares_tested: 0,
            giant_steps: 0,
            multiplier: 1,
            wall_time: Duration::ZERO,
        })
    }

    pub fn is_valid(&self) -> bool {
        let (p, q) = &self.factors;
        p > &BigUint::one() && p <= q && q < &self.n && p * q == self.n
    }
}

impl Serialize for FactorReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FactorReport", 10)?;
        st.serialize_field("n", &self.n.to_string())?;
        st.serialize_field("factors", &[self.factors.0.to_string(), self.factors.1.to_string()])?;
        st.serialize_field("method", &self.method)?;
        st.serialize_field("forward_steps", &self.forward_steps)?;
        st.serialize_field("reverse_steps", &self.reverse_steps)?;
        st.serialize_field("squares_tested", &self.squares_tested)?;
        st.serialize_field("giant_steps", &self.giant_steps)?;
        st.serialize_field("multiplier", &self.multiplier)?;
        st.serialize_field("wall_time_ms", &(self.wall_time.as_secs_f64() * 1e3))?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_validation() {
        let n = BigUint::from(21u32);
        let r = FactorReport::from_divisor(&n, &BigUint::from(7u32), Method::Squfof).unwrap();
        assert_eq!(r.factors, (BigUint::from(3u32), BigUint::from(7u32)));
        assert!(r.is_valid());
        for bad in [1u32, 21, 5, 0] {
            assert!(FactorReport::from_divisor(&n, &BigUint::from(bad), Method::Squfof).is_none());
        }
    }

    #[test]
    fn json_uses_decimal_strings() {
        let n = BigUint::from(21u32);
        let r = FactorReport::from_divisor(&n, &BigUint::from(3u32), Method::Bsgs).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["factors"][0], "3");
        assert_eq!(v["method"], "bsgs");
    }
}
