//! Square forms factorization (SQUFOF) with the machinery behind it:
//! two-sided continued fractions, indefinite binary quadratic forms,
//! infrastructure distance, and a segmented parallel search.

/// Runs a generic function on the narrowest integer engine that fits `n`.
#[macro_export]
macro_rules! dispatch_engine {
    ($n:expr, $f:ident ( $($arg:expr),* $(,)? )) => {{
        if <i64 as $crate::nt::CfInt>::fits_radicand($n) {
            $f::<i64>($($arg),*)
        } else if <i128 as $crate::nt::CfInt>::fits_radicand($n) {
            $f::<i128>($($arg),*)
        } else {
            $f::<num_bigint::BigInt>($($arg),*)
        }
    }};
}

pub mod contfrac;
pub mod infra;
pub mod nt;
pub mod parallel;
pub mod qforms;
pub mod report;
pub mod selftest;
pub mod squfof;

pub use contfrac::{CfState, Convention};
pub use qforms::QuadForm;
pub use report::{FactorReport, Method};
