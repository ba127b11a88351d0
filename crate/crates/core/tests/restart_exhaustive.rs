//! Skipping trivial squares never passes over a usable one: every odd
//! composite non-square `N < 10⁶`, compared with the classical scan.

use num_bigint::BigUint;
use squfof_core::nt;
use squfof_core::squfof::{self, SqufofConfig};

#[test]
fn restart_never_skips_a_usable_square() {
    let cfg = SqufofConfig { escalate: false, ..SqufofConfig::default() };
    let mut bad = Vec::new();
    let mut checked = 0;
    for n in (9u64..1_000_000).step_by(2) {
        if nt::is_perfect_square_u64(n).is_some() || nt::smallest_factor_by_trial_division(n) == n {
            continue;
        }
        checked += 1;
        let nb = BigUint::from(n);
        let (stop, found) = match squfof::attempt_dispatch(&nb, 1, &cfg, &|| false) {
            Ok((_, st)) => (st.forward_steps as i64 - 1, true),
            Err(_) => (squfof::default_step_bound(&nb) as i64, false),
        };
        let usable = squfof::scan_all_squares(&nb, stop).unwrap().into_iter().find(|s| s.1);
        if let Some((i, _)) = usable {
            bad.push(format!("N={n}: usable square at {i} skipped (attempt found={found})"));
        }
    }
    println!("{checked} composites checked, {} skipped a usable square", bad.len());
    assert!(bad.is_empty(), "{:?}", &bad[..bad.len().min(10)]);
}
