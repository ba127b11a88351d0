//! Acceptance criteria at full scale, one test and one status line each.
//!
//! Run with `cargo test -p squfof-core --test acceptance -- --nocapture --test-threads=1`
//! to see the lines in order.

use squfof_core::selftest::{run_criterion, Scale};

fn check(id: u32) {
    let r = run_criterion(id, Scale::Full).expect("known criterion");
    println!("{r}");
    assert!(r.passed, "{r}");
}

#[test]
fn c1_theorem_2_invariants() {
    check(1);
}

#[test]
fn c2_reversal_and_two_sided_periodicity() {
    check(2);
}

#[test]
fn c3_half_period_symmetry_factor() {
    check(3);
}

#[test]
fn c4_cycles_reduction_composition() {
    check(4);
}

#[test]
fn c5_distances_and_regulator() {
    check(5);
}

#[test]
fn c6_serial_squfof() {
    check(6);
}

#[test]
fn c7_baby_step_giant_step() {
    check(7);
}

#[test]
fn c8_parallel_segments() {
    check(8);
}

#[test]
fn c9_multiplier_baseline() {
    check(9);
}
