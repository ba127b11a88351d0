use num_bigint::BigUint;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use squfof_core::nt;
use squfof_core::parallel::wire::{decode_frame, encode_frame};
use squfof_core::parallel::{MultiplierTask, ParallelConfig, StopReason, Task, WorkerMessage, WorkerPool, WorkerStats};
use squfof_core::squfof::{self, SqufofConfig};

fn odd_composite(max: u64) -> impl Strategy<Value = u64> {
    (9..max).prop_map(|n| n | 1).prop_filter("composite non-square", |&n| {
        nt::is_perfect_square_u64(n).is_none() && nt::smallest_factor_by_trial_division(n) != n
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // Skipping trivial squares never passes over a usable one.
    #[test]
    fn restart_agrees_with_exhaustive_scan(n in odd_composite(1_000_000)) {
        let nb = BigUint::from(n);
        let cfg = SqufofConfig { escalate: false, ..SqufofConfig::default() };
        let bound = squfof::default_step_bound(&nb);
        let squares = squfof::scan_all_squares(&nb, bound as i64).unwrap();
        let first_usable = squares.iter().find(|s| s.1).map(|s| s.0 as u64);
        match squfof::attempt_dispatch(&nb, 1, &cfg, &|| false) {
            Ok((d, st)) => {
                prop_assert!(d > BigUint::from(1u32) && d < nb && (&nb % &d) == BigUint::from(0u32));
                if let Some(i) = first_usable {
                    prop_assert!(st.forward_steps <= i, "stopped at {} after usable square at {i}", st.forward_steps);
                }
            }
            Err((_, _)) => prop_assert_eq!(first_usable, None),
        }
    }

    #[test]
    fn factors_are_exact(seed in any::<u64>(), bits in 6u64..22) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p, q) = nt::random_semiprime(bits, &mut rng);
        let r = squfof::squfof_factor(&n, &SqufofConfig::default()).unwrap();
        prop_assert_eq!(r.factors, (p, q));
    }

    #[test]
    fn bookkeeping_within_two_log_n(seed in any::<u64>(), bits in 14u64..26) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, _, _) = nt::random_semiprime(bits, &mut rng);
        let cfg = SqufofConfig { track_distance: true, ..SqufofConfig::default() };
        let (_, st) = squfof::squfof_factor_with_stats(&n, &cfg).unwrap();
        let ln_n = n.to_f64().unwrap().ln();
        for b in &st.bookkeeping {
            prop_assert!((b.predicted - b.observed).abs() <= 2.0 * ln_n, "{b:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn segment_pool_factors_exactly(seed in any::<u64>(), bits in 8u64..20, workers in 1usize..4, size in prop::option::of(2usize..8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p, q) = nt::random_semiprime(bits, &mut rng);
        let mut pool = WorkerPool::new(workers).unwrap();
        let cfg = ParallelConfig { size, ..ParallelConfig::default() };
        let r = pool.factor_segments(&n, &cfg).unwrap();
        prop_assert_eq!(r.report.factors, (p.clone(), q.clone()));
        let r = pool.factor_multipliers(&n, &[1, 3, 5], None).unwrap();
        prop_assert_eq!(r.report.factors, (p, q));
    }

    #[test]
    fn frames_round_trip(job in any::<u64>(), seq in any::<u64>(), n in any::<u128>(), k in 1u64..1000, max in prop::option::of(any::<u64>()), worker in any::<u32>(), reason in ".{0,40}") {
        let n = BigUint::from(n);
        let msgs = [
            WorkerMessage::Assign(Task::Multiplier(MultiplierTask { job, seq, n, multiplier: k, max_forward_steps: max.map(|m| m / 2) })),
            WorkerMessage::SegmentExhausted { worker, job, seq, reason: [StopReason::Exhausted, StopReason::Cancelled, StopReason::Wrapped][(k % 3) as usize], stats: WorkerStats { steps: seq, squares_tested: k, reverse_steps: job, bookkeeping: vec![] } },
            WorkerMessage::ProtocolError { worker, job, seq, reason },
            WorkerMessage::Shutdown { job: max.map(|m| m / 2) },
        ];
        for m in msgs {
            let f = encode_frame(&m);
            let (back, used) = decode_frame(&f).unwrap();
            prop_assert_eq!(used, f.len());
            prop_assert_eq!(encode_frame(&back), f);
        }
    }
}
