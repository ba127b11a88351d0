use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use num_bigint::{BigInt, BigUint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use squfof_core::contfrac::{self, Convention};
use squfof_core::infra;
use squfof_core::nt;
use squfof_core::parallel::{ParallelConfig, WorkerPool};
use squfof_core::qforms::{Discriminant, QuadForm};
use squfof_core::squfof::{self, SqufofConfig};

fn semiprimes(prime_bits: u64, count: usize, seed: u64) -> Vec<BigUint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| nt::random_semiprime(prime_bits, &mut rng).0).collect()
}

fn expansion(c: &mut Criterion) {
    let n = BigUint::from(0xB5E6_2D3A_91F7u64);
    let mut g = c.benchmark_group("cf_1000_steps");
    g.bench_function("i64", |b| {
        b.iter(|| {
            let mut s = contfrac::init_expansion::<i64>(&n, Convention::Standard).unwrap();
            for _ in 0..1000 {
                s.advance();
            }
            black_box(s.index())
        })
    });
    g.bench_function("bigint", |b| {
        b.iter(|| {
            let mut s = contfrac::init_expansion::<BigInt>(&n, Convention::Standard).unwrap();
            for _ in 0..1000 {
                s.advance();
            }
            black_box(s.index())
        })
    });
    g.finish();
}

fn forms(c: &mut Criterion) {
    let n = semiprimes(32, 1, 3).remove(0);
    let disc = Discriminant::new(BigInt::from(n * 4u32)).unwrap();
    let f = QuadForm::principal(&disc).rho().unwrap().rho().unwrap().rho().unwrap();
    let g = f.rho().unwrap().rho().unwrap();
    c.bench_function("compose_reduce_64bit", |b| b.iter(|| black_box(f.compose_reduce(&g).unwrap())));
}

fn serial(c: &mut Criterion) {
    let mut g = c.benchmark_group("squfof_serial");
    g.sample_size(20);
    for bits in [20u64, 24, 28] {
        let ns = semiprimes(bits, 16, bits);
        g.bench_with_input(BenchmarkId::from_parameter(2 * bits), &ns, |b, ns| {
            b.iter(|| {
                for n in ns {
                    black_box(squfof::squfof_factor(n, &SqufofConfig::default()).unwrap());
                }
            })
        });
    }
    g.finish();
}

fn bsgs(c: &mut Criterion) {
    let ns: Vec<BigUint> = semiprimes(20, 16, 9);
    let mut g = c.benchmark_group("bsgs");
    g.sample_size(10);
    g.bench_function("40bit", |b| {
        b.iter(|| {
            for n in &ns {
                let _ = black_box(infra::bsgs_factor_escalating(n, &infra::BSGS_MULTIPLIERS));
            }
        })
    });
    g.finish();
}

fn parallel(c: &mut Criterion) {
    let ns = semiprimes(24, 16, 11);
    let mut g = c.benchmark_group("parallel_48bit");
    g.sample_size(10);
    for w in [1usize, 2, 4] {
        let mut pool = WorkerPool::new(w).unwrap();
        g.bench_with_input(BenchmarkId::new("segments", w), &ns, |b, ns| {
            b.iter(|| {
                for n in ns {
                    black_box(pool.factor_segments(n, &ParallelConfig::default()).unwrap());
                }
            })
        });
        g.bench_with_input(BenchmarkId::new("multipliers", w), &ns, |b, ns| {
            b.iter(|| {
                for n in ns {
                    black_box(pool.factor_multipliers(n, &[1, 3, 5, 7, 11], None).unwrap());
                }
            })
        });
    }
    g.finish();
}

criterion_group!(benches, expansion, forms, serial, bsgs, parallel);
criterion_main!(benches);
