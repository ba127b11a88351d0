//! Criterion benchmarks for the SQUFOF toolkit live in `benches/`; run them with `cargo bench -p squfof-bench`.
