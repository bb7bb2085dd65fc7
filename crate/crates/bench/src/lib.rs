//! Criterion benchmarks for the ES step, Monte Carlo estimation and the
//! sub-level-set oracles. Run with `cargo bench -p esconv-bench`.
