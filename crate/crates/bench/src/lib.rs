//! Criterion benchmarks for `lorenz-stab`; run with `cargo bench -p lorenz-stab-bench`.
