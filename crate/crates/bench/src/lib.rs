//! Criterion benchmarks for the solvers; run with `cargo bench -p aggdiff-bench`.
