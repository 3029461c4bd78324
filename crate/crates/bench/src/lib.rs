//! Criterion benchmarks for the `regbl` kernels; see `benches/kernels.rs`.
