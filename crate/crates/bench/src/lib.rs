//! Criterion benchmarks for the dqlos kernels live in `benches/`.
