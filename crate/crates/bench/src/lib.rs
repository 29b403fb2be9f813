//! Criterion benchmarks for the roughnas kernels; see `benches/`.
