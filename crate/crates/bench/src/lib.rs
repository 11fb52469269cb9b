//! Criterion benchmarks for the correction pipeline live in `benches/`.
