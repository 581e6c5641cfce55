//! Criterion benchmarks for the hot paths of `pulearn`; see `benches/`.
