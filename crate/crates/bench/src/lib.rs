//! Criterion benchmarks for proca-core live under `benches/`.
