//! Criterion benchmarks for the hot paths of `hom-core`. See `benches/`.
