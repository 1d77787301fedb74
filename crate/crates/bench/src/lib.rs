//! Criterion benchmarks for the spatial-hom kernels; see `benches/kernels.rs`.
