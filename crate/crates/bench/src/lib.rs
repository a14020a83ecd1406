//! Criterion benchmarks for `gadc-core`; see `benches/kernels.rs`.
