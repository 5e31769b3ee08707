//! Benchmarks for the simulation kernels; see `benches/`.
