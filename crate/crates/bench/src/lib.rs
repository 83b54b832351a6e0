//! Workspace member that carries the criterion benchmarks in `benches/`.
