//! Criterion benchmarks for the receding-horizon solve live in `benches/`.
