//! Criterion benchmarks for the permuton simulators; see `benches/`.
