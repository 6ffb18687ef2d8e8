//! Criterion benchmarks for the LP and capacity routines live under `benches/`.
