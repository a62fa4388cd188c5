//! Criterion benchmarks for the wayfinder gateway hot paths live under `benches/`.
