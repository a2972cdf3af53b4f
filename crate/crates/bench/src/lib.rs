//! Nothing but a home for the criterion benchmarks in `benches/`; see
//! `benches/processes.rs`.
