//! Benchmark-only crate; see `benches/pipeline.rs` for the harness.
