//! Benchmarks live in `benches/`; run them with `cargo bench -p hartley3d-bench`.
