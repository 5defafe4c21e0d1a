//! Shared setup helpers for the criterion benchmarks.
