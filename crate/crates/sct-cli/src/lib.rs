//! Harness around the core library: synthetic data, training runs,
//! evaluation, compute accounting, throughput benchmarks, and spectrum
//! reports. The `sct` binary is a thin CLI over these functions.

pub mod bench;
pub mod config;
pub mod dataset;
pub mod evalrun;
pub mod macs;
pub mod model_io;
pub mod spectrum;
pub mod synth;
pub mod trainer;
