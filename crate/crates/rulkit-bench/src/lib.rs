//! Shared fixtures for the pipeline benchmarks.

use rulkit::dataset::{self, TrajectorySet};
use rulkit::synth::{self, SynthConfig};

/// A normalized synthetic training fleet sized like a small real subset.
pub fn training_fleet(engines: u32) -> TrajectorySet {
    let config = SynthConfig {
        train_engines: engines,
        test_engines: 1,
        min_cycles: 150,
        max_cycles: 250,
        ..SynthConfig::default()
    };
    let (train, test) = synth::generate_parsed(&config).expect("synthetic fleet");
    dataset::prepare(&train, &test).expect("preparation").train
}
