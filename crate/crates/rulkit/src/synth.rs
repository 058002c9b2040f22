//! Synthetic run-to-failure data in the C-MAPSS text format.
//!
//! Each engine degrades along a noisy exponential toward failure, so the
//! selected sensor channels carry a learnable RUL signal while the seven
//! unselected channels stay constant, mirroring the structure of the real
//! dataset. The generator exists so that the full pipeline, including the
//! parser, can run without the published data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{self, SubsetId, RAW_SENSOR_COUNT, SELECTED_SENSORS};
use crate::error::Result;
use crate::seeds::rng_for;

/// Shape of a generated subset.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub subset: SubsetId,
    pub train_engines: u32,
    pub test_engines: u32,
    /// Inclusive bounds on the failure time of each generated engine.
    pub min_cycles: u32,
    pub max_cycles: u32,
    /// Sensor noise, as a fraction of each channel's degradation amplitude.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subset: SubsetId::FD001,
            train_engines: 20,
            test_engines: 10,
            min_cycles: 120,
            max_cycles: 300,
            noise: 0.01,
            seed: 7,
        }
    }
}

/// Generated file contents, ready to write or parse directly.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub train_text: String,
    pub test_text: String,
    pub rul_text: String,
}

fn channel_base(sensor: usize) -> f64 {
    500.0 + 13.0 * sensor as f64
}

fn channel_amplitude(sensor: usize) -> f64 {
    let sign = if sensor.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * (5.0 + 0.3 * sensor as f64)
}

fn channel_timescale(sensor: usize) -> f64 {
    30.0 + 3.0 * sensor as f64
}

fn is_selected(sensor: usize) -> bool {
    SELECTED_SENSORS.contains(&sensor)
}

/// Sensor value of channel `sensor` (1-based) at `cycles_left` cycles before
/// failure, before noise.
fn degradation_signal(sensor: usize, cycles_left: u32) -> f64 {
    let base = channel_base(sensor);
    if !is_selected(sensor) {
        return base;
    }
    base + channel_amplitude(sensor) * (-(cycles_left as f64) / channel_timescale(sensor)).exp()
}

fn write_engine<R: Rng>(
    out: &mut String,
    engine_id: u32,
    failure_cycle: u32,
    last_cycle: u32,
    noise: f64,
    rng: &mut R,
) {
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    for cycle in 1..=last_cycle {
        let cycles_left = failure_cycle - cycle;
        let op1: f64 = rng.gen_range(-0.002..0.002);
        let op2: f64 = rng.gen_range(-0.0004..0.0004);
        write!(out, "{engine_id} {cycle} {op1:.4} {op2:.4} 100.0").unwrap();
        for sensor in 1..=RAW_SENSOR_COUNT {
            let mut value = degradation_signal(sensor, cycles_left);
            if is_selected(sensor) {
                value += noise * channel_amplitude(sensor).abs() * gauss.sample(rng);
            }
            write!(out, " {value:.4}").unwrap();
        }
        out.push('\n');
    }
}

/// Generates one synthetic subset. Deterministic in the config.
pub fn generate(config: &SynthConfig) -> SynthData {
    assert!(config.min_cycles >= 2, "engines need at least two cycles");
    assert!(config.min_cycles <= config.max_cycles);

    let mut train_text = String::new();
    let mut rng = rng_for(config.seed, "synth-train", config.subset.index() as u64);
    for engine_id in 1..=config.train_engines {
        let failure = rng.gen_range(config.min_cycles..=config.max_cycles);
        write_engine(
            &mut train_text,
            engine_id,
            failure,
            failure,
            config.noise,
            &mut rng,
        );
    }

    let mut test_text = String::new();
    let mut rul_text = String::new();
    let mut rng = rng_for(config.seed, "synth-test", config.subset.index() as u64);
    for engine_id in 1..=config.test_engines {
        let failure = rng.gen_range(config.min_cycles..=config.max_cycles);
        // Truncate somewhere in the middle of life so the true RUL spans a
        // useful range.
        let last = rng.gen_range(failure / 3..=failure - 1).max(1);
        write_engine(
            &mut test_text,
            engine_id,
            failure,
            last,
            config.noise,
            &mut rng,
        );
        let _ = writeln!(rul_text, "{}", failure - last);
    }

    SynthData {
        train_text,
        test_text,
        rul_text,
    }
}

/// Generates a subset and writes the three files into `dir` using the
/// standard naming convention. Returns the written paths.
pub fn write_files(config: &SynthConfig, dir: &Path) -> Result<[PathBuf; 3]> {
    let data = generate(config);
    fs::create_dir_all(dir)?;
    let train = dir.join(format!("train_{}.txt", config.subset));
    let test = dir.join(format!("test_{}.txt", config.subset));
    let rul = dir.join(format!("RUL_{}.txt", config.subset));
    fs::write(&train, data.train_text)?;
    fs::write(&test, data.test_text)?;
    fs::write(&rul, data.rul_text)?;
    Ok([train, test, rul])
}

/// Generates and parses a subset in memory, returning prepared train/test
/// sets without touching the filesystem.
pub fn generate_parsed(
    config: &SynthConfig,
) -> Result<(dataset::TrajectorySet, dataset::TrajectorySet)> {
    let data = generate(config);
    let train = dataset::parse_trajectories(
        std::io::Cursor::new(data.train_text),
        dataset::SetKind::Train,
        config.subset,
    )?;
    let mut test = dataset::parse_trajectories(
        std::io::Cursor::new(data.test_text),
        dataset::SetKind::Test,
        config.subset,
    )?;
    test.attach_true_rul(dataset::parse_rul_values(std::io::Cursor::new(
        data.rul_text,
    ))?)?;
    Ok((train, test))
}
