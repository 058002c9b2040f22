//! Strided time-window features with piecewise-linear RUL labels.
//!
//! A window of `n_w` consecutive cycles is flattened time-major into one
//! feature row of `s * n_w` values, where `s` is the sensor count. Successive
//! windows of an engine start `n_s` cycles apart. The label of a training
//! window is the RUL at the window's last cycle, capped at the plateau `r_e`:
//! engines are assumed healthy (constant RUL) until `r_e` cycles before
//! failure, then degrade linearly.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Engine, SetKind, TrajectorySet};
use crate::error::{Error, Result};

/// The three data-shaping parameters searched by the optimizer: window length
/// `n_w`, window stride `n_s`, and RUL plateau `r_e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataParams {
    pub n_w: u32,
    pub n_s: u32,
    pub r_e: u32,
}

impl DataParams {
    pub fn new(n_w: u32, n_s: u32, r_e: u32) -> DataParams {
        DataParams { n_w, n_s, r_e }
    }

    fn validate(&self) -> Result<()> {
        if self.n_w == 0 || self.n_s == 0 {
            return Err(Error::InvalidParams(format!(
                "window length and stride must be positive, got {self}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for DataParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n_w, self.n_s, self.r_e)
    }
}

impl FromStr for DataParams {
    type Err = Error;

    /// Parses `"24,1,129"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidParams(format!(
                "expected `n_w,n_s,r_e`, got `{s}`"
            )));
        }
        let mut values = [0u32; 3];
        for (k, part) in parts.iter().enumerate() {
            values[k] = part
                .parse()
                .map_err(|_| Error::InvalidParams(format!("`{part}` is not an integer")))?;
        }
        let params = DataParams::new(values[0], values[1], values[2]);
        params.validate()?;
        Ok(params)
    }
}

/// Number of strided windows that fit in an engine with `len` cycles.
pub fn window_count(len: usize, n_w: u32, n_s: u32) -> usize {
    let (n_w, n_s) = (n_w as usize, n_s as usize);
    if n_w == 0 || n_s == 0 || len < n_w {
        return 0;
    }
    (len - n_w) / n_s + 1
}

/// RUL at `cycle` for an engine failing at `failure_cycle`, under the
/// piecewise-linear model with plateau `r_e`.
pub fn piecewise_rul(failure_cycle: u32, cycle: u32, r_e: u32) -> Result<u32> {
    if cycle < 1 || cycle > failure_cycle {
        return Err(Error::CycleOutOfRange {
            cycle,
            failure_cycle,
        });
    }
    Ok(r_e.min(failure_cycle - cycle))
}

/// Flattened window features plus labels, the unit consumed by the regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// Feature columns per row: sensor count times `n_w`.
    pub width: usize,
    /// Row-major matrix, `rows() * width` values.
    pub features: Vec<f64>,
    /// One label per row: capped RUL at the window's last cycle for training
    /// windows, true RUL for test rows.
    pub labels: Vec<u32>,
    /// Engine id of each row.
    pub engine_index: Vec<u32>,
    /// Engines too short to produce any window and therefore absent from the
    /// rows above. Empty for test sets, which pad instead.
    pub skipped_engines: Vec<u32>,
}

impl WindowedDataset {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.features[index * self.width..(index + 1) * self.width]
    }

    /// Labels as `f64`, the form the regressor trains against.
    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }

    /// Writes the rows as CSV with header `f0,..,f{width-1},label,engine_id`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for c in 0..self.width {
            write!(out, "f{c},")?;
        }
        writeln!(out, "label,engine_id")?;
        for i in 0..self.rows() {
            for value in self.row(i) {
                write!(out, "{value},")?;
            }
            writeln!(out, "{},{}", self.labels[i], self.engine_index[i])?;
        }
        Ok(())
    }
}

fn flatten_window(engine: &Engine, start: usize, n_w: usize, out: &mut Vec<f64>) {
    for record in &engine.records[start..start + n_w] {
        out.extend_from_slice(&record.sensors);
    }
}

/// Builds training rows: every strided window of every engine, labelled by
/// the capped RUL at the window's last cycle. Engines shorter than `n_w` are
/// recorded in `skipped_engines` and contribute no rows.
pub fn build_training_windows(set: &TrajectorySet, params: &DataParams) -> Result<WindowedDataset> {
    if set.kind != SetKind::Train {
        return Err(Error::WrongKind {
            expected: "train",
            got: "test",
        });
    }
    params.validate()?;

    let sensors = set.sensor_count();
    let n_w = params.n_w as usize;
    let n_s = params.n_s as usize;
    let width = sensors * n_w;

    let total_rows: usize = set
        .engines
        .iter()
        .map(|e| window_count(e.len(), params.n_w, params.n_s))
        .sum();

    let mut features = Vec::with_capacity(total_rows * width);
    let mut labels = Vec::with_capacity(total_rows);
    let mut engine_index = Vec::with_capacity(total_rows);
    let mut skipped_engines = Vec::new();

    for engine in &set.engines {
        let count = window_count(engine.len(), params.n_w, params.n_s);
        if count == 0 {
            skipped_engines.push(engine.id);
            continue;
        }
        let failure_cycle = engine.len() as u32;
        for w in 0..count {
            let start = w * n_s;
            flatten_window(engine, start, n_w, &mut features);
            let end_cycle = (start + n_w) as u32;
            labels.push(piecewise_rul(failure_cycle, end_cycle, params.r_e)?);
            engine_index.push(engine.id);
        }
    }

    Ok(WindowedDataset {
        width,
        features,
        labels,
        engine_index,
        skipped_engines,
    })
}

/// Builds one row per test engine from its last `n_w` recorded cycles,
/// labelled with the engine's true RUL. Engines with fewer than `n_w` cycles
/// are left-padded by repeating their first record. With `cap_to_plateau`,
/// labels are capped at `r_e` like training labels.
pub fn build_test_features(
    set: &TrajectorySet,
    params: &DataParams,
    cap_to_plateau: bool,
) -> Result<WindowedDataset> {
    if set.kind != SetKind::Test {
        return Err(Error::WrongKind {
            expected: "test",
            got: "train",
        });
    }
    params.validate()?;
    let true_rul = set.true_rul.as_ref().ok_or(Error::MissingTrueRul)?;

    let sensors = set.sensor_count();
    let n_w = params.n_w as usize;
    let width = sensors * n_w;

    let mut features = Vec::with_capacity(set.engine_count() * width);
    let mut labels = Vec::with_capacity(set.engine_count());
    let mut engine_index = Vec::with_capacity(set.engine_count());

    for (engine, &rul) in set.engines.iter().zip(true_rul) {
        let len = engine.len();
        if len >= n_w {
            flatten_window(engine, len - n_w, n_w, &mut features);
        } else {
            for _ in 0..n_w - len {
                features.extend_from_slice(&engine.records[0].sensors);
            }
            flatten_window(engine, 0, len, &mut features);
        }
        labels.push(if cap_to_plateau {
            rul.min(params.r_e)
        } else {
            rul
        });
        engine_index.push(engine.id);
    }

    Ok(WindowedDataset {
        width,
        features,
        labels,
        engine_index,
        skipped_engines: Vec::new(),
    })
}
