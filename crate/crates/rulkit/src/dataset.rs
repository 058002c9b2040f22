//! C-MAPSS turbofan degradation data: parsing, validation, sensor selection,
//! and min-max normalization.
//!
//! The on-disk format is whitespace-separated text with 26 columns per row:
//! engine id, cycle, three operational settings, and 21 sensor channels.
//! Training trajectories run to failure; test trajectories stop early and a
//! companion file lists the true remaining useful life (RUL) of each test
//! engine at its final recorded cycle.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns per data row: engine id, cycle, 3 op settings, 21 sensors.
pub const RAW_COLUMNS: usize = 26;

/// Sensor channels in a raw (unselected) trajectory set.
pub const RAW_SENSOR_COUNT: usize = 21;

/// 1-based indices of the sensor channels kept for regression. The remaining
/// seven channels are constant or near-constant over every trajectory and
/// carry no degradation signal.
pub const SELECTED_SENSORS: [usize; 14] = [2, 3, 4, 7, 8, 9, 11, 12, 13, 14, 15, 17, 20, 21];

/// Engine counts per subset in the published dataset, train and test.
pub const EXPECTED_TRAIN_ENGINES: [usize; 4] = [100, 260, 100, 248];
pub const EXPECTED_TEST_ENGINES: [usize; 4] = [100, 259, 100, 248];

/// One of the four C-MAPSS subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubsetId {
    FD001,
    FD002,
    FD003,
    FD004,
}

impl SubsetId {
    pub const ALL: [SubsetId; 4] = [
        SubsetId::FD001,
        SubsetId::FD002,
        SubsetId::FD003,
        SubsetId::FD004,
    ];

    /// Zero-based position, usable as an index into per-subset tables.
    pub fn index(self) -> usize {
        match self {
            SubsetId::FD001 => 0,
            SubsetId::FD002 => 1,
            SubsetId::FD003 => 2,
            SubsetId::FD004 => 3,
        }
    }

    /// Upper bound on the window length `n_w` for this subset. The bound is
    /// capped by the shortest test trajectory so that every test engine can
    /// supply at least one full window without padding in the common case.
    pub fn window_bound(self) -> u32 {
        [30, 20, 30, 18][self.index()]
    }

    /// Subset whose optimized data parameters this subset reuses. The fault
    /// modes of FD003/FD004 extend FD001/FD002 under the same operating
    /// conditions, so the cheaper subset's search result transfers.
    pub fn optimization_proxy(self) -> SubsetId {
        match self {
            SubsetId::FD003 => SubsetId::FD001,
            SubsetId::FD004 => SubsetId::FD002,
            other => other,
        }
    }
}

impl fmt::Display for SubsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SubsetId::FD001 => "FD001",
            SubsetId::FD002 => "FD002",
            SubsetId::FD003 => "FD003",
            SubsetId::FD004 => "FD004",
        };
        f.write_str(name)
    }
}

impl FromStr for SubsetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FD001" => Ok(SubsetId::FD001),
            "FD002" => Ok(SubsetId::FD002),
            "FD003" => Ok(SubsetId::FD003),
            "FD004" => Ok(SubsetId::FD004),
            _ => Err(Error::UnknownSubset(s.to_string())),
        }
    }
}

/// Whether a trajectory set runs to failure (train) or is truncated (test).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetKind {
    Train,
    Test,
}

impl SetKind {
    fn name(self) -> &'static str {
        match self {
            SetKind::Train => "train",
            SetKind::Test => "test",
        }
    }
}

/// One observed cycle of one engine.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub engine_id: u32,
    pub cycle: u32,
    pub op_settings: [f64; 3],
    pub sensors: Vec<f64>,
}

/// All recorded cycles of one engine, ordered by cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    pub id: u32,
    pub records: Vec<RawRecord>,
}

impl Engine {
    /// Number of recorded cycles. For a training engine this is the failure
    /// cycle.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// A parsed trajectory set. Engines appear in file order; records within an
/// engine are sorted by cycle and validated to be exactly `1..=T`.
#[derive(Debug, Clone)]
pub struct TrajectorySet {
    pub kind: SetKind,
    pub subset: SubsetId,
    pub engines: Vec<Engine>,
    /// True RUL at the last recorded cycle of each test engine, in engine
    /// order. `None` for training sets and for test sets before
    /// [`TrajectorySet::attach_true_rul`] is called.
    pub true_rul: Option<Vec<u32>>,
}

impl TrajectorySet {
    pub fn engine_count(&self) -> usize {
        self.engines.len()
    }

    pub fn total_cycles(&self) -> usize {
        self.engines.iter().map(Engine::len).sum()
    }

    /// Sensor channels per record (21 raw, 14 after selection).
    pub fn sensor_count(&self) -> usize {
        self.engines[0].records[0].sensors.len()
    }

    /// Attaches the companion RUL values to a test set.
    pub fn attach_true_rul(&mut self, values: Vec<u32>) -> Result<()> {
        if self.kind != SetKind::Test {
            return Err(Error::WrongKind {
                expected: "test",
                got: self.kind.name(),
            });
        }
        if values.len() != self.engines.len() {
            return Err(Error::RulCountMismatch {
                engines: self.engines.len(),
                entries: values.len(),
            });
        }
        self.true_rul = Some(values);
        Ok(())
    }

    fn require_kind(&self, expected: SetKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::WrongKind {
                expected: expected.name(),
                got: self.kind.name(),
            });
        }
        Ok(())
    }
}

fn parse_positive_index(token: &str, line: usize) -> Result<u32> {
    let value: f64 = token.parse().map_err(|_| Error::NumberParse {
        line,
        token: token.to_string(),
    })?;
    if !value.is_finite() || value.fract() != 0.0 || value < 1.0 || value > f64::from(u32::MAX) {
        return Err(Error::IndexParse {
            line,
            token: token.to_string(),
        });
    }
    Ok(value as u32)
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    let value: f64 = token.parse().map_err(|_| Error::NumberParse {
        line,
        token: token.to_string(),
    })?;
    if !value.is_finite() {
        return Err(Error::NumberParse {
            line,
            token: token.to_string(),
        });
    }
    Ok(value)
}

/// Parses a 26-column trajectory file. Rows may arrive out of order; they are
/// grouped by engine id (keeping first-appearance engine order) and sorted by
/// cycle. Gaps or duplicates in an engine's cycle sequence are rejected.
pub fn parse_trajectories<R: BufRead>(
    reader: R,
    kind: SetKind,
    subset: SubsetId,
) -> Result<TrajectorySet> {
    let mut order: Vec<u32> = Vec::new();
    let mut by_engine: HashMap<u32, Vec<RawRecord>> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != RAW_COLUMNS {
            return Err(Error::RowWidth {
                line: line_no,
                expected: RAW_COLUMNS,
                found: tokens.len(),
            });
        }
        let engine_id = parse_positive_index(tokens[0], line_no)?;
        let cycle = parse_positive_index(tokens[1], line_no)?;
        let mut op_settings = [0.0; 3];
        for (k, token) in tokens[2..5].iter().enumerate() {
            op_settings[k] = parse_number(token, line_no)?;
        }
        let sensors = tokens[5..]
            .iter()
            .map(|token| parse_number(token, line_no))
            .collect::<Result<Vec<f64>>>()?;

        let records = by_engine.entry(engine_id).or_insert_with(|| {
            order.push(engine_id);
            Vec::new()
        });
        records.push(RawRecord {
            engine_id,
            cycle,
            op_settings,
            sensors,
        });
    }

    if order.is_empty() {
        return Err(Error::EmptySet);
    }

    let mut engines = Vec::with_capacity(order.len());
    for id in order {
        let mut records = by_engine.remove(&id).expect("grouped above");
        records.sort_by_key(|r| r.cycle);
        for (position, record) in records.iter().enumerate() {
            let expected = position as u32 + 1;
            if record.cycle != expected {
                return Err(Error::CycleSequence {
                    engine: id,
                    found: record.cycle,
                    position: position + 1,
                });
            }
        }
        engines.push(Engine { id, records });
    }

    Ok(TrajectorySet {
        kind,
        subset,
        engines,
        true_rul: None,
    })
}

/// Parses a companion RUL file: one non-negative integer per line.
pub fn parse_rul_values<R: BufRead>(reader: R) -> Result<Vec<u32>> {
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let value: f64 = token.parse().map_err(|_| Error::NumberParse {
            line: line_no,
            token: token.to_string(),
        })?;
        if !value.is_finite() || value.fract() != 0.0 || value < 0.0 || value > f64::from(u32::MAX)
        {
            return Err(Error::IndexParse {
                line: line_no,
                token: token.to_string(),
            });
        }
        values.push(value as u32);
    }
    Ok(values)
}

/// Projects a 21-sensor set down to the 14 channels in [`SELECTED_SENSORS`].
pub fn select_sensors(set: &TrajectorySet) -> TrajectorySet {
    assert_eq!(
        set.sensor_count(),
        RAW_SENSOR_COUNT,
        "sensor selection expects a raw 21-channel set"
    );
    let engines = set
        .engines
        .iter()
        .map(|engine| Engine {
            id: engine.id,
            records: engine
                .records
                .iter()
                .map(|r| RawRecord {
                    engine_id: r.engine_id,
                    cycle: r.cycle,
                    op_settings: r.op_settings,
                    sensors: SELECTED_SENSORS.iter().map(|&s| r.sensors[s - 1]).collect(),
                })
                .collect(),
        })
        .collect();
    TrajectorySet {
        kind: set.kind,
        subset: set.subset,
        engines,
        true_rul: set.true_rul.clone(),
    }
}

/// Per-channel min/max fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationStats {
    pub fn channel_count(&self) -> usize {
        self.mins.len()
    }

    /// Maps a raw value to `[-1, 1]` by the fitted range of channel `i`.
    /// Channels that were constant in training map to 0.
    pub fn normalize(&self, value: f64, channel: usize) -> f64 {
        let (min, max) = (self.mins[channel], self.maxs[channel]);
        if max == min {
            0.0
        } else {
            2.0 * (value - min) / (max - min) - 1.0
        }
    }
}

/// Fits per-channel min/max over every record of a training set.
pub fn fit_normalization(train: &TrajectorySet) -> Result<NormalizationStats> {
    train.require_kind(SetKind::Train)?;
    let channels = train.sensor_count();
    let mut mins = vec![f64::INFINITY; channels];
    let mut maxs = vec![f64::NEG_INFINITY; channels];
    for engine in &train.engines {
        for record in &engine.records {
            for (c, &v) in record.sensors.iter().enumerate() {
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
    }
    Ok(NormalizationStats { mins, maxs })
}

/// Applies fitted normalization to every sensor value of a set. Test sets are
/// normalized with training statistics, so values outside the fitted range
/// may fall outside `[-1, 1]`; they are not clipped.
pub fn apply_normalization(set: &TrajectorySet, stats: &NormalizationStats) -> TrajectorySet {
    assert_eq!(
        set.sensor_count(),
        stats.channel_count(),
        "normalization stats were fitted on a different channel layout"
    );
    let engines = set
        .engines
        .iter()
        .map(|engine| Engine {
            id: engine.id,
            records: engine
                .records
                .iter()
                .map(|r| RawRecord {
                    engine_id: r.engine_id,
                    cycle: r.cycle,
                    op_settings: r.op_settings,
                    sensors: r
                        .sensors
                        .iter()
                        .enumerate()
                        .map(|(c, &v)| stats.normalize(v, c))
                        .collect(),
                })
                .collect(),
        })
        .collect();
    TrajectorySet {
        kind: set.kind,
        subset: set.subset,
        engines,
        true_rul: set.true_rul.clone(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Loads the raw train and test sets of a subset from a directory laid out as
/// `train_FD00x.txt`, `test_FD00x.txt`, `RUL_FD00x.txt`.
pub fn load_subset(data_dir: &Path, subset: SubsetId) -> Result<(TrajectorySet, TrajectorySet)> {
    let train_path = data_dir.join(format!("train_{subset}.txt"));
    let test_path = data_dir.join(format!("test_{subset}.txt"));
    let rul_path = data_dir.join(format!("RUL_{subset}.txt"));

    let train = parse_trajectories(open(&train_path)?, SetKind::Train, subset)?;
    let mut test = parse_trajectories(open(&test_path)?, SetKind::Test, subset)?;
    let rul_values = parse_rul_values(open(&rul_path)?)?;
    test.attach_true_rul(rul_values)?;
    Ok((train, test))
}

/// A subset ready for windowing: sensors selected and normalized, with the
/// fitted statistics kept for reference.
#[derive(Debug, Clone)]
pub struct PreparedSubset {
    pub train: TrajectorySet,
    pub test: TrajectorySet,
    pub stats: NormalizationStats,
}

/// Loads a subset and runs the full preparation pipeline: sensor selection,
/// normalization fitted on train only, applied to train and test.
pub fn load_and_prepare(data_dir: &Path, subset: SubsetId) -> Result<PreparedSubset> {
    let (train, test) = load_subset(data_dir, subset)?;
    prepare(&train, &test)
}

/// Runs sensor selection and normalization on already-parsed raw sets.
pub fn prepare(train: &TrajectorySet, test: &TrajectorySet) -> Result<PreparedSubset> {
    let train_sel = select_sensors(train);
    let test_sel = select_sensors(test);
    let stats = fit_normalization(&train_sel)?;
    Ok(PreparedSubset {
        train: apply_normalization(&train_sel, &stats),
        test: apply_normalization(&test_sel, &stats),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn row(engine: u32, cycle: u32, fill: f64) -> String {
        let mut cols = vec![engine.to_string(), cycle.to_string()];
        cols.extend((0..3).map(|k| format!("{:.4}", fill + k as f64)));
        cols.extend((0..21).map(|s| format!("{:.4}", fill * 10.0 + s as f64)));
        cols.join(" ")
    }

    fn parse(text: &str, kind: SetKind) -> Result<TrajectorySet> {
        parse_trajectories(Cursor::new(text), kind, SubsetId::FD001)
    }

    #[test]
    fn single_engine_single_row() {
        let mut cols = vec!["1".to_string(), "1".to_string()];
        cols.extend(std::iter::repeat_n("0".to_string(), 24));
        let set = parse(&cols.join(" "), SetKind::Train).unwrap();
        assert_eq!(set.engine_count(), 1);
        assert_eq!(set.engines[0].len(), 1);
        assert_eq!(set.engines[0].records[0].sensors, vec![0.0; 21]);
    }

    #[test]
    fn engines_keep_first_appearance_order_and_rows_sort_by_cycle() {
        let text = [
            row(2, 1, 0.5),
            row(1, 2, 0.1),
            row(1, 1, 0.2),
            row(2, 2, 0.3),
        ]
        .join("\n");
        let set = parse(&text, SetKind::Train).unwrap();
        assert_eq!(set.engines[0].id, 2);
        assert_eq!(set.engines[1].id, 1);
        let cycles: Vec<u32> = set.engines[1].records.iter().map(|r| r.cycle).collect();
        assert_eq!(cycles, vec![1, 2]);
    }

    #[test]
    fn short_row_is_rejected_with_line_number() {
        let text = format!("{}\n1 2 0 0 0", row(1, 1, 0.0));
        let err = parse(&text, SetKind::Train).unwrap_err();
        match err {
            Error::RowWidth {
                line,
                expected,
                found,
            } => {
                assert_eq!(line, 2);
                assert_eq!(expected, 26);
                assert_eq!(found, 5);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn cycle_gap_is_rejected() {
        let text = [row(1, 1, 0.0), row(1, 3, 0.0)].join("\n");
        let err = parse(&text, SetKind::Train).unwrap_err();
        match err {
            Error::CycleSequence {
                engine,
                found,
                position,
            } => {
                assert_eq!(engine, 1);
                assert_eq!(found, 3);
                assert_eq!(position, 2);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_cycle_is_rejected() {
        let text = [row(1, 1, 0.0), row(1, 1, 0.5)].join("\n");
        assert!(matches!(
            parse(&text, SetKind::Train),
            Err(Error::CycleSequence { .. })
        ));
    }

    #[test]
    fn bad_token_is_rejected_with_line_number() {
        let mut second = row(1, 2, 0.0);
        second = second.replace("0.0000", "zero");
        let text = [row(1, 1, 0.0), second].join("\n");
        let err = parse(&text, SetKind::Train).unwrap_err();
        match err {
            Error::NumberParse { line, token } => {
                assert_eq!(line, 2);
                assert_eq!(token, "zero");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn blank_lines_are_skipped() {
        let text = format!("\n{}\n\n{}\n", row(1, 1, 0.0), row(1, 2, 0.0));
        let set = parse(&text, SetKind::Train).unwrap();
        assert_eq!(set.engines[0].len(), 2);
    }

    #[test]
    fn rul_attachment_requires_matching_count() {
        let text = [row(1, 1, 0.0), row(2, 1, 0.0)].join("\n");
        let mut set = parse(&text, SetKind::Test).unwrap();
        let err = set.attach_true_rul(vec![10]).unwrap_err();
        assert!(matches!(
            err,
            Error::RulCountMismatch {
                engines: 2,
                entries: 1
            }
        ));
        set.attach_true_rul(vec![10, 20]).unwrap();
        assert_eq!(set.true_rul.as_deref(), Some(&[10, 20][..]));
    }

    #[test]
    fn rul_attachment_rejects_train_sets() {
        let mut set = parse(&row(1, 1, 0.0), SetKind::Train).unwrap();
        assert!(matches!(
            set.attach_true_rul(vec![5]),
            Err(Error::WrongKind {
                expected: "test",
                ..
            })
        ));
    }

    #[test]
    fn rul_file_parses_integers() {
        let values = parse_rul_values(Cursor::new("112\n98\n\n0\n")).unwrap();
        assert_eq!(values, vec![112, 98, 0]);
        assert!(parse_rul_values(Cursor::new("7.5\n")).is_err());
    }

    #[test]
    fn sensor_selection_keeps_fourteen_channels_in_order() {
        let set = parse(&row(1, 1, 0.3), SetKind::Train).unwrap();
        let selected = select_sensors(&set);
        assert_eq!(selected.sensor_count(), 14);
        let raw = &set.engines[0].records[0].sensors;
        let kept = &selected.engines[0].records[0].sensors;
        for (k, &s) in SELECTED_SENSORS.iter().enumerate() {
            assert_eq!(kept[k], raw[s - 1]);
        }
    }

    #[test]
    fn normalization_maps_training_range_to_unit_interval() {
        let text = [row(1, 1, 0.0), row(1, 2, 1.0), row(1, 3, 2.0)].join("\n");
        let set = select_sensors(&parse(&text, SetKind::Train).unwrap());
        let stats = fit_normalization(&set).unwrap();
        let normalized = apply_normalization(&set, &stats);
        for c in 0..normalized.sensor_count() {
            let values: Vec<f64> = normalized.engines[0]
                .records
                .iter()
                .map(|r| r.sensors[c])
                .collect();
            assert_eq!(values[0], -1.0);
            assert!((values[1] - 0.0).abs() < 1e-12);
            assert_eq!(values[2], 1.0);
        }
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let text = [row(1, 1, 0.5), row(1, 2, 0.5)].join("\n");
        let set = select_sensors(&parse(&text, SetKind::Train).unwrap());
        let stats = fit_normalization(&set).unwrap();
        let normalized = apply_normalization(&set, &stats);
        for record in &normalized.engines[0].records {
            assert!(record.sensors.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn test_values_outside_training_range_exceed_unit_interval() {
        let train_text = [row(1, 1, 0.0), row(1, 2, 1.0)].join("\n");
        let train = select_sensors(&parse(&train_text, SetKind::Train).unwrap());
        let stats = fit_normalization(&train).unwrap();
        let test = select_sensors(&parse(&row(1, 1, 2.0), SetKind::Test).unwrap());
        let normalized = apply_normalization(&test, &stats);
        assert!(normalized.engines[0].records[0]
            .sensors
            .iter()
            .any(|&v| v > 1.0));
    }

    #[test]
    fn normalization_requires_training_kind() {
        let set = parse(&row(1, 1, 0.0), SetKind::Test).unwrap();
        assert!(matches!(
            fit_normalization(&set),
            Err(Error::WrongKind {
                expected: "train",
                ..
            })
        ));
    }

    #[test]
    fn subset_names_round_trip() {
        for subset in SubsetId::ALL {
            assert_eq!(subset.to_string().parse::<SubsetId>().unwrap(), subset);
        }
        assert_eq!("fd002".parse::<SubsetId>().unwrap(), SubsetId::FD002);
        assert!(matches!(
            "FD005".parse::<SubsetId>(),
            Err(Error::UnknownSubset(_))
        ));
    }

    #[test]
    fn window_bounds_match_shortest_test_trajectories() {
        let bounds: Vec<u32> = SubsetId::ALL.iter().map(|s| s.window_bound()).collect();
        assert_eq!(bounds, vec![30, 20, 30, 18]);
    }

    #[test]
    fn optimization_proxy_pairs_subsets_by_operating_conditions() {
        assert_eq!(SubsetId::FD001.optimization_proxy(), SubsetId::FD001);
        assert_eq!(SubsetId::FD003.optimization_proxy(), SubsetId::FD001);
        assert_eq!(SubsetId::FD004.optimization_proxy(), SubsetId::FD002);
    }
}
