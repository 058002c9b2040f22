//! Remaining-useful-life estimation for turbofan engine fleets.
//!
//! The crate turns multivariate run-to-failure sensor logs into fixed-width
//! training windows, fits a small feed-forward regressor to predict how many
//! operating cycles an engine has left, and searches over the three data
//! shaping parameters (window length, stride, and the early-life RUL
//! plateau) with a differential evolution loop. An exhaustive sweep over the
//! same parameter lattice serves as a ground-truth check for the search.
//!
//! The pieces compose in dependency order:
//!
//! * [`dataset`] parses the 26-column trajectory text files, selects the 14
//!   informative sensor channels, and normalizes them with training-set
//!   statistics.
//! * [`windowing`] slices each engine history into strided windows and
//!   attaches piecewise-linear RUL labels.
//! * [`mlp`] is a from-scratch multilayer perceptron with elastic-net
//!   penalties, Adam or plain gradient descent, and text-format persistence.
//! * [`metrics`] scores predictions with RMSE and the asymmetric health
//!   score that penalizes late predictions harder than early ones.
//! * [`fitness`], [`de`], and [`grid`] evaluate candidate data parameters,
//!   search the lattice evolutionarily, and sweep it exhaustively.
//! * [`experiment`] and [`report`] run the end-to-end protocol and write
//!   reproducible artifacts.
//! * [`synth`] generates small synthetic fleets in the same file format so
//!   the pipeline can be exercised without the real dataset.
//!
//! Every random decision derives from a single master seed through
//! [`seeds::derive_seed`], so repeated runs produce byte-identical output.

pub mod config;
pub mod dataset;
pub mod de;
pub mod error;
pub mod experiment;
pub mod fitness;
pub mod grid;
pub mod metrics;
pub mod mlp;
pub mod report;
pub mod seeds;
pub mod synth;
pub mod windowing;

pub use config::{ExperimentConfig, ParamChoice};
pub use dataset::{
    NormalizationStats, PreparedSubset, SetKind, SubsetId, TrajectorySet, SELECTED_SENSORS,
};
pub use de::{DeConfig, DeResult, GenerationTrace, Mutation, SearchBounds, Strategy};
pub use error::{Error, Result};
pub use experiment::{
    compare_architectures, run_experiment, ArchScore, CompareConfig, ExperimentRun,
};
pub use fitness::{FitnessEvaluator, FitnessScores, FitnessStatus};
pub use grid::{GridPoint, GridSpec, SweepResult};
pub use metrics::{QuartileSummary, RhsVariant};
pub use mlp::{Activation, LayerSpec, MlpModel, OptimizerKind, TrainConfig, TrainOutcome};
pub use report::{EvalReport, ScoreStats};
pub use windowing::{DataParams, WindowedDataset};
