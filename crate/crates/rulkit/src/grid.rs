//! Exhaustive sweep over the data-parameter grid.
//!
//! The full grid is the oracle the evolutionary search is judged against: it
//! scores every lattice point and reports the exact argmin and argmax. At
//! standard bounds that is thousands of short training runs, so the sweep is
//! parallel and the grid can be coarsened for quicker surveys.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SubsetId;
use crate::error::{Error, Result};
use crate::fitness::{FitnessScores, FitnessStatus};
use crate::windowing::DataParams;

/// Inclusive ranges of the sweep, with an optional step on the RUL plateau
/// for coarse surveys. The window length starts at 15 rather than 1: shorter
/// windows are never competitive and pruning them keeps the grid tractable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_w: (u32, u32),
    pub n_s: (u32, u32),
    pub r_e: (u32, u32),
    pub r_e_step: u32,
}

impl GridSpec {
    /// The standard grid for a subset: `n_w` from 15 to the subset bound,
    /// `n_s` 1..=10, `r_e` 90..=140.
    pub fn standard(subset: SubsetId) -> GridSpec {
        GridSpec {
            n_w: (15, subset.window_bound()),
            n_s: (1, 10),
            r_e: (90, 140),
            r_e_step: 1,
        }
    }

    /// A coarsened grid stepping the plateau by 10, for surveys where the
    /// full sweep would take too long.
    pub fn coarse(subset: SubsetId) -> GridSpec {
        GridSpec {
            r_e_step: 10,
            ..GridSpec::standard(subset)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.n_w, self.n_s, self.r_e] {
            if lo > hi {
                return Err(Error::InvalidParams(format!(
                    "grid range ({lo}, {hi}) has its low end above its high end"
                )));
            }
        }
        if self.n_w.0 == 0 || self.n_s.0 == 0 || self.r_e_step == 0 {
            return Err(Error::InvalidParams(
                "grid ranges must start at 1 and step by at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of lattice points the sweep will visit.
    pub fn cardinality(&self) -> u64 {
        let span = |lo: u32, hi: u32, step: u32| u64::from((hi - lo) / step) + 1;
        span(self.n_w.0, self.n_w.1, 1)
            * span(self.n_s.0, self.n_s.1, 1)
            * span(self.r_e.0, self.r_e.1, self.r_e_step)
    }

    /// All points in lexicographic order: `n_w` outermost, then `n_s`, then
    /// `r_e`.
    pub fn points(&self) -> Vec<DataParams> {
        let mut out = Vec::with_capacity(self.cardinality() as usize);
        for n_w in self.n_w.0..=self.n_w.1 {
            for n_s in self.n_s.0..=self.n_s.1 {
                let mut r_e = self.r_e.0;
                while r_e <= self.r_e.1 {
                    out.push(DataParams::new(n_w, n_s, r_e));
                    r_e += self.r_e_step;
                }
            }
        }
        out
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: DataParams,
    pub rmse: f64,
    pub rhs: f64,
    pub status: FitnessStatus,
}

/// Full sweep outcome. Argmin and argmax consider successfully evaluated
/// points only; ties resolve to the earlier point in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub argmin: GridPoint,
    pub argmax: GridPoint,
    pub points: Vec<GridPoint>,
    pub evaluations: u64,
}

/// Evaluates every grid point, in parallel, preserving grid order in the
/// output. Failed points keep their sentinel scores and are excluded from
/// argmin/argmax.
pub fn sweep<F>(fitness: F, spec: &GridSpec) -> Result<SweepResult>
where
    F: Fn(DataParams) -> FitnessScores + Sync,
{
    spec.validate()?;
    let candidates = spec.points();
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let points: Vec<GridPoint> = candidates
        .par_iter()
        .map(|&params| {
            let scores = fitness(params);
            GridPoint {
                params,
                rmse: scores.rmse,
                rhs: scores.rhs,
                status: scores.status,
            }
        })
        .collect();

    let mut argmin: Option<GridPoint> = None;
    let mut argmax: Option<GridPoint> = None;
    for point in &points {
        if point.status != FitnessStatus::Ok {
            continue;
        }
        if argmin.is_none_or(|b| point.rmse < b.rmse) {
            argmin = Some(*point);
        }
        if argmax.is_none_or(|b| point.rmse > b.rmse) {
            argmax = Some(*point);
        }
    }
    let (argmin, argmax) = match (argmin, argmax) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(Error::AllPointsFailed),
    };

    Ok(SweepResult {
        argmin,
        argmax,
        evaluations: points.len() as u64,
        points,
    })
}

/// Writes the score table as CSV: `n_w,n_s,r_e,rmse,rhs,status`.
pub fn write_score_table<W: Write>(points: &[GridPoint], mut out: W) -> Result<()> {
    writeln!(out, "n_w,n_s,r_e,rmse,rhs,status")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.params.n_w, p.params.n_s, p.params.r_e, p.rmse, p.rhs, p.status
        )?;
    }
    Ok(())
}
