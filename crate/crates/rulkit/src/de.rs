//! Differential evolution over the integer lattice of data parameters.
//!
//! The search runs best/1/bin with deferred replacement: every generation
//! builds all trial candidates from the current population, evaluates them,
//! and only then replaces individuals whose trial scored strictly better.
//! Candidates live on the integer lattice, so mutants are rounded and
//! clamped back into bounds, and repeated lattice points are served from a
//! score cache instead of being re-evaluated.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SubsetId;
use crate::error::{Error, Result};
use crate::seeds::rng_for;
use crate::windowing::DataParams;

/// Inclusive per-dimension bounds of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub n_w: (u32, u32),
    pub n_s: (u32, u32),
    pub r_e: (u32, u32),
}

impl SearchBounds {
    /// Standard bounds: the window length is capped per subset, the stride
    /// ranges over 1..=10, and the RUL plateau over 90..=140.
    pub fn for_subset(subset: SubsetId) -> SearchBounds {
        SearchBounds {
            n_w: (1, subset.window_bound()),
            n_s: (1, 10),
            r_e: (90, 140),
        }
    }

    pub fn contains(&self, params: DataParams) -> bool {
        let DataParams { n_w, n_s, r_e } = params;
        (self.n_w.0..=self.n_w.1).contains(&n_w)
            && (self.n_s.0..=self.n_s.1).contains(&n_s)
            && (self.r_e.0..=self.r_e.1).contains(&r_e)
    }

    fn dims(&self) -> [(f64, f64); 3] {
        [
            (f64::from(self.n_w.0), f64::from(self.n_w.1)),
            (f64::from(self.n_s.0), f64::from(self.n_s.1)),
            (f64::from(self.r_e.0), f64::from(self.r_e.1)),
        ]
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.n_w, self.n_s, self.r_e] {
            if lo > hi {
                return Err(Error::InvalidDeConfig(format!(
                    "bound ({lo}, {hi}) has its low end above its high end"
                )));
            }
        }
        if self.n_w.0 == 0 || self.n_s.0 == 0 {
            return Err(Error::InvalidDeConfig(
                "window length and stride bounds must start at 1 or above".into(),
            ));
        }
        Ok(())
    }
}

/// Mutation factor: either fixed or dithered uniformly per generation, which
/// trades convergence speed against diversity without a second knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mutation {
    Fixed(f64),
    Dither { low: f64, high: f64 },
}

/// Trial construction scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Mutant = best + F * (a - b), binomial crossover.
    Best1Bin,
}

/// Search settings. The defaults are the standard configuration: 12
/// individuals, 30 generations, dithered mutation in [0.5, 1.0), crossover
/// 0.7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub population_size: usize,
    pub generations: usize,
    pub mutation: Mutation,
    pub crossover: f64,
    pub strategy: Strategy,
    pub seed: u64,
    /// Training epochs per fitness evaluation; consumed by the caller when
    /// wiring up the fitness function.
    pub train_epochs_per_eval: usize,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population_size: 12,
            generations: 30,
            mutation: Mutation::Dither {
                low: 0.5,
                high: 1.0,
            },
            crossover: 0.7,
            strategy: Strategy::Best1Bin,
            seed: 0,
            train_epochs_per_eval: 20,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::InvalidDeConfig(format!(
                "population size must be at least 4, got {}",
                self.population_size
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidDeConfig(format!(
                "crossover rate must lie in [0, 1], got {}",
                self.crossover
            )));
        }
        match self.mutation {
            Mutation::Fixed(f) if f.is_finite() && f >= 0.0 => {}
            Mutation::Dither { low, high } if low.is_finite() && low >= 0.0 && low < high => {}
            _ => {
                return Err(Error::InvalidDeConfig(
                    "mutation factor must be non-negative; dither needs low < high".into(),
                ))
            }
        }
        Ok(())
    }

    /// Total fitness requests a run will make: the initial population plus
    /// one trial per individual per generation. Cache hits count too; this is
    /// the search budget, not the training workload.
    pub fn evaluation_budget(&self) -> u64 {
        self.population_size as u64 * (self.generations as u64 + 1)
    }
}

/// Best candidate and score after each generation (entry 0 covers the
/// initial population).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub generation: usize,
    pub best: DataParams,
    pub best_score: f64,
    pub mean_score: f64,
    /// Cumulative fitness requests up to and including this generation.
    pub evaluations: u64,
}

/// Outcome of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    pub best: DataParams,
    pub best_score: f64,
    /// Fitness requests made (equals the configured budget).
    pub evaluations: u64,
    /// Distinct lattice points actually evaluated; the rest were cache hits.
    pub unique_evaluations: u64,
    pub trace: Vec<GenerationTrace>,
}

/// Rounds a continuous candidate to the nearest lattice point, half away
/// from zero, then clamps each coordinate into bounds.
pub fn round_to_lattice(candidate: [f64; 3], bounds: &SearchBounds) -> DataParams {
    let dims = bounds.dims();
    let mut out = [0u32; 3];
    for d in 0..3 {
        let (lo, hi) = dims[d];
        out[d] = candidate[d].round().clamp(lo, hi) as u32;
    }
    DataParams::new(out[0], out[1], out[2])
}

fn as_continuous(params: DataParams) -> [f64; 3] {
    [
        f64::from(params.n_w),
        f64::from(params.n_s),
        f64::from(params.r_e),
    ]
}

/// Evaluates every candidate, serving repeats (within this call or from
/// earlier generations) out of the cache. Fresh points are evaluated in
/// parallel; the cache insertion order is fixed by the candidate list, so
/// results are deterministic.
fn evaluate_all<F>(
    candidates: &[DataParams],
    fitness: &F,
    cache: &mut HashMap<DataParams, f64>,
    evaluations: &mut u64,
    unique_evaluations: &mut u64,
) -> Vec<f64>
where
    F: Fn(DataParams) -> f64 + Sync,
{
    *evaluations += candidates.len() as u64;
    let mut fresh: Vec<DataParams> = Vec::new();
    for &candidate in candidates {
        if !cache.contains_key(&candidate) && !fresh.contains(&candidate) {
            fresh.push(candidate);
        }
    }
    *unique_evaluations += fresh.len() as u64;
    let scores: Vec<(DataParams, f64)> = fresh
        .par_iter()
        .map(|&candidate| (candidate, fitness(candidate)))
        .collect();
    for (candidate, score) in scores {
        cache.insert(candidate, score);
    }
    candidates.iter().map(|c| cache[c]).collect()
}

fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s.total_cmp(&scores[best]) == std::cmp::Ordering::Less {
            best = i;
        }
    }
    best
}

fn mean(scores: &[f64]) -> f64 {
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Latin hypercube initialization: each dimension is divided into
/// `population_size` strata and every individual lands in a distinct stratum
/// per dimension, giving better coverage than independent uniform draws.
fn initialize<R: Rng>(
    bounds: &SearchBounds,
    population_size: usize,
    rng: &mut R,
) -> Vec<DataParams> {
    use rand::seq::SliceRandom;
    let dims = bounds.dims();
    let mut coordinates = vec![[0.0f64; 3]; population_size];
    for d in 0..3 {
        let (lo, hi) = dims[d];
        let mut strata: Vec<usize> = (0..population_size).collect();
        strata.shuffle(rng);
        for (i, coordinate) in coordinates.iter_mut().enumerate() {
            let u: f64 = rng.gen();
            let fraction = (strata[i] as f64 + u) / population_size as f64;
            coordinate[d] = lo + fraction * (hi - lo);
        }
    }
    coordinates
        .into_iter()
        .map(|c| round_to_lattice(c, bounds))
        .collect()
}

/// Runs the search. `fitness` is called for lattice points inside `bounds`
/// only, may run on multiple threads at once, and must be deterministic for
/// the caching to be sound. Lower fitness wins.
pub fn optimize<F>(fitness: F, bounds: &SearchBounds, config: &DeConfig) -> Result<DeResult>
where
    F: Fn(DataParams) -> f64 + Sync,
{
    bounds.validate()?;
    config.validate()?;
    let population_size = config.population_size;

    let mut cache: HashMap<DataParams, f64> = HashMap::new();
    let mut evaluations = 0u64;
    let mut unique_evaluations = 0u64;

    let mut init_rng = rng_for(config.seed, "de-init", 0);
    let mut population = initialize(bounds, population_size, &mut init_rng);
    let mut scores = evaluate_all(
        &population,
        &fitness,
        &mut cache,
        &mut evaluations,
        &mut unique_evaluations,
    );

    let mut best_index = argmin(&scores);
    let mut trace = Vec::with_capacity(config.generations + 1);
    trace.push(GenerationTrace {
        generation: 0,
        best: population[best_index],
        best_score: scores[best_index],
        mean_score: mean(&scores),
        evaluations,
    });

    for generation in 1..=config.generations {
        let factor = match config.mutation {
            Mutation::Fixed(f) => f,
            Mutation::Dither { low, high } => {
                rng_for(config.seed, "de-dither", generation as u64).gen_range(low..high)
            }
        };
        let best = as_continuous(population[best_index]);

        let Strategy::Best1Bin = config.strategy;
        let trials: Vec<DataParams> = (0..population_size)
            .map(|i| {
                let stream = ((generation as u64) << 32) | i as u64;
                let mut rng = rng_for(config.seed, "de-trial", stream);
                let r1 = loop {
                    let r = rng.gen_range(0..population_size);
                    if r != i {
                        break r;
                    }
                };
                let r2 = loop {
                    let r = rng.gen_range(0..population_size);
                    if r != i && r != r1 {
                        break r;
                    }
                };
                let a = as_continuous(population[r1]);
                let b = as_continuous(population[r2]);
                let target = as_continuous(population[i]);
                let forced = rng.gen_range(0..3usize);
                let mut candidate = target;
                for d in 0..3 {
                    let crossed: f64 = rng.gen();
                    if d == forced || crossed < config.crossover {
                        candidate[d] = best[d] + factor * (a[d] - b[d]);
                    }
                }
                round_to_lattice(candidate, bounds)
            })
            .collect();

        let trial_scores = evaluate_all(
            &trials,
            &fitness,
            &mut cache,
            &mut evaluations,
            &mut unique_evaluations,
        );

        // Deferred replacement: every comparison uses the generation-start
        // population, and only strict improvements survive.
        for i in 0..population_size {
            if trial_scores[i].total_cmp(&scores[i]) == std::cmp::Ordering::Less {
                population[i] = trials[i];
                scores[i] = trial_scores[i];
            }
        }
        best_index = argmin(&scores);
        trace.push(GenerationTrace {
            generation,
            best: population[best_index],
            best_score: scores[best_index],
            mean_score: mean(&scores),
            evaluations,
        });
    }

    Ok(DeResult {
        best: population[best_index],
        best_score: scores[best_index],
        evaluations,
        unique_evaluations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd001_bounds() -> SearchBounds {
        SearchBounds::for_subset(SubsetId::FD001)
    }

    fn sphere(center: DataParams) -> impl Fn(DataParams) -> f64 + Sync {
        move |p: DataParams| {
            let d = |a: u32, b: u32| {
                let diff = f64::from(a) - f64::from(b);
                diff * diff
            };
            d(p.n_w, center.n_w) + d(p.n_s, center.n_s) + d(p.r_e, center.r_e)
        }
    }

    #[test]
    fn budget_counts_init_plus_one_trial_per_individual_per_generation() {
        assert_eq!(DeConfig::default().evaluation_budget(), 372);
        let config = DeConfig {
            population_size: 5,
            generations: 3,
            ..DeConfig::default()
        };
        assert_eq!(config.evaluation_budget(), 20);
    }

    #[test]
    fn run_consumes_exactly_the_budget() {
        let config = DeConfig {
            seed: 1,
            ..DeConfig::default()
        };
        let result = optimize(
            sphere(DataParams::new(20, 5, 110)),
            &fd001_bounds(),
            &config,
        )
        .unwrap();
        assert_eq!(result.evaluations, 372);
        assert!(result.unique_evaluations <= result.evaluations);
        assert_eq!(result.trace.len(), 31);
        assert_eq!(result.trace.last().unwrap().evaluations, 372);
    }

    #[test]
    fn sphere_optimum_is_found_exactly() {
        let center = DataParams::new(22, 3, 117);
        let config = DeConfig {
            seed: 0,
            ..DeConfig::default()
        };
        let result = optimize(sphere(center), &fd001_bounds(), &config).unwrap();
        assert_eq!(result.best, center);
        assert_eq!(result.best_score, 0.0);
    }

    #[test]
    fn search_is_deterministic_for_a_seed() {
        let config = DeConfig {
            seed: 9,
            ..DeConfig::default()
        };
        let a = optimize(sphere(DataParams::new(10, 2, 95)), &fd001_bounds(), &config).unwrap();
        let b = optimize(sphere(DataParams::new(10, 2, 95)), &fd001_bounds(), &config).unwrap();
        assert_eq!(a, b);
        let c = optimize(
            sphere(DataParams::new(10, 2, 95)),
            &fd001_bounds(),
            &DeConfig { seed: 10, ..config },
        )
        .unwrap();
        assert!(c.trace != a.trace);
    }

    #[test]
    fn best_score_never_worsens_across_generations() {
        let config = DeConfig {
            seed: 4,
            ..DeConfig::default()
        };
        let result = optimize(
            sphere(DataParams::new(28, 9, 139)),
            &fd001_bounds(),
            &config,
        )
        .unwrap();
        for pair in result.trace.windows(2) {
            assert!(pair[1].best_score <= pair[0].best_score);
        }
    }

    #[test]
    fn every_candidate_stays_on_the_lattice() {
        let bounds = fd001_bounds();
        let seen = std::sync::Mutex::new(Vec::new());
        let fitness = |p: DataParams| {
            seen.lock().unwrap().push(p);
            sphere(DataParams::new(15, 5, 115))(p)
        };
        optimize(
            fitness,
            &bounds,
            &DeConfig {
                seed: 2,
                ..DeConfig::default()
            },
        )
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert!(!seen.is_empty());
        for p in seen {
            assert!(bounds.contains(p), "{p} escaped the bounds");
        }
    }

    #[test]
    fn config_validation_catches_bad_settings() {
        let mut config = DeConfig {
            population_size: 3,
            ..DeConfig::default()
        };
        assert!(config.validate().is_err());
        config = DeConfig {
            crossover: 1.5,
            ..DeConfig::default()
        };
        assert!(config.validate().is_err());
        config = DeConfig {
            mutation: Mutation::Dither {
                low: 1.0,
                high: 0.5,
            },
            ..DeConfig::default()
        };
        assert!(config.validate().is_err());
        config = DeConfig {
            mutation: Mutation::Fixed(-0.1),
            ..DeConfig::default()
        };
        assert!(config.validate().is_err());
        assert!(DeConfig::default().validate().is_ok());
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let bounds = SearchBounds {
            n_w: (10, 5),
            n_s: (1, 10),
            r_e: (90, 140),
        };
        assert!(optimize(|_| 0.0, &bounds, &DeConfig::default()).is_err());
    }

    #[test]
    fn rounding_is_half_away_from_zero_then_clamped() {
        let bounds = fd001_bounds();
        assert_eq!(
            round_to_lattice([24.4, 0.6, 127.5], &bounds),
            DataParams::new(24, 1, 128)
        );
        assert_eq!(
            round_to_lattice([24.5, 1.5, 127.4], &bounds),
            DataParams::new(25, 2, 127)
        );
        assert_eq!(
            round_to_lattice([35.0, 12.9, 80.1], &bounds),
            DataParams::new(30, 10, 90)
        );
        assert_eq!(
            round_to_lattice([-3.0, 0.2, 200.0], &bounds),
            DataParams::new(1, 1, 140)
        );
    }

    #[test]
    fn collapsed_bounds_are_handled() {
        let bounds = SearchBounds {
            n_w: (7, 7),
            n_s: (2, 2),
            r_e: (100, 100),
        };
        let result = optimize(
            |_| 1.0,
            &bounds,
            &DeConfig {
                seed: 3,
                ..DeConfig::default()
            },
        )
        .unwrap();
        assert_eq!(result.best, DataParams::new(7, 2, 100));
        // Every request after the first hits the cache.
        assert_eq!(result.unique_evaluations, 1);
        assert_eq!(result.evaluations, 372);
    }

    proptest! {
        /// Rounded candidates always land inside the bounds.
        #[test]
        fn lattice_rounding_stays_in_bounds(
            x in -100.0f64..100.0,
            y in -100.0f64..100.0,
            z in -100.0f64..500.0
        ) {
            let bounds = fd001_bounds();
            prop_assert!(bounds.contains(round_to_lattice([x, y, z], &bounds)));
        }
    }
}
