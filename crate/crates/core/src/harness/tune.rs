use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_validate, ModelRecipe};
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::net::TrainConfig;
use crate::search::{Crossover, GaParams, PsoParams};

/// Values `a, a + step, …` up to `b` inclusive (within rounding).
pub fn linspace_step(a: f64, b: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || b < a {
        return vec![];
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| a + step * i as f64).collect()
}

/// `base^c, base^(c+1), …, base^d`.
pub fn logspace(c: i32, d: i32, base: f64) -> Vec<f64> {
    (c..=d).map(|e| base.powi(e)).collect()
}

/// Hyperparameter space of the feedforward networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnnSpace {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
}

impl Default for FnnSpace {
    fn default() -> Self {
        let s = logspace(-5, -1, 10.0);
        let scaled = |k: f64| s.iter().copied().chain(s.iter().map(|v| k * v)).collect::<Vec<f64>>();
        Self {
            depths: (1..=6).collect(),
            widths: logspace(5, 10, 2.0).into_iter().map(|v| v as usize).collect(),
            batch_sizes: logspace(3, 7, 2.0).into_iter().map(|v| v as usize).collect(),
            epochs: linspace_step(50.0, 500.0, 50.0).into_iter().map(|v| v as usize).collect(),
            learning_rates: scaled(3.0),
            weight_decays: scaled(5.0),
        }
    }
}

impl FnnSpace {
    fn validate(&self) -> Result<()> {
        if self.depths.is_empty()
            || self.widths.is_empty()
            || self.batch_sizes.is_empty()
            || self.epochs.is_empty()
            || self.learning_rates.is_empty()
            || self.weight_decays.is_empty()
        {
            return Err(invalid("every hyperparameter needs at least one candidate"));
        }
        Ok(())
    }

    /// One configuration; layer widths are sorted to narrow with depth.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelRecipe {
        let depth = *self.depths.choose(rng).expect("non-empty");
        let mut hidden: Vec<usize> = (0..depth).map(|_| *self.widths.choose(rng).expect("non-empty")).collect();
        hidden.sort_unstable_by(|a, b| b.cmp(a));
        ModelRecipe::Network {
            hidden,
            train: TrainConfig {
                epochs: *self.epochs.choose(rng).expect("non-empty"),
                batch_size: *self.batch_sizes.choose(rng).expect("non-empty"),
                learning_rate: *self.learning_rates.choose(rng).expect("non-empty"),
                weight_decay: *self.weight_decays.choose(rng).expect("non-empty"),
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial<T> {
    pub config: T,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome<T> {
    pub best: T,
    pub score: f64,
    pub trials: Vec<Trial<T>>,
}

/// Random search over `space`, scored by bootstrap RMSE (lower wins).
pub fn random_search(space: &FnnSpace, data: &Dataset, budget: usize, repeats: usize, seed: u64) -> Result<TuneOutcome<ModelRecipe>> {
    if budget < 1 {
        return Err(invalid("tuning budget must be >= 1"));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(budget);
    for _ in 0..budget {
        let config = space.sample(&mut rng);
        let est = bootstrap_validate(&config, data, repeats, seed)?;
        log::info!("trial {:?}: rmse {:.4} ± {:.4}", config, est.mean, est.std);
        trials.push(Trial { config, score: est.mean });
    }
    let best = trials
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.score.total_cmp(&b.score).then(i.cmp(j)))
        .map(|(_, t)| t.clone())
        .expect("budget >= 1");
    Ok(TuneOutcome {
        best: best.config,
        score: best.score,
        trials,
    })
}

/// Exhaustive search maximizing `score`; when the grid exceeds `budget`, a
/// seeded random subset of `budget` points is scored. Ties keep the earlier point.
pub fn grid_search<T, F>(grid: Vec<T>, budget: usize, seed: u64, score: F) -> Result<TuneOutcome<T>>
where
    T: Clone,
    F: Fn(&T) -> Result<f64>,
{
    if budget < 1 {
        return Err(invalid("tuning budget must be >= 1"));
    }
    if grid.is_empty() {
        return Err(invalid("empty tuning grid"));
    }
    let mut points = grid;
    if points.len() > budget {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(budget);
        idx.sort_unstable();
        points = idx.into_iter().map(|i| points[i].clone()).collect();
    }
    let mut trials = Vec::with_capacity(points.len());
    for p in points {
        let s = score(&p)?;
        trials.push(Trial { config: p, score: s });
    }
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.score > trials[best].score {
            best = i;
        }
    }
    Ok(TuneOutcome {
        best: trials[best].config.clone(),
        score: trials[best].score,
        trials,
    })
}

/// PSO grid: w, φp, φg each over 0.1, 0.15, …, 0.95.
pub fn pso_grid() -> Vec<PsoParams> {
    let axis = linspace_step(0.1, 0.95, 0.05);
    let mut out = Vec::with_capacity(axis.len().pow(3));
    for &w in &axis {
        for &phi_p in &axis {
            for &phi_g in &axis {
                out.push(PsoParams { w, phi_p, phi_g });
            }
        }
    }
    out
}

/// GA grid: p_mutation over 0.1…0.95, r_parents over 0.1…0.5, three crossovers.
pub fn ga_grid() -> Vec<GaParams> {
    let mut out = Vec::new();
    for crossover in [Crossover::OnePoint, Crossover::TwoPoint, Crossover::Uniform] {
        for &p_mutation in &linspace_step(0.1, 0.95, 0.05) {
            for &r_parents in &linspace_step(0.1, 0.5, 0.05) {
                out.push(GaParams {
                    p_mutation,
                    r_parents,
                    tournament: 3,
                    crossover,
                });
            }
        }
    }
    out
}
