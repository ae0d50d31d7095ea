//! Metaheuristic generation of physics-inconsistent test inputs.
//!
//! Every engine evaluates a population per iteration, records each valid
//! candidate whose deviation exceeds the rule tolerance, and evolves the
//! population toward higher deviation. Invalid candidates get fitness −∞: they
//! never become personal/global bests or elites, but they stay in the
//! population.

mod campaign;
mod dedup;
mod ga;
mod pso;
mod random;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::model::PredictiveModel;
use crate::rulespace::{Expectation, SearchSpace};

pub use campaign::{derive_seed, reverify, run_campaign, CampaignStats, RuleStats};
pub use dedup::{dedup, Dedup};
pub use ga::search_ga;
pub use pso::search_pso;
pub use random::search_rs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pso,
    Ga,
    Rs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pso => "pso",
            Algorithm::Ga => "ga",
            Algorithm::Rs => "rs",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pso" => Ok(Algorithm::Pso),
            "ga" => Ok(Algorithm::Ga),
            "rs" | "random" => Ok(Algorithm::Rs),
            other => Err(invalid(format!("unknown search engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Crossover {
    OnePoint,
    TwoPoint,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    /// Inertia weight.
    pub w: f64,
    /// Cognitive coefficient.
    pub phi_p: f64,
    /// Social coefficient.
    pub phi_g: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            w: 0.8,
            phi_p: 0.65,
            phi_g: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub p_mutation: f64,
    pub r_parents: f64,
    pub tournament: usize,
    pub crossover: Crossover,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            p_mutation: 0.25,
            r_parents: 0.3,
            tournament: 3,
            crossover: Crossover::OnePoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub algorithm: Algorithm,
    pub population: usize,
    /// Iterations (generations) K per search.
    pub iterations: usize,
    #[serde(default)]
    pub pso: PsoParams,
    #[serde(default)]
    pub ga: GaParams,
    pub seed: u64,
}

impl SearchParams {
    pub fn new(algorithm: Algorithm, population: usize, iterations: usize, seed: u64) -> Self {
        Self {
            algorithm,
            population,
            iterations,
            pso: PsoParams::default(),
            ga: GaParams::default(),
            seed,
        }
    }

    /// Candidates generated by one search.
    pub fn budget(&self) -> usize {
        self.population * self.iterations
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(invalid("population must be >= 2"));
        }
        if self.iterations < 1 {
            return Err(invalid("iterations must be >= 1"));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.ga.p_mutation) || !unit(self.ga.r_parents) {
            return Err(invalid("GA probabilities must lie in [0, 1]"));
        }
        if self.ga.tournament < 1 {
            return Err(invalid("tournament size must be >= 1"));
        }
        if !(self.pso.w >= 0.0 && self.pso.phi_p >= 0.0 && self.pso.phi_g >= 0.0) {
            return Err(invalid("PSO coefficients must be >= 0"));
        }
        Ok(())
    }
}

/// A valid input that contradicts a sensitivity rule beyond its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialExample {
    pub rule_id: String,
    pub parent_index: usize,
    pub x_hat: Vec<f64>,
    pub target: String,
    /// Expected direction, −1, 0 or +1.
    pub d: i8,
    /// Raw output units.
    pub tol: f64,
    pub fitness: f64,
    pub algorithm: Algorithm,
    pub iteration: usize,
    pub seed: u64,
}

impl AdversarialExample {
    pub fn expectation(&self) -> Expectation {
        Expectation::from_sign(self.d).unwrap_or(Expectation::Invariant)
    }
}

/// Behavioural deviation of a prediction pair from the rule's expectation:
/// positive when the model moves against the expected direction.
pub fn deviation_value(expect: Expectation, fx: f64, fx_hat: f64) -> f64 {
    match expect {
        Expectation::Increase => fx - fx_hat,
        Expectation::Invariant => (fx - fx_hat).abs(),
        Expectation::Decrease => fx_hat - fx,
    }
}

/// Deviation of `model` between anchor `x` and `x_hat` on output column `target`.
pub fn deviation<M: PredictiveModel + ?Sized>(
    model: &M,
    expect: Expectation,
    x: &[f64],
    x_hat: &[f64],
    target: usize,
) -> Result<f64> {
    let both = Matrix::from_rows(&[x, x_hat], x.len())?;
    let y = model.predict(&both)?;
    let (fx, fxh) = (y.get(0, target), y.get(1, target));
    if !(fx.is_finite() && fxh.is_finite()) {
        return Err(Error::NonFiniteOutput);
    }
    Ok(deviation_value(expect, fx, fxh))
}

pub type BatchFitness<'a> = dyn Fn(&Matrix) -> Result<Vec<f64>> + Sync + 'a;
pub type Validity<'a> = dyn Fn(&[f64]) -> bool + Sync + 'a;

/// What an engine optimizes: maximize `fitness` over `space` subject to `validity`.
pub struct SearchProblem<'a> {
    pub space: &'a SearchSpace,
    /// Batch of decoded candidates (one per row) → fitness per row.
    pub fitness: &'a BatchFitness<'a>,
    pub validity: &'a Validity<'a>,
    /// Capture threshold; `f64::INFINITY` disables capture.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub x_hat: Vec<f64>,
    pub fitness: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchOutcome {
    /// Best fitness per iteration (engine-specific, see each engine).
    pub trace: Vec<f64>,
    pub captures: Vec<Capture>,
    pub generated: usize,
    pub valid: usize,
    /// Best valid decoded candidate seen, with its fitness.
    pub best: Option<(Vec<f64>, f64)>,
}

impl SearchOutcome {
    /// Decodes and scores one population; invalid members score −∞.
    /// Valid members above the tolerance are captured.
    pub(crate) fn evaluate(&mut self, problem: &SearchProblem<'_>, genes: &[Vec<f64>], iteration: usize) -> Result<Vec<f64>> {
        let decoded: Vec<Vec<f64>> = genes.iter().map(|g| problem.space.decode(g)).collect();
        let valid_idx: Vec<usize> = (0..decoded.len()).filter(|&i| (problem.validity)(&decoded[i])).collect();
        self.generated += decoded.len();
        self.valid += valid_idx.len();
        let mut fit = vec![f64::NEG_INFINITY; decoded.len()];
        if valid_idx.is_empty() {
            return Ok(fit);
        }
        let rows: Vec<&[f64]> = valid_idx.iter().map(|&i| decoded[i].as_slice()).collect();
        let batch = Matrix::from_rows(&rows, problem.space.dim())?;
        let scores = (problem.fitness)(&batch)?;
        for (&i, s) in valid_idx.iter().zip(scores) {
            if !s.is_finite() {
                return Err(Error::NonFiniteOutput);
            }
            fit[i] = s;
            if s > problem.tol {
                self.captures.push(Capture {
                    x_hat: decoded[i].clone(),
                    fitness: s,
                    iteration,
                });
            }
            if self.best.as_ref().is_none_or(|(_, b)| s > *b) {
                self.best = Some((decoded[i].clone(), s));
            }
        }
        Ok(fit)
    }
}

pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v > f64::NEG_INFINITY && best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Runs the engine selected by `params.algorithm`.
pub fn run_search<R: rand::Rng>(problem: &SearchProblem<'_>, params: &SearchParams, rng: &mut R) -> Result<SearchOutcome> {
    match params.algorithm {
        Algorithm::Pso => search_pso(problem, params, rng),
        Algorithm::Ga => search_ga(problem, params, rng),
        Algorithm::Rs => search_rs(problem, params, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;

    #[test]
    fn deviation_cases() {
        assert!((deviation_value(Expectation::Increase, 2.0, 1.2) - 0.8).abs() < 1e-15);
        assert_eq!(deviation_value(Expectation::Invariant, 1.3, 1.3), 0.0);
        assert_eq!(deviation_value(Expectation::Decrease, 1.0, 1.5), 0.5);
        assert!((deviation_value(Expectation::Invariant, 1.0, 1.4) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn deviation_through_model() {
        let m = FnModel::new(1, 1, |x: &[f64]| vec![x[0] * x[0]]);
        let d = deviation(&m, Expectation::Decrease, &[1.0], &[2.0], 0).unwrap();
        assert_eq!(d, 3.0);
        let nan = FnModel::new(1, 1, |_: &[f64]| vec![f64::NAN]);
        assert!(matches!(
            deviation(&nan, Expectation::Increase, &[1.0], &[2.0], 0),
            Err(Error::NonFiniteOutput)
        ));
    }

    #[test]
    fn params_validation() {
        let mut p = SearchParams::new(Algorithm::Ga, 10, 5, 0);
        assert!(p.validate().is_ok());
        p.population = 1;
        assert!(p.validate().is_err());
        p.population = 10;
        p.ga.p_mutation = 1.5;
        assert!(p.validate().is_err());
        p.ga.p_mutation = 0.2;
        p.iterations = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn tuned_defaults() {
        let p = PsoParams::default();
        assert_eq!((p.w, p.phi_p, p.phi_g), (0.8, 0.65, 0.75));
        let g = GaParams::default();
        assert_eq!((g.p_mutation, g.r_parents, g.tournament), (0.25, 0.3, 3));
        assert_eq!(g.crossover, Crossover::OnePoint);
    }
}
