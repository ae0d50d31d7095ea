use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mean, rmse, std_dev};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::model::PredictiveModel;
use crate::net::{init_network, train, Network, NetworkConfig, TrainConfig};
use crate::scaler::fit_scaler;
use crate::search::derive_seed;

/// How to build a model from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelRecipe {
    Network { hidden: Vec<usize>, train: TrainConfig },
    /// Predicts the training mean of every target.
    Constant,
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Network(Network),
    Constant { inputs: usize, mean: Vec<f64> },
}

impl PredictiveModel for FittedModel {
    fn input_dim(&self) -> usize {
        match self {
            FittedModel::Network(n) => n.input_dim(),
            FittedModel::Constant { inputs, .. } => *inputs,
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            FittedModel::Network(n) => n.output_dim(),
            FittedModel::Constant { mean, .. } => mean.len(),
        }
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        match self {
            FittedModel::Network(n) => n.predict(batch),
            FittedModel::Constant { inputs, mean } => {
                if batch.cols() != *inputs {
                    return Err(Error::DimensionMismatch {
                        expected: *inputs,
                        got: batch.cols(),
                    });
                }
                let rows = vec![mean.clone(); batch.rows()];
                Matrix::from_rows(&rows, mean.len())
            }
        }
    }
}

/// Fits `recipe` on `data`; `seed` drives weight init and batch order.
pub fn fit_recipe(recipe: &ModelRecipe, data: &Dataset, seed: u64) -> Result<FittedModel> {
    match recipe {
        ModelRecipe::Constant => {
            let y = data.outputs();
            let mean = (0..y.cols()).map(|c| super::metrics::mean(&y.column(c))).collect();
            Ok(FittedModel::Constant {
                inputs: data.schema.input_dim(),
                mean,
            })
        }
        ModelRecipe::Network { hidden, train: cfg } => {
            let mut net = init_network(NetworkConfig {
                input_dim: data.schema.input_dim(),
                output_dim: data.schema.output_dim(),
                hidden: hidden.clone(),
                seed,
            })?;
            net.set_scaler(fit_scaler(data)?)?;
            let cfg = TrainConfig { seed, ..cfg.clone() };
            train(&mut net, data, &cfg, None)?;
            Ok(FittedModel::Network(net))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    /// Mean over repeats of the target-averaged out-of-bag RMSE.
    pub mean: f64,
    pub std: f64,
    pub per_repeat: Vec<f64>,
}

/// Out-of-bag bootstrap: each repeat trains on `N` rows drawn with
/// replacement and scores raw-unit RMSE on the rows never drawn.
pub fn bootstrap_validate(recipe: &ModelRecipe, data: &Dataset, repeats: usize, seed: u64) -> Result<BootstrapEstimate> {
    if repeats < 1 {
        return Err(invalid("bootstrap needs at least one repeat"));
    }
    let n = data.len();
    if n < 2 {
        return Err(invalid("bootstrap needs at least two rows"));
    }
    let per_repeat = (0..repeats)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let s = derive_seed(seed, &[r as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (bag, oob) = loop {
                let bag: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let mut drawn = vec![false; n];
                bag.iter().for_each(|&i| drawn[i] = true);
                let oob: Vec<usize> = (0..n).filter(|&i| !drawn[i]).collect();
                if !oob.is_empty() {
                    break (bag, oob);
                }
            };
            let model = fit_recipe(recipe, &data.subset(&bag)?, s)?;
            let test = data.subset(&oob)?;
            let pred = model.predict(test.inputs())?;
            Ok(mean(&rmse(&pred, test.outputs())?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BootstrapEstimate {
        mean: mean(&per_repeat),
        std: std_dev(&per_repeat),
        per_repeat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureMeta, Schema};

    fn data(n: usize) -> Dataset {
        let xs: Vec<[f64; 1]> = (0..n).map(|i| [i as f64]).collect();
        // deterministic pseudo-random targets in [0, 10)
        let ys: Vec<[f64; 1]> = (0..n).map(|i| [((i * 7919) % 1000) as f64 / 100.0]).collect();
        Dataset::new(
            Schema {
                features: vec![FeatureMeta::real("x", 0.0, n as f64, 0.0)],
                targets: vec!["y".into()],
            },
            Matrix::from_rows(&xs, 1).unwrap(),
            Matrix::from_rows(&ys, 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_predictor_matches_closed_form() {
        let d = data(400);
        let y = d.outputs().column(0);
        // RMSE of the mean predictor is the population standard deviation
        let analytic = std_dev(&y);
        let est = bootstrap_validate(&ModelRecipe::Constant, &d, 100, 3).unwrap();
        assert!((est.mean - analytic).abs() / analytic < 0.03, "{} vs {analytic}", est.mean);
    }

    #[test]
    fn single_repeat_is_deterministic() {
        let d = data(50);
        let a = bootstrap_validate(&ModelRecipe::Constant, &d, 1, 8).unwrap();
        let b = bootstrap_validate(&ModelRecipe::Constant, &d, 1, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.std, 0.0);
        assert!(bootstrap_validate(&ModelRecipe::Constant, &d, 0, 8).is_err());
    }

    #[test]
    fn network_recipe_runs() {
        let d = data(40);
        let recipe = ModelRecipe::Network {
            hidden: vec![4],
            train: TrainConfig {
                epochs: 3,
                batch_size: 8,
                learning_rate: 1e-3,
                weight_decay: 0.0,
                seed: 0,
            },
        };
        let est = bootstrap_validate(&recipe, &d, 2, 1).unwrap();
        assert_eq!(est.per_repeat.len(), 2);
        assert!(est.mean.is_finite());
    }
}
