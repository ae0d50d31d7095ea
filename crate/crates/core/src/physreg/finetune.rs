use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dynamic_lambda, r_phys, r_phys_grad, AxStore};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::net::train::{add_weight_decay, mse, scaled_data};
use crate::net::{mse_and_grad, shuffled_batches, Adam, Network, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Coupled L2 coefficient, as in plain training.
    #[serde(default)]
    pub weight_decay: f64,
    /// Multiplier on the dynamic λ.
    pub beta: f64,
    pub seed: u64,
    /// A checkpoint is admissible when its training data loss stays within
    /// this factor of the pre-fine-tune loss.
    #[serde(default = "default_watch")]
    pub watch_tolerance: f64,
}

fn default_watch() -> f64 {
    1.1
}

impl FinetuneConfig {
    /// Same optimizer settings as `train`, with regularization weight `beta`.
    pub fn from_train(train: &TrainConfig, beta: f64) -> Self {
        Self {
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            weight_decay: train.weight_decay,
            beta,
            seed: train.seed,
            watch_tolerance: default_watch(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(invalid("learning_rate must be > 0 and weight_decay >= 0"));
        }
        if !(self.beta >= 1.0) {
            return Err(invalid(format!("beta must be >= 1, got {}", self.beta)));
        }
        if !(self.watch_tolerance >= 1.0) {
            return Err(invalid("watch_tolerance must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneStep {
    pub epoch: usize,
    pub batch: usize,
    pub data_loss: f64,
    pub reg_cost: f64,
    /// 0 when no linked example violated its rule.
    pub lambda: f64,
}

/// State evaluated on the full training set; epoch 0 is the starting network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub data_loss: f64,
    pub reg_cost: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinetuneHistory {
    pub base_data_loss: f64,
    pub steps: Vec<FinetuneStep>,
    pub checkpoints: Vec<Checkpoint>,
    /// Index into `checkpoints` of the returned best state.
    pub best: usize,
}

impl FinetuneHistory {
    /// CSV with columns `epoch,batch,data_loss,reg_cost,lambda`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.steps {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct FinetuneOutcome {
    pub best: Network,
    pub last: Network,
    pub history: FinetuneHistory,
}

struct AxTerms {
    /// Scaled inputs of every stored example.
    x: Matrix,
    target: Vec<usize>,
    d: Vec<i8>,
    /// Tolerance in scaled output units.
    tol: Vec<f64>,
    parent: Vec<usize>,
}

fn prepare(network: &Network, dataset: &Dataset, store: &AxStore) -> Result<AxTerms> {
    store.check_parents(dataset.len())?;
    let dim = dataset.schema.input_dim();
    let mut raw = Matrix::zeros(0, dim);
    let (mut target, mut d, mut tol, mut parent) = (vec![], vec![], vec![], vec![]);
    let std = &network.scaler().outputs.std;
    for r in store.iter() {
        let t = dataset
            .schema
            .target_index(&r.target)
            .ok_or_else(|| Error::MissingColumn(r.target.clone()))?;
        raw.push_row(&r.x_hat)?;
        target.push(t);
        d.push(r.d);
        tol.push(r.tol / std[t]);
        parent.push(r.parent_index);
    }
    let x = if raw.rows() == 0 { raw } else { network.scale_inputs(&raw)? };
    Ok(AxTerms { x, target, d, tol, parent })
}

/// Mean hinge cost of all stored examples against their parents.
fn full_reg_cost(network: &Network, x: &Matrix, terms: &AxTerms) -> f64 {
    if terms.parent.is_empty() {
        return 0.0;
    }
    let parents = network.forward(&x.select_rows(&terms.parent));
    let adv = network.forward(&terms.x);
    let n = terms.parent.len();
    (0..n)
        .map(|k| r_phys(parents.get(k, terms.target[k]), adv.get(k, terms.target[k]), terms.d[k], terms.tol[k]))
        .sum::<f64>()
        / n as f64
}

/// Mini-batch Adam on `MSE + λ·R_phys (+ L2)`, λ recomputed per batch from the
/// pre-fine-tune data loss.
///
/// Costs are computed in scaled output space with tolerances divided by the
/// output standard deviation. The returned `best` network is the checkpoint
/// with the lowest regularization cost among those whose training data loss
/// stays within `watch_tolerance × base`; ties go to the lower data loss.
/// With an empty store every update equals plain training and `best` is the
/// final state.
pub fn finetune(network: &Network, dataset: &Dataset, store: &AxStore, config: &FinetuneConfig) -> Result<FinetuneOutcome> {
    config.validate()?;
    let (x, y) = scaled_data(network, dataset)?;
    let terms = prepare(network, dataset, store)?;
    let mut net = network.clone();
    let base = mse(&net.forward(&x), &y);
    if !base.is_finite() {
        return Err(Error::NonFiniteLoss {
            term: "data",
            epoch: 0,
            batch: 0,
        });
    }

    let mut history = FinetuneHistory {
        base_data_loss: base,
        ..Default::default()
    };
    let admissible = |loss: f64| loss <= config.watch_tolerance * base;
    history.checkpoints.push(Checkpoint {
        epoch: 0,
        data_loss: base,
        reg_cost: full_reg_cost(&net, &x, &terms),
        admissible: true,
    });
    let mut best = net.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(net.num_params(), config.learning_rate);

    for epoch in 0..config.epochs {
        for (b, batch) in shuffled_batches(dataset.len(), config.batch_size, &mut rng).into_iter().enumerate() {
            let bx = x.select_rows(&batch);
            let by = y.select_rows(&batch);
            let cache = net.forward_cached(&bx);
            let (data_loss, mut d_out) = mse_and_grad(cache.output(), &by);
            if !data_loss.is_finite() {
                return Err(Error::NonFiniteLoss { term: "data", epoch, batch: b });
            }

            let linked = store.lookup_indices(&batch);
            let mut reg_cost = 0.0;
            let mut lambda = 0.0;
            let mut adv_grad = None;
            if !linked.is_empty() {
                let ks: Vec<usize> = linked.iter().map(|&(_, k)| k).collect();
                let ax_cache = net.forward_cached(&terms.x.select_rows(&ks));
                let fx = cache.output();
                let fxh = ax_cache.output();
                let n = linked.len() as f64;
                let mut pair_grads = Vec::with_capacity(linked.len());
                for (row, &(pos, k)) in linked.iter().enumerate() {
                    let t = terms.target[k];
                    let (a, h) = (fx.get(pos, t), fxh.get(row, t));
                    reg_cost += r_phys(a, h, terms.d[k], terms.tol[k]);
                    pair_grads.push(r_phys_grad(a, h, terms.d[k], terms.tol[k]));
                }
                reg_cost /= n;
                if !reg_cost.is_finite() {
                    return Err(Error::NonFiniteLoss { term: "reg", epoch, batch: b });
                }
                if reg_cost > 0.0 {
                    lambda = if base > 0.0 {
                        dynamic_lambda(base, reg_cost, config.beta)?
                    } else {
                        config.beta
                    };
                    let mut d_adv = Matrix::zeros(ks.len(), fxh.cols());
                    for (row, (&(pos, k), (gx, gh))) in linked.iter().zip(pair_grads).enumerate() {
                        let t = terms.target[k];
                        d_out.set(pos, t, d_out.get(pos, t) + lambda * gx / n);
                        d_adv.set(row, t, lambda * gh / n);
                    }
                    adv_grad = Some(net.backward(&ax_cache, &d_adv));
                }
            }

            let mut grad = net.backward(&cache, &d_out);
            if let Some(g) = adv_grad {
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            add_weight_decay(&mut grad, net.params(), config.weight_decay);
            adam.step(net.params_mut(), &grad);
            history.steps.push(FinetuneStep {
                epoch,
                batch: b,
                data_loss,
                reg_cost,
                lambda,
            });
        }
        if !net.params().iter().all(|p| p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        let data_loss = mse(&net.forward(&x), &y);
        let reg_cost = full_reg_cost(&net, &x, &terms);
        let cp = Checkpoint {
            epoch: epoch + 1,
            data_loss,
            reg_cost,
            admissible: admissible(data_loss),
        };
        if !cp.admissible {
            log::warn!(
                "fine-tune epoch {}: data loss {data_loss:.4e} exceeds {}x the base loss {base:.4e}",
                epoch + 1,
                config.watch_tolerance
            );
        }
        let current = &history.checkpoints[history.best];
        if cp.admissible && (cp.reg_cost < current.reg_cost || (cp.reg_cost == current.reg_cost && cp.data_loss < current.data_loss)) {
            history.best = history.checkpoints.len();
            best = net.clone();
        }
        history.checkpoints.push(cp);
    }
    if store.is_empty() {
        history.best = history.checkpoints.len() - 1;
        best = net.clone();
    }
    Ok(FinetuneOutcome { best, last: net, history })
}
