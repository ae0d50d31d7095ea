use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{change_rmse, improv_advin, mean, rmse};
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::model::PredictiveModel;
use crate::net::{init_network, train, BatchAugment, Network, NetworkConfig, TrainConfig};
use crate::physreg::{finetune, AugmentationRule, Augmenter, AxStore, FinetuneConfig};
use crate::rulespace::{Envelope, SensitivityRule};
use crate::scaler::fit_scaler;
use crate::search::{derive_seed, run_campaign, Algorithm, SearchParams};

/// Everything trained and searched inside one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub engines: Vec<SearchParams>,
    pub finetune: FinetuneConfig,
    /// Per-row augmentation probability during plain training.
    #[serde(default)]
    pub augmentation_p: f64,
}

pub struct Experiment<'a> {
    /// Label of the system under test, written to the report.
    pub system: String,
    pub data: &'a Dataset,
    pub rules: &'a [SensitivityRule],
    pub envelope: &'a Envelope,
    pub augmentation: &'a [AugmentationRule],
    pub pipeline: &'a Pipeline,
    pub k: usize,
    pub runs: usize,
    pub seed: u64,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub run: usize,
    pub fold: usize,
    pub seed: u64,
    pub engine: Algorithm,
    pub generated: usize,
    pub val_in_pct: f64,
    pub dup_in_pct: f64,
    pub adv_in_train: usize,
    pub adv_in_test_pre: usize,
    pub adv_in_test_post: usize,
    pub improv_advin: Option<f64>,
    pub rmse_pre: Vec<f64>,
    pub rmse_post: Vec<f64>,
    pub change_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSummary {
    pub engine: Algorithm,
    pub folds: usize,
    pub generated: f64,
    pub val_in_pct: f64,
    pub dup_in_pct: f64,
    pub adv_in_train: f64,
    pub adv_in_test_pre: f64,
    pub adv_in_test_post: f64,
    /// Mean over folds where it is defined; `None` when no fold had a pre-count.
    pub improv_advin: Option<f64>,
    pub rmse_pre: Vec<f64>,
    pub rmse_post: Vec<f64>,
    pub change_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub system: String,
    pub digest: String,
    pub seed: u64,
    pub k: usize,
    pub runs: usize,
    pub targets: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub summary: Vec<EngineSummary>,
}

/// Train-split example store of one (run, fold, engine).
#[derive(Debug, Clone)]
pub struct FoldStore {
    pub run: usize,
    pub fold: usize,
    pub engine: Algorithm,
    pub store: AxStore,
}

pub struct KfoldOutcome {
    pub report: ExperimentReport,
    pub stores: Vec<FoldStore>,
}

/// Test indices of each fold: one seeded shuffle cut into `k` contiguous
/// slices whose sizes differ by at most one.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(invalid(format!("k must be >= 2, got {k}")));
    }
    if n < k {
        return Err(invalid(format!("{n} rows cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

fn clamp_batch(batch: usize, n: usize, what: &str) -> usize {
    if batch > n {
        log::warn!("{what} batch size {batch} exceeds the {n} training rows; using {n}");
        n
    } else {
        batch
    }
}

/// Trains the plain network of one fold.
pub fn train_fold(
    pipeline: &Pipeline,
    train_data: &Dataset,
    augmentation: &[AugmentationRule],
    seed: u64,
) -> Result<Network> {
    let mut net = init_network(NetworkConfig {
        input_dim: train_data.schema.input_dim(),
        output_dim: train_data.schema.output_dim(),
        hidden: pipeline.hidden.clone(),
        seed,
    })?;
    net.set_scaler(fit_scaler(train_data)?)?;
    let cfg = TrainConfig {
        seed,
        batch_size: clamp_batch(pipeline.train.batch_size, train_data.len(), "training"),
        ..pipeline.train.clone()
    };
    let aug = (!augmentation.is_empty() && pipeline.augmentation_p > 0.0).then(|| Augmenter {
        rules: augmentation.to_vec(),
        p: pipeline.augmentation_p,
        schema: train_data.schema.clone(),
    });
    train(&mut net, train_data, &cfg, aug.as_ref().map(|a| a as &dyn BatchAugment))?;
    Ok(net)
}

fn run_fold(ex: &Experiment, run: usize, fold: usize, test_idx: &[usize]) -> Result<(Vec<FoldResult>, Vec<FoldStore>)> {
    let seed = derive_seed(ex.seed, &[run as u64, fold as u64]);
    let mut in_test = vec![false; ex.data.len()];
    test_idx.iter().for_each(|&i| in_test[i] = true);
    let train_idx: Vec<usize> = (0..ex.data.len()).filter(|&i| !in_test[i]).collect();
    let train_data = ex.data.subset(&train_idx)?;
    let test_data = ex.data.subset(test_idx)?;

    let net = train_fold(ex.pipeline, &train_data, ex.augmentation, seed)?;
    let rmse_pre = rmse(&net.predict(test_data.inputs())?, test_data.outputs())?;

    let mut results = Vec::new();
    let mut stores = Vec::new();
    for (e, engine) in ex.pipeline.engines.iter().enumerate() {
        let params = SearchParams {
            seed: derive_seed(seed, &[100 + e as u64]),
            ..engine.clone()
        };
        let (store, stats) = run_campaign(&net, &train_data, ex.rules, ex.envelope, &params)?;
        let (_, pre) = run_campaign(&net, &test_data, ex.rules, ex.envelope, &params)?;
        let ft = FinetuneConfig {
            seed,
            batch_size: clamp_batch(ex.pipeline.finetune.batch_size, train_data.len(), "fine-tune"),
            ..ex.pipeline.finetune.clone()
        };
        let tuned = finetune(&net, &train_data, &store, &ft)?.best;
        let (_, post) = run_campaign(&tuned, &test_data, ex.rules, ex.envelope, &params)?;
        let rmse_post = rmse(&tuned.predict(test_data.inputs())?, test_data.outputs())?;
        let change = rmse_pre
            .iter()
            .zip(&rmse_post)
            .map(|(&a, &b)| change_rmse(a, b))
            .collect::<Result<Vec<f64>>>()?;
        results.push(FoldResult {
            run,
            fold,
            seed,
            engine: params.algorithm,
            generated: stats.generated,
            val_in_pct: stats.val_in_pct,
            dup_in_pct: stats.dup_in_pct,
            adv_in_train: stats.adv_in,
            adv_in_test_pre: pre.adv_in,
            adv_in_test_post: post.adv_in,
            improv_advin: improv_advin(pre.adv_in, post.adv_in),
            rmse_pre: rmse_pre.clone(),
            rmse_post,
            change_rmse: change,
        });
        stores.push(FoldStore {
            run,
            fold,
            engine: params.algorithm,
            store,
        });
    }
    Ok((results, stores))
}

fn column_means(rows: &[&Vec<f64>]) -> Vec<f64> {
    let width = rows.first().map_or(0, |r| r.len());
    (0..width).map(|c| mean(&rows.iter().map(|r| r[c]).collect::<Vec<f64>>())).collect()
}

fn summarize(folds: &[FoldResult]) -> Vec<EngineSummary> {
    let mut groups: BTreeMap<Algorithm, Vec<&FoldResult>> = BTreeMap::new();
    for f in folds {
        groups.entry(f.engine).or_default().push(f);
    }
    groups
        .into_iter()
        .map(|(engine, g)| {
            let avg = |f: &dyn Fn(&FoldResult) -> f64| mean(&g.iter().map(|r| f(r)).collect::<Vec<f64>>());
            let improv: Vec<f64> = g.iter().filter_map(|r| r.improv_advin).collect();
            EngineSummary {
                engine,
                folds: g.len(),
                generated: avg(&|r| r.generated as f64),
                val_in_pct: avg(&|r| r.val_in_pct),
                dup_in_pct: avg(&|r| r.dup_in_pct),
                adv_in_train: avg(&|r| r.adv_in_train as f64),
                adv_in_test_pre: avg(&|r| r.adv_in_test_pre as f64),
                adv_in_test_post: avg(&|r| r.adv_in_test_post as f64),
                improv_advin: (!improv.is_empty()).then(|| mean(&improv)),
                rmse_pre: column_means(&g.iter().map(|r| &r.rmse_pre).collect::<Vec<_>>()),
                rmse_post: column_means(&g.iter().map(|r| &r.rmse_post).collect::<Vec<_>>()),
                change_rmse: column_means(&g.iter().map(|r| &r.change_rmse).collect::<Vec<_>>()),
            }
        })
        .collect()
}

/// Repeated k-fold: for each (run, fold), train, search the train split,
/// fine-tune on its examples, and compare test-split examples and RMSE before
/// and after. Folds run in parallel and are merged in (run, fold) order.
pub fn kfold_run(ex: &Experiment) -> Result<KfoldOutcome> {
    if ex.runs < 1 {
        return Err(invalid("runs must be >= 1"));
    }
    if ex.pipeline.engines.is_empty() {
        return Err(invalid("no search engine configured"));
    }
    for e in &ex.pipeline.engines {
        e.validate()?;
    }
    ex.pipeline.finetune.validate()?;
    let mut jobs = Vec::new();
    for run in 0..ex.runs {
        let folds = fold_indices(ex.data.len(), ex.k, derive_seed(ex.seed, &[run as u64]))?;
        jobs.extend(folds.into_iter().enumerate().map(|(f, idx)| (run, f, idx)));
    }
    let parts = jobs
        .par_iter()
        .map(|(run, fold, idx)| run_fold(ex, *run, *fold, idx))
        .collect::<Result<Vec<_>>>()?;
    let mut folds = Vec::new();
    let mut stores = Vec::new();
    for (r, s) in parts {
        folds.extend(r);
        stores.extend(s);
    }
    let summary = summarize(&folds);
    Ok(KfoldOutcome {
        report: ExperimentReport {
            system: ex.system.clone(),
            digest: ex.digest.clone(),
            seed: ex.seed,
            k: ex.k,
            runs: ex.runs,
            targets: ex.data.schema.targets.clone(),
            folds,
            summary,
        },
        stores,
    })
}

impl ExperimentReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Long-format summary: one row per (engine, split, metric).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["SYS", "ALG", "G", "dataset", "metric", "value"])?;
        for s in &self.summary {
            let g = format!("{:.1}", s.generated);
            let mut row = |split: &str, metric: &str, value: String| {
                w.write_record([self.system.as_str(), s.engine.name(), &g, split, metric, &value])
            };
            row("train", "adv_in", format!("{:.2}", s.adv_in_train))?;
            row("train", "val_in_pct", format!("{:.2}", s.val_in_pct))?;
            row("train", "dup_in_pct", format!("{:.2}", s.dup_in_pct))?;
            row("test", "adv_in_pre", format!("{:.2}", s.adv_in_test_pre))?;
            row("test", "adv_in_post", format!("{:.2}", s.adv_in_test_post))?;
            let improv = s.improv_advin.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
            row("test", "improv_advin_pct", improv)?;
            for (t, name) in self.targets.iter().enumerate() {
                row("test", &format!("rmse_pre:{name}"), format!("{:.6}", s.rmse_pre[t]))?;
                row("test", &format!("rmse_post:{name}"), format!("{:.6}", s.rmse_post[t]))?;
                row("test", &format!("change_rmse_pct:{name}"), format!("{:.2}", s.change_rmse[t]))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{generate_synthetic_case, CaseName};

    #[test]
    fn folds_partition_rows() {
        let f = fold_indices(10, 3, 1).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 3]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(f, fold_indices(10, 3, 1).unwrap());
        assert!(fold_indices(2, 3, 0).is_err());
        assert!(fold_indices(10, 1, 0).is_err());
    }

    fn pipeline() -> Pipeline {
        let train = TrainConfig {
            epochs: 3,
            batch_size: 500,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            seed: 0,
        };
        Pipeline {
            hidden: vec![8],
            finetune: FinetuneConfig::from_train(&train, 1.0),
            train,
            engines: vec![SearchParams::new(Algorithm::Rs, 4, 3, 0)],
            augmentation_p: 0.0,
        }
    }

    #[test]
    fn small_run_is_reproducible() {
        let (data, case) = generate_synthetic_case(CaseName::LiftBalance, 30, 0.0, 2).unwrap();
        let p = pipeline();
        let ex = Experiment {
            system: "lift".into(),
            data: &data,
            rules: &case.rules,
            envelope: &case.envelope,
            augmentation: &[],
            pipeline: &p,
            k: 3,
            runs: 1,
            seed: 4,
            digest: "d".into(),
        };
        let a = kfold_run(&ex).unwrap();
        let b = kfold_run(&ex).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.report.folds.len(), 3);
        assert_eq!(a.stores.len(), 3);
        assert_eq!(a.report.summary.len(), 1);
        for f in &a.report.folds {
            assert_eq!(f.improv_advin, improv_advin(f.adv_in_test_pre, f.adv_in_test_post));
        }
    }
}
