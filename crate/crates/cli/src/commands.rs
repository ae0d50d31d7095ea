use std::fs;
use std::path::{Path, PathBuf};

use physadv_core::harness::{
    change_rmse, generate_synthetic_case, ga_grid, grid_search, improv_advin, kfold_run, pso_grid, random_search, rmse,
    train_fold, CaseName, Experiment, FnnSpace,
};
use physadv_core::search::derive_seed;
use physadv_core::{finetune, run_campaign, Algorithm, AxStore, CampaignStats, Network, PredictiveModel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{
    Config, DataSection, Digests, FilesSection, FinetuneSection, KfoldSection, Loaded, NetworkSection, SearchSection,
    TrainSection, TuneSection, DEFAULT_CONFIG,
};
use crate::decl::{augmentation_decl, envelope_decl, rules_decl, write_toml};
use crate::error::{config_err, CliError, CliResult};

fn short(d: &str) -> &str {
    Digests::short(d)
}

fn engines_tag(engines: &[Algorithm]) -> String {
    engines.iter().map(|e| e.name()).collect::<Vec<_>>().join("-")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn model_path(l: &Loaded) -> PathBuf {
    l.output_dir.join(format!("model-{}.json", short(&l.digests.model)))
}

fn store_path(l: &Loaded, engine: Algorithm) -> PathBuf {
    l.output_dir.join(format!("ax-{engine}-{}.jsonl", short(&l.digests.campaign)))
}

fn tuned_path(l: &Loaded, engine: Algorithm) -> PathBuf {
    l.output_dir.join(format!("model-ft-{engine}-{}.json", short(&l.digests.finetune)))
}

fn load_network(path: &Path, hint: &str) -> CliResult<Network> {
    if !path.exists() {
        return Err(CliError::Runtime(format!("{} not found; run `{hint}` first", path.display())));
    }
    Ok(Network::load(path)?)
}

/// Long-format rows `SYS, ALG, G, dataset, metric, value`.
struct Table {
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(path: &Path) -> CliResult<Self> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Runtime(e.to_string()))?;
        writer
            .write_record(["SYS", "ALG", "G", "dataset", "metric", "value"])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Self { writer })
    }

    fn row(&mut self, sys: &str, alg: Algorithm, g: usize, dataset: &str, metric: &str, value: String) -> CliResult<()> {
        self.writer
            .write_record([sys, alg.name(), &g.to_string(), dataset, metric, &value])
            .map_err(|e| CliError::Runtime(e.to_string()))
    }

    fn finish(mut self) -> CliResult<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn synth(case: CaseName, n: usize, sigma: f64, seed: u64, out: &Path) -> CliResult<PathBuf> {
    let (data, case_def) = generate_synthetic_case(case, n, sigma, seed).map_err(|e| config_err(e.to_string()))?;
    fs::create_dir_all(out)?;
    let name = case.as_str();
    let data_file = format!("{name}.csv");
    let rules_file = format!("{name}-rules.toml");
    let envelope_file = format!("{name}-envelope.toml");
    data.write_csv(out.join(&data_file))?;
    write_toml(&out.join(&rules_file), &rules_decl(&case_def.schema, &case_def.rules))?;
    write_toml(&out.join(&envelope_file), &envelope_decl(&case_def.schema, &case_def.envelope))?;
    let augmentation = if case_def.augmentation.is_empty() {
        None
    } else {
        let f = format!("{name}-augmentation.toml");
        write_toml(&out.join(&f), &augmentation_decl(&case_def.schema, &case_def.augmentation))?;
        Some(PathBuf::from(f))
    };
    let (hidden, epochs) = match case {
        CaseName::LiftBalance => (vec![32, 16], 50),
        CaseName::HeatBalance => (vec![64, 32], 100),
    };
    let config = Config {
        seed,
        output_dir: PathBuf::from("out"),
        data: DataSection {
            system: name.to_string(),
            path: PathBuf::from(data_file),
            targets: case_def.schema.targets.clone(),
            features: case_def.schema.features.clone(),
        },
        files: FilesSection {
            rules: PathBuf::from(rules_file),
            envelope: PathBuf::from(envelope_file),
            augmentation,
        },
        network: NetworkSection { hidden },
        train: TrainSection {
            epochs,
            batch_size: 32,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            augmentation_p: 0.0,
        },
        search: SearchSection {
            engines: vec![Algorithm::Pso, Algorithm::Ga, Algorithm::Rs],
            population: 20,
            iterations: 20,
            pso: Default::default(),
            ga: Default::default(),
        },
        finetune: FinetuneSection {
            beta: Some(1.0),
            ..Default::default()
        },
        kfold: KfoldSection::default(),
        tune: TuneSection::default(),
    };
    let path = out.join(DEFAULT_CONFIG);
    write_toml(&path, &config)?;
    println!("wrote {n} rows of {name} to {}", out.join(format!("{name}.csv")).display());
    println!("config: {}", path.display());
    Ok(path)
}

pub fn train(l: &Loaded) -> CliResult<PathBuf> {
    fs::create_dir_all(&l.output_dir)?;
    let net = train_fold(&l.config.pipeline(), &l.dataset, &l.augmentation, l.config.seed)?;
    let err = rmse(&net.predict(l.dataset.inputs())?, l.dataset.outputs())?;
    let path = model_path(l);
    net.save(&path)?;
    for (t, e) in l.dataset.schema.targets.iter().zip(&err) {
        println!("training RMSE {t}: {e:.6}");
    }
    println!("model: {}", path.display());
    Ok(path)
}

#[derive(Serialize)]
struct StatsReport<'a> {
    system: &'a str,
    digest: &'a str,
    model: String,
    campaigns: Vec<CampaignStats>,
}

fn write_stats_csv(path: &Path, system: &str, campaigns: &[CampaignStats]) -> CliResult<()> {
    let mut t = Table::create(path)?;
    for s in campaigns {
        let g = s.generated;
        let a = s.algorithm;
        t.row(system, a, g, "anchors", "valid", s.valid.to_string())?;
        t.row(system, a, g, "anchors", "val_in_pct", format!("{:.2}", s.val_in_pct))?;
        t.row(system, a, g, "anchors", "adv_total", s.adv_total.to_string())?;
        t.row(system, a, g, "anchors", "adv_in", s.adv_in.to_string())?;
        t.row(system, a, g, "anchors", "dup_in_pct", format!("{:.2}", s.dup_in_pct))?;
        for (kind, n) in &s.adv_in_by_type {
            t.row(system, a, g, "anchors", &format!("adv_in:{kind}"), n.to_string())?;
        }
    }
    t.finish()
}

pub fn test(l: &Loaded) -> CliResult<Vec<CampaignStats>> {
    let net = load_network(&model_path(l), "train")?;
    let mut campaigns = Vec::new();
    for &engine in &l.config.search.engines {
        let params = l.config.search_params(engine);
        let (store, stats) = run_campaign(&net, &l.dataset, &l.rules, &l.envelope, &params)?;
        store.write_jsonl(store_path(l, engine))?;
        campaigns.push(stats);
    }
    let tag = engines_tag(&l.config.search.engines);
    let d = short(&l.digests.campaign);
    let report = StatsReport {
        system: &l.config.data.system,
        digest: &l.digests.campaign,
        model: format!("model-{}.json", short(&l.digests.model)),
        campaigns,
    };
    write_json(&l.output_dir.join(format!("stats-{tag}-{d}.json")), &report)?;
    write_stats_csv(&l.output_dir.join(format!("stats-{tag}-{d}.csv")), &l.config.data.system, &report.campaigns)?;
    println!("{:<5} {:>10} {:>8} {:>8} {:>8}", "ALG", "G", "%ValIn", "#AdvIn", "%DupIn");
    for s in &report.campaigns {
        println!(
            "{:<5} {:>10} {:>8.2} {:>8} {:>8.2}",
            s.algorithm.name(),
            s.generated,
            s.val_in_pct,
            s.adv_in,
            s.dup_in_pct
        );
    }
    Ok(report.campaigns)
}

pub fn finetune_cmd(l: &Loaded) -> CliResult<()> {
    let net = load_network(&model_path(l), "train")?;
    let cfg = l.config.finetune_config();
    for &engine in &l.config.search.engines {
        let path = store_path(l, engine);
        if !path.exists() {
            return Err(CliError::Runtime(format!("{} not found; run `test` first", path.display())));
        }
        let store = AxStore::read_jsonl(&path)?;
        let out = finetune(&net, &l.dataset, &store, &cfg)?;
        let d = short(&l.digests.finetune);
        out.best.save(tuned_path(l, engine))?;
        out.history
            .write_csv(l.output_dir.join(format!("finetune-{engine}-{d}.csv")))?;
        let best = &out.history.checkpoints[out.history.best];
        println!(
            "{engine}: {} examples, best epoch {} (data loss {:.6}, violation cost {:.6})",
            store.len(),
            best.epoch,
            best.data_loss,
            best.reg_cost
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    engine: Algorithm,
    generated: usize,
    adv_in_pre: usize,
    adv_in_post: usize,
    improv_advin: Option<f64>,
    rmse_pre: Vec<f64>,
    rmse_post: Vec<f64>,
    change_rmse: Vec<f64>,
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    system: &'a str,
    digest: &'a str,
    targets: &'a [String],
    engines: Vec<Evaluation>,
}

pub fn evaluate(l: &Loaded) -> CliResult<()> {
    let base = load_network(&model_path(l), "train")?;
    let rmse_pre = rmse(&base.predict(l.dataset.inputs())?, l.dataset.outputs())?;
    let mut rows = Vec::new();
    for &engine in &l.config.search.engines {
        let tuned = load_network(&tuned_path(l, engine), "finetune")?;
        let params = l.config.search_params(engine);
        let (_, pre) = run_campaign(&base, &l.dataset, &l.rules, &l.envelope, &params)?;
        let (_, post) = run_campaign(&tuned, &l.dataset, &l.rules, &l.envelope, &params)?;
        let rmse_post = rmse(&tuned.predict(l.dataset.inputs())?, l.dataset.outputs())?;
        let change = rmse_pre
            .iter()
            .zip(&rmse_post)
            .map(|(&a, &b)| change_rmse(a, b))
            .collect::<physadv_core::Result<Vec<f64>>>()?;
        rows.push(Evaluation {
            engine,
            generated: pre.generated,
            adv_in_pre: pre.adv_in,
            adv_in_post: post.adv_in,
            improv_advin: improv_advin(pre.adv_in, post.adv_in),
            rmse_pre: rmse_pre.clone(),
            rmse_post,
            change_rmse: change,
        });
    }
    let report = EvaluationReport {
        system: &l.config.data.system,
        digest: &l.digests.finetune,
        targets: &l.dataset.schema.targets,
        engines: rows,
    };
    let tag = engines_tag(&l.config.search.engines);
    let d = short(&l.digests.finetune);
    write_json(&l.output_dir.join(format!("evaluate-{tag}-{d}.json")), &report)?;
    let mut t = Table::create(&l.output_dir.join(format!("evaluate-{tag}-{d}.csv")))?;
    let sys = report.system;
    for e in &report.engines {
        let g = e.generated;
        t.row(sys, e.engine, g, "anchors", "adv_in_pre", e.adv_in_pre.to_string())?;
        t.row(sys, e.engine, g, "anchors", "adv_in_post", e.adv_in_post.to_string())?;
        let improv = e.improv_advin.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
        t.row(sys, e.engine, g, "anchors", "improv_advin_pct", improv)?;
        for (i, name) in report.targets.iter().enumerate() {
            t.row(sys, e.engine, g, "anchors", &format!("rmse_pre:{name}"), format!("{:.6}", e.rmse_pre[i]))?;
            t.row(sys, e.engine, g, "anchors", &format!("rmse_post:{name}"), format!("{:.6}", e.rmse_post[i]))?;
            t.row(sys, e.engine, g, "anchors", &format!("change_rmse_pct:{name}"), format!("{:.2}", e.change_rmse[i]))?;
        }
    }
    t.finish()?;
    println!("{:<5} {:>8} {:>8} {:>10}", "ALG", "pre", "post", "%Improv");
    for e in &report.engines {
        let improv = e.improv_advin.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
        println!("{:<5} {:>8} {:>8} {:>10}", e.engine.name(), e.adv_in_pre, e.adv_in_post, improv);
    }
    Ok(())
}

pub fn kfold(l: &Loaded) -> CliResult<PathBuf> {
    fs::create_dir_all(&l.output_dir)?;
    let pipeline = l.config.pipeline();
    let ex = Experiment {
        system: l.config.data.system.clone(),
        data: &l.dataset,
        rules: &l.rules,
        envelope: &l.envelope,
        augmentation: &l.augmentation,
        pipeline: &pipeline,
        k: l.config.kfold.k,
        runs: l.config.kfold.runs,
        seed: l.config.seed,
        digest: l.digests.full.clone(),
    };
    let out = kfold_run(&ex)?;
    let d = short(&l.digests.full);
    let report = l.output_dir.join(format!("kfold-{d}.json"));
    out.report.write_json(&report)?;
    out.report.write_csv(l.output_dir.join(format!("kfold-{d}.csv")))?;
    let ax_dir = l.output_dir.join(format!("kfold-{d}-ax"));
    fs::create_dir_all(&ax_dir)?;
    for s in &out.stores {
        s.store
            .write_jsonl(ax_dir.join(format!("run{}-fold{}-{}.jsonl", s.run, s.fold, s.engine)))?;
    }
    println!("{:<5} {:>10} {:>10} {:>10} {:>10}", "ALG", "pre", "post", "%Improv", "%ΔRMSE");
    for s in &out.report.summary {
        let improv = s.improv_advin.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
        let change = s.change_rmse.iter().map(|c| format!("{c:+.2}")).collect::<Vec<_>>().join("/");
        println!(
            "{:<5} {:>10.1} {:>10.1} {:>10} {:>10}",
            s.engine.name(),
            s.adv_in_test_pre,
            s.adv_in_test_post,
            improv,
            change
        );
    }
    println!("report: {}", report.display());
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TuneKind {
    // network hyperparameters, scored by bootstrap RMSE
    Random,
    // engine hyperparameters, scored by unique adversarial inputs on a probe campaign
    Grid,
}

pub fn tune(l: &Loaded, kind: TuneKind) -> CliResult<PathBuf> {
    fs::create_dir_all(&l.output_dir)?;
    let t = &l.config.tune;
    let d = short(&l.digests.full);
    let path = match kind {
        TuneKind::Random => {
            let out = random_search(&FnnSpace::default(), &l.dataset, t.budget, t.repeats, l.config.seed)?;
            println!("best bootstrap RMSE {:.6}: {:?}", out.score, out.best);
            let path = l.output_dir.join(format!("tune-random-{d}.json"));
            write_json(&path, &out)?;
            path
        }
        TuneKind::Grid => {
            let engine = match l.config.search.engines.as_slice() {
                [e] => *e,
                _ => return Err(config_err("grid tuning needs exactly one --engine (pso or ga)")),
            };
            let net = train_fold(&l.config.pipeline(), &l.dataset, &l.augmentation, l.config.seed)?;
            let mut idx: Vec<usize> = (0..l.dataset.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(l.config.seed, &[7])));
            idx.truncate(t.probe_anchors);
            idx.sort_unstable();
            let probe = l.dataset.subset(&idx)?;
            let base = l.config.search_params(engine);
            let score_of = |params: &physadv_core::SearchParams| -> physadv_core::Result<f64> {
                let (_, s) = run_campaign(&net, &probe, &l.rules, &l.envelope, params)?;
                Ok(s.adv_in as f64)
            };
            let path = l.output_dir.join(format!("tune-grid-{engine}-{d}.json"));
            match engine {
                Algorithm::Pso => {
                    let out = grid_search(pso_grid(), t.budget, l.config.seed, |p| {
                        score_of(&physadv_core::SearchParams { pso: p.clone(), ..base.clone() })
                    })?;
                    println!("best #AdvIn {}: {:?}", out.score, out.best);
                    write_json(&path, &out)?;
                }
                Algorithm::Ga => {
                    let out = grid_search(ga_grid(), t.budget, l.config.seed, |p| {
                        score_of(&physadv_core::SearchParams { ga: p.clone(), ..base.clone() })
                    })?;
                    println!("best #AdvIn {}: {:?}", out.score, out.best);
                    write_json(&path, &out)?;
                }
                Algorithm::Rs => return Err(config_err("random sampling has no hyperparameters to tune")),
            }
            path
        }
    };
    println!("report: {}", path.display());
    Ok(path)
}
