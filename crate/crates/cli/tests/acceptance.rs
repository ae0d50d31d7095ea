//! Acceptance suite: one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use physadv_core::harness::synth::heat;
use physadv_core::harness::{
    change_rmse, generate_synthetic_case, improv_advin, kfold_run, train_fold, CaseName, Experiment, Pipeline,
    SyntheticCase,
};
use physadv_core::net::gradient_check;
use physadv_core::physreg::{augment_batch, magnitude_order, r_phys, r_phys_general, Assign};
use physadv_core::search::reverify;
use physadv_core::{
    finetune, init_network, run_campaign, train, Algorithm, AxStore, Dataset, FinetuneConfig, NetworkConfig,
    SearchParams, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const ENGINES: [Algorithm; 3] = [Algorithm::Pso, Algorithm::Ga, Algorithm::Rs];
const POPULATION: usize = 20;
const ITERATIONS: usize = 20;
const SIGMA: f64 = 0.05;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lift(seed: u64, sigma: f64) -> (Dataset, SyntheticCase) {
    generate_synthetic_case(CaseName::LiftBalance, 300, sigma, seed).unwrap()
}

/// Deliberately short training so the network still breaks the rules.
fn under_trained() -> TrainConfig {
    TrainConfig {
        epochs: 20,
        batch_size: 32,
        learning_rate: 1e-3,
        weight_decay: 0.0,
        seed: 0,
    }
}

fn pipeline(train: TrainConfig) -> Pipeline {
    Pipeline {
        hidden: vec![32, 16],
        finetune: FinetuneConfig::from_train(&train, 1.0),
        train,
        engines: ENGINES
            .iter()
            .map(|&a| SearchParams::new(a, POPULATION, ITERATIONS, 0))
            .collect(),
        augmentation_p: 0.0,
    }
}

fn c1_metrics() -> Outcome {
    let a = improv_advin(5267, 1012).unwrap();
    let b = improv_advin(509, 0).unwrap();
    let c = change_rmse(0.498, 0.996).unwrap();
    let d = change_rmse(0.498, 0.444).unwrap();
    let ok = (a - 80.78).abs() < 0.01 && (b - 100.0).abs() < 0.01 && (c - 100.0).abs() < 0.01 && (d + 10.84).abs() < 0.01;
    check(ok, format!("improv {a:.2}% / {b:.2}%, change {c:+.2}% / {d:+.2}%"))
}

fn c2_forms_agree() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max_diff: f64 = 0.0;
    let mut per_d = [0usize; 3];
    for _ in 0..1_000_000 {
        let d: i8 = rng.gen_range(-1..=1);
        per_d[(d + 1) as usize] += 1;
        let fx = rng.gen_range(-50.0..50.0);
        // half the draws land within a few tolerances of the parent
        let tol = rng.gen_range(0.0..5.0);
        let fxh = if rng.gen_bool(0.5) {
            fx + rng.gen_range(-3.0 * tol - 1e-9..3.0 * tol + 1e-9)
        } else {
            rng.gen_range(-50.0..50.0)
        };
        let diff = (r_phys(fx, fxh, d, tol) - r_phys_general(fx, fxh, d, tol).unwrap()).abs();
        max_diff = max_diff.max(diff);
    }
    let elapsed = start.elapsed();
    check(
        max_diff < 1e-12 && per_d.iter().all(|&n| n > 0) && elapsed < Duration::from_secs(10),
        format!("max |diff| {max_diff:.2e} over 10^6 tuples (d counts {per_d:?}) in {elapsed:.2?}"),
    )
}

/// Per-seed results of the end-to-end run on the under-trained network.
struct EndToEnd {
    adv_in: [Vec<usize>; 3],
    reverified: usize,
    failed_reverify: usize,
    lambda_steps: usize,
    lambda_violations: usize,
    elapsed: Duration,
}

fn end_to_end() -> EndToEnd {
    let start = Instant::now();
    let mut out = EndToEnd {
        adv_in: [vec![], vec![], vec![]],
        reverified: 0,
        failed_reverify: 0,
        lambda_steps: 0,
        lambda_violations: 0,
        elapsed: Duration::ZERO,
    };
    for seed in SEEDS {
        let (data, case) = lift(seed, SIGMA);
        let p = pipeline(under_trained());
        let net = train_fold(&p, &data, &[], seed).unwrap();
        let mut stores: Vec<AxStore> = Vec::new();
        for (e, params) in p.engines.iter().enumerate() {
            let params = SearchParams { seed, ..params.clone() };
            let (store, stats) = run_campaign(&net, &data, &case.rules, &case.envelope, &params).unwrap();
            out.adv_in[e].push(stats.adv_in);
            for ax in store.iter() {
                if reverify(ax, &net, &data, &case.rules, &case.envelope).unwrap() {
                    out.reverified += 1;
                } else {
                    out.failed_reverify += 1;
                }
            }
            stores.push(store);
        }
        let cfg = FinetuneConfig { seed, ..p.finetune.clone() };
        for store in &stores {
            let ft = finetune(&net, &data, store, &cfg).unwrap();
            let base = magnitude_order(ft.history.base_data_loss).unwrap();
            for s in ft.history.steps.iter().filter(|s| s.reg_cost > 0.0) {
                out.lambda_steps += 1;
                if (magnitude_order(s.lambda * s.reg_cost).unwrap() - base).abs() > 1 {
                    out.lambda_violations += 1;
                }
            }
        }
    }
    out.elapsed = start.elapsed();
    out
}

fn c3_lambda(e2e: &EndToEnd) -> Outcome {
    let a = magnitude_order(0.004).unwrap();
    let b = magnitude_order(105.0).unwrap();
    check(
        a == -3 && b == 2 && e2e.lambda_steps > 0 && e2e.lambda_violations == 0,
        format!(
            "magnitude_order(0.004) = {a}, magnitude_order(105) = {b}; λ aligned on {}/{} regularized batches",
            e2e.lambda_steps - e2e.lambda_violations,
            e2e.lambda_steps
        ),
    )
}

fn c4_gradients() -> Outcome {
    let start = Instant::now();
    let (data, _) = lift(9, SIGMA);
    let batch = data.subset(&(0..16).collect::<Vec<_>>()).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let seeds = 20;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let depth = rng.gen_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(2..=12)).collect();
        let mut net = init_network(NetworkConfig {
            input_dim: data.schema.input_dim(),
            output_dim: data.schema.output_dim(),
            hidden,
            seed,
        })
        .unwrap();
        net.set_scaler(physadv_core::fit_scaler(&data).unwrap()).unwrap();
        let r = gradient_check(&net, &batch, 5e-4, 1e-5).unwrap();
        worst = worst.max(r.max_relative_error);
        checked += r.checked;
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!("max relative error {worst:.2e} over {seeds} seeds ({checked} parameters compared) in {elapsed:.2?}"),
    )
}

fn c5_oracle_soundness() -> Outcome {
    let start = Instant::now();
    let mut total = 0;
    let mut generated = 0;
    for seed in SEEDS {
        let (data, case) = lift(seed, 0.0);
        let oracle = case.oracle();
        for a in ENGINES {
            let params = SearchParams::new(a, POPULATION, ITERATIONS, seed);
            let (_, stats) = run_campaign(&oracle, &data, &case.rules, &case.envelope, &params).unwrap();
            total += stats.adv_in;
            generated += stats.generated;
        }
    }
    let elapsed = start.elapsed();
    check(
        total == 0 && elapsed < Duration::from_secs(120),
        format!("#AdvIn = {total} over {generated} generated inputs (3 engines × 5 seeds) in {elapsed:.2?}"),
    )
}

fn mean(v: &[usize]) -> f64 {
    v.iter().sum::<usize>() as f64 / v.len() as f64
}

fn c6_direction(e2e: &EndToEnd) -> Outcome {
    let (pso, ga, rs) = (mean(&e2e.adv_in[0]), mean(&e2e.adv_in[1]), mean(&e2e.adv_in[2]));
    check(
        pso >= rs && e2e.failed_reverify == 0 && e2e.reverified > 0 && e2e.elapsed < Duration::from_secs(600),
        format!(
            "mean unique #AdvIn PSO {pso:.1} ≥ RS {rs:.1} (GA {ga:.1}); {} / {} stored examples re-verify; run took {:.2?}",
            e2e.reverified,
            e2e.reverified + e2e.failed_reverify,
            e2e.elapsed
        ),
    )
}

fn kfold_pipeline() -> Pipeline {
    pipeline(TrainConfig {
        epochs: 50,
        ..under_trained()
    })
}

fn c7_finetune_repairs() -> Outcome {
    let start = Instant::now();
    let p = kfold_pipeline();
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for seed in SEEDS {
        let (data, case) = lift(seed, SIGMA);
        let ex = Experiment {
            system: "lift-balance".into(),
            data: &data,
            rules: &case.rules,
            envelope: &case.envelope,
            augmentation: &[],
            pipeline: &p,
            k: 3,
            runs: 1,
            seed,
            digest: String::new(),
        };
        let report = kfold_run(&ex).unwrap().report;
        for s in &report.summary {
            let e = ENGINES.iter().position(|&a| a == s.engine).unwrap();
            if let Some(v) = s.improv_advin {
                sums[e] += v;
                counts[e] += 1;
            }
        }
    }
    let means: Vec<f64> = (0..3).map(|e| sums[e] / counts[e].max(1) as f64).collect();
    let elapsed = start.elapsed();
    check(
        counts.iter().all(|&c| c == SEEDS.len()) && means.iter().all(|&m| m >= 50.0) && elapsed < Duration::from_secs(900),
        format!(
            "%Improv_AdvIn PSO {:.1}, GA {:.1}, RS {:.1} (held-out, 3-fold, 5 seeds) in {elapsed:.2?}",
            means[0], means[1], means[2]
        ),
    )
}

fn c8_empty_store() -> Outcome {
    let (data, _) = lift(5, SIGMA);
    let p = pipeline(under_trained());
    let start = train_fold(&p, &data, &[], 5).unwrap();
    let cfg = FinetuneConfig { seed: 11, ..p.finetune.clone() };
    let out = finetune(&start, &data, &AxStore::default(), &cfg).unwrap();
    let mut plain = start.clone();
    train(
        &mut plain,
        &data,
        &TrainConfig {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            seed: cfg.seed,
        },
        None,
    )
    .unwrap();
    let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()) && a.len() == b.len();
    let ok = same(out.last.params(), plain.params()) && same(out.best.params(), plain.params());
    check(ok, format!("{} parameters bit-identical to plain training", plain.num_params()))
}

fn physadv(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_physadv"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn c9_reproducible() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    physadv(dir, &["synth", "--case", "lift-balance", "--n", "300", "--sigma", "0.05", "--seed", "1"]);
    let run = |out: &str| {
        let set_out = format!("output_dir=\"{out}\"");
        physadv(
            dir,
            &["kfold", "--set", &set_out, "--set", "kfold.k=3", "--set", "kfold.runs=1", "--set", "train.epochs=50"],
        );
        tree(&dir.join(out))
    };
    let a = run("first");
    let b = run("second");
    let stores = a.iter().filter(|(n, _)| n.ends_with(".jsonl")).count();
    let reports = a.iter().filter(|(n, _)| n.ends_with(".json") || n.ends_with(".csv")).count();
    check(
        a == b && stores > 0 && reports == 2,
        format!("{reports} report files and {stores} example stores byte-identical across two invocations"),
    )
}

fn c10_augmentation() -> Outcome {
    let (data, case) = generate_synthetic_case(CaseName::HeatBalance, 400, 0.0, 4).unwrap();
    let oracle = case.oracle();
    let rule = |id: &str| case.augmentation.iter().find(|r| r.id == id).unwrap().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    // shift: applied by hand so the sampled t is known
    let shift = rule("A1");
    let (lo, hi) = shift.range.unwrap();
    let mut shifted = 0;
    let mut worst_oracle: f64 = 0.0;
    let mut exact_shift = true;
    for i in 0..data.len() {
        let (x, y) = (data.inputs().row(i), data.outputs().row(i));
        if !shift.applies_to(x) {
            continue;
        }
        let t = rng.gen_range(lo..=hi);
        let (nx, ny) = shift.apply(x, y, t);
        shifted += 1;
        exact_shift &= ny.iter().zip(y).all(|(a, b)| *a == b + t);
        let g = oracle.eval(&nx);
        worst_oracle = worst_oracle.max(g.iter().zip(&ny).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }

    // boundary rules pin every target to the designated feature
    let mut pinned = true;
    let mut boundary_rows = 0;
    for id in ["A2", "A3", "A4"] {
        let r = rule(id);
        let feature = match r.targets[0].assign {
            Assign::Feature(f) => f,
            _ => unreachable!("boundary rules copy a feature"),
        };
        for i in 0..data.len() {
            let (x, y) = (data.inputs().row(i), data.outputs().row(i));
            if r.applies_to(x) {
                let (nx, ny) = r.apply(x, y, 0.0);
                boundary_rows += 1;
                pinned &= ny.iter().all(|v| *v == nx[feature]);
            }
        }
    }
    let a4 = rule("A4");
    let a4_feature = matches!(a4.targets[0].assign, Assign::Feature(f) if f == heat::TAT);

    // p = 0 leaves the batch untouched
    let mut x = data.inputs().clone();
    let mut y = data.outputs().clone();
    augment_batch(&mut x, &mut y, &case.augmentation, 0.0, &data.schema, &mut rng);
    let identity = x == *data.inputs() && y == *data.outputs();

    check(
        shifted > 0 && exact_shift && worst_oracle < 1e-9 && boundary_rows > 0 && pinned && a4_feature && identity,
        format!(
            "shift on {shifted} rows: target moved by exactly t, oracle gap {worst_oracle:.1e}; \
             {boundary_rows} boundary rows pinned; p = 0 identity: {identity}"
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        results.push((id, name, r));
    };

    let e2e = catch_unwind(end_to_end).ok();
    let missing = || Err("end-to-end run panicked".to_string());
    run(1, "metric fidelity", &c1_metrics);
    run(2, "closed form equals general form", &c2_forms_agree);
    run(3, "magnitude order and λ alignment", &|| e2e.as_ref().map_or_else(missing, c3_lambda));
    run(4, "gradient oracle", &c4_gradients);
    run(5, "testing soundness on the oracle", &c5_oracle_soundness);
    run(6, "PSO reveals at least as many as RS", &|| e2e.as_ref().map_or_else(missing, c6_direction));
    run(7, "fine-tuning repairs held-out violations", &c7_finetune_repairs);
    run(8, "empty-store reduction", &c8_empty_store);
    run(9, "reproducible kfold artifacts", &c9_reproducible);
    run(10, "augmentation contract", &c10_augmentation);

    println!();
    let mut failed = 0;
    for (id, name, r) in &results {
        match r {
            Ok(d) => println!("criterion {id:>2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {d}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1?}",
        results.len() - failed,
        started.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
