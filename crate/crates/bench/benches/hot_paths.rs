use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use physadv_bench::lift_fixture;
use physadv_core::physreg::{r_phys, r_phys_general};
use physadv_core::{run_campaign, Algorithm, PredictiveModel, SearchParams};

fn predict(c: &mut Criterion) {
    let (data, _, net) = lift_fixture(1024, 5);
    let mut group = c.benchmark_group("predict");
    group.throughput(Throughput::Elements(data.len() as u64));
    group.bench_function("lift_1024_rows", |b| b.iter(|| net.predict(black_box(data.inputs())).unwrap()));
    group.finish();
}

fn campaign(c: &mut Criterion) {
    let (data, case, net) = lift_fixture(300, 20);
    let anchors = data.subset(&(0..16).collect::<Vec<_>>()).unwrap();
    let mut group = c.benchmark_group("campaign_16_anchors");
    group.sample_size(10);
    for alg in [Algorithm::Pso, Algorithm::Ga, Algorithm::Rs] {
        let params = SearchParams::new(alg, 20, 20, 7);
        group.bench_with_input(BenchmarkId::from_parameter(alg.name()), &params, |b, p| {
            b.iter(|| run_campaign(&net, &anchors, &case.rules, &case.envelope, p).unwrap())
        });
    }
    group.finish();
}

fn rule_cost(c: &mut Criterion) {
    let tuples: Vec<(f64, f64, i8, f64)> = (0..1000)
        .map(|i| {
            let t = i as f64 * 0.37;
            (t.sin() * 10.0, t.cos() * 10.0, (i % 3) as i8 - 1, 0.5)
        })
        .collect();
    let mut group = c.benchmark_group("r_phys");
    group.throughput(Throughput::Elements(tuples.len() as u64));
    group.bench_function("closed_form", |b| {
        b.iter(|| tuples.iter().map(|&(f, g, d, tol)| r_phys(f, g, d, tol)).sum::<f64>())
    });
    group.bench_function("general_form", |b| {
        b.iter(|| tuples.iter().map(|&(f, g, d, tol)| r_phys_general(f, g, d, tol).unwrap()).sum::<f64>())
    });
    group.finish();
}

criterion_group!(benches, predict, campaign, rule_cost);
criterion_main!(benches);
