use criterion::{criterion_group, criterion_main, Criterion};
use hypercollapse::limits::{coupled_family, lambda2};
use hypercollapse::rng::seeded_rng;
use hypercollapse::structure::graph_envelope;
use hypercollapse::{BorelLaw, MixingDistribution, StructureProfile};

fn profiles(c: &mut Criterion) {
    let mut group = c.benchmark_group("structure");
    group.sample_size(20);
    for (name, coeffs) in [
        ("bicritical", vec![0.1, 0.2, 0.7]),
        ("graph", vec![0.0, 1.0]),
        ("degree-200", {
            let mut v = vec![0.0; 200];
            v[0] = 0.001;
            v[2] = 0.005;
            v[199] = 0.994;
            v
        }),
    ] {
        let m = MixingDistribution::probability(coeffs).unwrap();
        group.bench_function(format!("analyze/{name}"), |b| b.iter(|| StructureProfile::with_defaults(&m).unwrap()));
    }
    let m = MixingDistribution::probability(vec![0.1, 0.2, 0.7]).unwrap();
    let p = StructureProfile::with_defaults(&m).unwrap();
    group.bench_function("lower-query", |b| b.iter(|| p.lower(0.7)));
    group.bench_function("graph-envelope", |b| b.iter(|| graph_envelope(0.5, 1.7)));
    group.finish();
}

fn limits(c: &mut Criterion) {
    let law = BorelLaw::new(0.9).unwrap();
    c.bench_function("borel/pmf-1..1000", |b| b.iter(|| (1..=1000).map(|n| law.pmf(n)).sum::<f64>()));
    let m = MixingDistribution::probability(vec![0.3, 0.7]).unwrap();
    c.bench_function("lambda2/N=1e6", |b| b.iter(|| lambda2(&m, 1_000_000, 10)));
    let grid = [0.3, 0.5, 0.8, 1.0, 1.5];
    let mut rng = seeded_rng(4, 0);
    c.bench_function("walks/coupled-family", |b| b.iter(|| coupled_family(&grid, 1.0, 10_000, &mut rng).unwrap()));
}

criterion_group!(benches, profiles, limits);
criterion_main!(benches);
