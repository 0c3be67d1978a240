use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use verispace_core::presets::{satellite_scenario, SatelliteScope};
use verispace_core::sampler::{propose, random_tree, EXCHANGE_PROBABILITY};
use verispace_core::treespace::{Valuator, ValuatorPool};
use verispace_core::{Evidence, PtConfig, PtOptimizer};

fn inference(c: &mut Criterion) {
    let scn = satellite_scenario(SatelliteScope::Full, "Low").unwrap();
    let net = scn.network();
    let target = net.targets()[0].clone();
    let mut ev = Evidence::new();
    for (i, a) in net.activity_scope().iter().enumerate().take(6) {
        ev.insert(a.clone(), i % 3 != 0);
    }
    c.bench_function("posterior/satellite-full/6 observations", |b| {
        b.iter(|| net.posterior(&ev, &target).unwrap())
    });
}

fn valuation(c: &mut Criterion) {
    let scn = satellite_scenario(SatelliteScope::Medium, "Low-high").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut val = Valuator::new(&scn);
    let mut tree = random_tree(scn.initial_state(), 5, &mut rng);
    // Posterior cache warmed as it would be mid-search.
    for _ in 0..2000 {
        tree = propose(&tree, &mut rng, EXCHANGE_PROBABILITY).0;
        val.value(&tree).unwrap();
    }
    c.bench_function("value/satellite-medium/depth 5", |b| {
        b.iter_batched(
            || {
                tree = propose(&tree, &mut rng, EXCHANGE_PROBABILITY).0;
                tree.clone()
            },
            |t| val.value(&t).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn tempering(c: &mut Criterion) {
    let scn = satellite_scenario(SatelliteScope::Small, "Low").unwrap();
    let opt = PtOptimizer::new(PtConfig {
        convergence_length: 200,
        ..PtConfig::default()
    });
    let origin = scn.initial_state();
    let mut group = c.benchmark_group("pt");
    group.sample_size(10);
    group.bench_function("satellite-small/L=200", |b| {
        b.iter(|| opt.run(&origin, 0, &mut ValuatorPool::new(&scn)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, inference, valuation, tempering);
criterion_main!(benches);
