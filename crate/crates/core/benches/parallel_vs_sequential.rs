use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use switchid::pe_estimation::{correlation_words_up_to, EstimateOptions};
use switchid::testing::{planar_example, random_stable_system};
use switchid::{
    build_hankel_with, estimate_all_markov, generate_pe_input, markov_distance_with, state_correlation_check,
    Execution, MarkovSource, PeSignalConfig,
};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn hankel(c: &mut Criterion) {
    let sys = Arc::new(random_stable_system(&mut ChaCha8Rng::seed_from_u64(0), 4, 2, 2, 2));
    let mut group = c.benchmark_group("hankel_L4_K5");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                // fresh source each time so memoization does not hide the work
                let src = MarkovSource::from_model(sys.clone());
                black_box(build_hankel_with(&src, 4, 5, exec).unwrap())
            })
        });
    }
    group.finish();
}

fn estimation(c: &mut Criterion) {
    let sys = planar_example();
    let w = generate_pe_input(&PeSignalConfig::white(2, 1, 1, 400_000)).unwrap();
    let y = sys.simulate(&w, &DVector::zeros(2)).unwrap().into_outputs();
    let words = correlation_words_up_to(4, 2).unwrap();
    let mut group = c.benchmark_group("estimation_N4e5");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = EstimateOptions { exec, ..EstimateOptions::new(3) };
        group.bench_function(BenchmarkId::new("markov_depth3", name), |b| {
            b.iter(|| black_box(estimate_all_markov(&w, &y, 2, &opts, None).unwrap()))
        });
        group.bench_function(BenchmarkId::new("correlations", name), |b| {
            b.iter(|| black_box(state_correlation_check(&sys, &w, &words, exec).unwrap()))
        });
    }
    group.finish();
}

fn distance(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = Arc::new(random_stable_system(&mut rng, 4, 2, 2, 2));
    let b = Arc::new(random_stable_system(&mut rng, 4, 2, 2, 2));
    let mut group = c.benchmark_group("markov_distance_depth9");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |bch| {
            bch.iter(|| {
                let (sa, sb) = (MarkovSource::from_model(a.clone()), MarkovSource::from_model(b.clone()));
                black_box(markov_distance_with(&sa, &sb, 9, exec).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, hankel, estimation, distance);
criterion_main!(benches);
