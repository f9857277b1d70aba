use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use mi_core::classifiers::{frechet_mean, FrechetOptions};
use mi_core::config::PipelineConfig;
use mi_core::evaluation::loro_cv_features;
use mi_core::features::Task;
use mi_core::par;
use mi_core::pipeline::{preprocess_session, runs_features};
use mi_core::synth::{generate_session, SynthConfig};

fn small_session() -> mi_core::synth::SynthOutput {
    generate_session(&SynthConfig { n_runs: 3, n_trials: 6, calibration_s: 20.0, ..Default::default() }).unwrap()
}

fn features(c: &mut Criterion) {
    let synth = small_session();
    let cfg = PipelineConfig::default();
    let (runs, _) = preprocess_session(&synth.session, &cfg).unwrap();
    let mut g = c.benchmark_group("onset_features");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| runs_features(&runs, &synth.session, Task::Onset, &cfg).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| par::sequential(|| runs_features(&runs, &synth.session, Task::Onset, &cfg).unwrap()))
    });
    g.finish();
}

fn preprocessing(c: &mut Criterion) {
    let synth = small_session();
    let cfg = PipelineConfig::default();
    let mut g = c.benchmark_group("preprocess_session");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| preprocess_session(&synth.session, &cfg).unwrap()));
    g.bench_function("sequential", |b| b.iter(|| par::sequential(|| preprocess_session(&synth.session, &cfg).unwrap())));
    g.finish();
}

fn loro(c: &mut Criterion) {
    let synth = small_session();
    let cfg = PipelineConfig::default();
    let (runs, _) = preprocess_session(&synth.session, &cfg).unwrap();
    let fm = runs_features(&runs, &synth.session, Task::Onset, &cfg).unwrap();
    let ids: Vec<u32> = runs.iter().map(|r| r.run_id()).collect();
    let mut g = c.benchmark_group("loro_cv");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| loro_cv_features(&fm, &ids, Task::Onset, &cfg.dlda, 0.05).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| par::sequential(|| loro_cv_features(&fm, &ids, Task::Onset, &cfg.dlda, 0.05).unwrap()))
    });
    g.finish();
}

fn riemann_mean(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mats: Vec<DMatrix<f64>> = (0..240)
        .map(|_| {
            let a: DMatrix<f64> = DMatrix::from_fn(22, 22, |_, _| StandardNormal.sample(&mut rng));
            &a * a.transpose() + DMatrix::identity(22, 22)
        })
        .collect();
    let opts = FrechetOptions::default();
    let mut g = c.benchmark_group("frechet_mean_22x22");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter_batched(|| mats.clone(), |m| frechet_mean(&m, opts).unwrap(), BatchSize::LargeInput)
    });
    g.bench_function("sequential", |b| {
        b.iter_batched(|| mats.clone(), |m| par::sequential(|| frechet_mean(&m, opts).unwrap()), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, features, preprocessing, loro, riemann_mean);
criterion_main!(benches);
