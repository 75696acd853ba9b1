use std::hint::black_box;

use arena25::a3c::{apply_update, OptimizerState};
use arena25::eval::run_episode;
use arena25::nn::{backward, forward, forward_rollout, Gradients, LossWeights, LstmState};
use arena25::render::render_frame;
use arena25::sim::advance_frame;
use arena25::{ActionId, BasicAction, Env, EnvConfig, Policy};
use arena25_bench::{default_params, idle_inputs, warmed_env};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn simulation(c: &mut Criterion) {
    let (env, _) = warmed_env(10);
    let state = env.state().clone();
    c.bench_function("advance_frame", |b| {
        b.iter_batched_ref(
            || state.clone(),
            |s| advance_frame(s, ActionId::Basic(BasicAction::Right), ActionId::IDLE),
            BatchSize::SmallInput,
        )
    });
    let rc = env.config().render;
    c.bench_function("render_frame", |b| b.iter(|| render_frame(black_box(&state), &rc)));
    c.bench_function("random_episode_advanced", |b| {
        let mut env = Env::new(EnvConfig::default()).unwrap();
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            run_episode(&Policy::Random, &mut env, seed).unwrap()
        })
    });
}

fn network(c: &mut Criterion) {
    let params = default_params(true, true);
    let inputs = idle_inputs(20);
    let lstm = LstmState::for_params(&params);
    c.bench_function("forward_step", |b| b.iter(|| forward(&params, black_box(&inputs[0]), &lstm).unwrap()));

    let caches = forward_rollout(&params, &inputs, &lstm).unwrap();
    let actions: Vec<usize> = (0..20).map(|i| i % 16).collect();
    let adv = vec![0.5; 20];
    let ret = vec![1.0; 20];
    let w = LossWeights {
        beta: 0.01,
        value_coef: 0.5,
    };
    let mut g = c.benchmark_group("rollout_20");
    g.sample_size(20);
    g.bench_function("forward", |b| b.iter(|| forward_rollout(&params, &inputs, &lstm).unwrap()));
    g.bench_function("backward", |b| {
        b.iter(|| backward(&params, &caches, &actions, &adv, &ret, w).unwrap())
    });
    g.finish();

    let grads = Gradients::zeros_like(&params);
    c.bench_function("rmsprop_update", |b| {
        let mut p = params.clone();
        let mut opt = OptimizerState::new(&p, 0.99, 1e-5);
        b.iter(|| apply_update(&mut p, &mut opt, &grads, 1e-4).unwrap())
    });
}

criterion_group!(benches, simulation, network);
criterion_main!(benches);
