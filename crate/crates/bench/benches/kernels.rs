use std::hint::black_box;

use asht_core::chernoff::{kl_matrix, maximin_action_distribution};
use asht_core::env::presets;
use asht_core::nn::{CellKind, Encoder, EncoderConfig, HeadKind};
use asht_core::rng::episode_stream;
use asht_core::{BeliefState, ChernoffPolicy, KlMatrix};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng;

fn belief_update(c: &mut Criterion) {
    let env = presets::four_sensor();
    let mut rng = episode_stream(1, 0);
    let steps: Vec<(usize, usize)> = (0..50)
        .map(|_| (rng.random_range(0..4), rng.random_range(0..2)))
        .collect();
    c.bench_function("belief_update_16_hypotheses_x50", |b| {
        b.iter(|| {
            let mut s = BeliefState::uniform(16);
            for &(a, y) in &steps {
                s.update_in_place(a, y, &env.train).unwrap();
            }
            black_box(s.error_probability())
        })
    });
}

fn maximin(c: &mut Criterion) {
    let mut rng = episode_stream(2, 0);
    let matrices: Vec<KlMatrix> = (0..64)
        .map(|_| KlMatrix {
            i_hat: 0,
            alternatives: (1..9).collect(),
            d: (0..5).map(|_| (0..8).map(|_| rng.random_range(0.0..2.0)).collect()).collect(),
        })
        .collect();
    c.bench_function("maximin_5x8_x64", |b| {
        b.iter(|| {
            for m in &matrices {
                black_box(maximin_action_distribution(m));
            }
        })
    });
    let env = presets::four_sensor();
    c.bench_function("chernoff_policy_build_four_sensor", |b| {
        b.iter(|| black_box(ChernoffPolicy::new(&env.test).unwrap()))
    });
    c.bench_function("kl_matrix_four_sensor", |b| b.iter(|| black_box(kl_matrix(&env.test, 3).unwrap())));
}

fn encoder(c: &mut Criterion) {
    let cfg = EncoderConfig {
        kind: CellKind::Gru,
        input_size: 5,
        hidden_size: 32,
        layers: 2,
        bidirectional: false,
        dropout: 0.0,
        n_out: 4,
        head: HeadKind::Classifier,
    };
    let enc = Encoder::new(cfg, &mut episode_stream(3, 0)).unwrap();
    let steps = 50;
    let mut rng = episode_stream(4, 0);
    let inputs: Vec<f64> = (0..steps * 5).map(|_| rng.random_range(0.0..1.0)).collect();
    c.bench_function("gru_h32_l2_forward_t50", |b| {
        b.iter(|| black_box(enc.encode_with(&enc.params, &inputs, steps, None).head_output))
    });
    c.bench_function("gru_h32_l2_forward_backward_t50", |b| {
        b.iter_batched(
            || vec![0.0; enc.n_params()],
            |mut grads| {
                let out = enc.encode_with(&enc.params, &inputs, steps, None);
                let pre = vec![0.1; 4];
                black_box(enc.backward_pre(&enc.params, out.tape, &pre, &mut grads));
                grads
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, belief_update, maximin, encoder);
criterion_main!(benches);
