//! Gradient and optimizer checks for the recurrent kernel against
//! central finite differences.

use asht_core::nn::{
    cross_entropy, grad_check, squared_error, AdamConfig, AdamState, CellKind, Encoder, EncoderConfig, HeadKind,
    ParamLayout, RecurrentStack, StackConfig, FD_STEP,
};
use asht_core::rng::episode_stream;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

fn random_seq(rng: &mut impl Rng, steps: usize, width: usize) -> Vec<f64> {
    (0..steps * width).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Classifier: cross-entropy on `label`; regressor: squared error to `target`.
fn loss_and_head_grad(enc: &Encoder, out: &[f64], label: usize, target: f64) -> (f64, Vec<f64>) {
    match enc.config().head {
        HeadKind::Classifier => {
            let (l, _) = cross_entropy(out, label);
            // ∂(−ln p_label)/∂p
            let mut g = vec![0.0; out.len()];
            g[label] = -1.0 / out[label];
            (l, g)
        }
        HeadKind::Regressor => {
            let (l, g) = squared_error(out[0], target);
            let mut v = vec![0.0; out.len()];
            v[0] = g;
            (l, v)
        }
    }
}

/// Runs a gradient check; `dropout_seed` fixes the mask across evaluations.
fn check_encoder(enc: &Encoder, xs: &[f64], steps: usize, dropout_seed: Option<u64>, tol: f64) -> f64 {
    let mk_rng = |s: u64| episode_stream(s, 0);
    let forward = |p: &[f64]| {
        let mut r = dropout_seed.map(mk_rng);
        let d = r.as_mut().map(|r| r as &mut dyn RngCore);
        enc.encode_with(p, xs, steps, d)
    };
    let out = forward(&enc.params);
    let (_, head_grad) = loss_and_head_grad(enc, &out.head_output, 1, 0.3);
    let grads = enc.backward(out.tape, &head_grad);
    let report = grad_check(
        enc.layout(),
        &enc.params,
        &grads.params,
        |p| {
            let o = forward(p);
            loss_and_head_grad(enc, &o.head_output, 1, 0.3).0
        },
        FD_STEP,
        tol,
    );
    assert!(report.passed(), "{:?}", report.worst());
    report.max_error()
}

#[test]
fn single_step_gru_squared_norm() {
    let cfg = StackConfig {
        kind: CellKind::Gru,
        input_size: 3,
        hidden_size: 2,
        layers: 1,
        bidirectional: false,
        dropout: 0.0,
    };
    let mut layout = ParamLayout::new();
    let stack = RecurrentStack::new(cfg, &mut layout, "g").unwrap();
    let mut rng = episode_stream(11, 0);
    let params = layout.init(&mut rng);
    let x = random_seq(&mut rng, 1, 3);
    let (h, tape) = stack.forward(&params, &x, 1, None);
    let mut grads = vec![0.0; layout.len()];
    let d: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
    stack.backward(&params, &tape, &d, &mut grads);
    let report = grad_check(
        &layout,
        &params,
        &grads,
        |p| stack.forward(p, &x, 1, None).0.iter().map(|v| v * v).sum(),
        FD_STEP,
        1e-6,
    );
    assert!(report.passed(), "{:?}", report.blocks);
}

#[test]
fn constant_loss_zero_gradient() {
    let cfg = EncoderConfig {
        kind: CellKind::Lstm,
        input_size: 2,
        hidden_size: 3,
        layers: 2,
        bidirectional: true,
        dropout: 0.0,
        n_out: 2,
        head: HeadKind::Regressor,
    };
    let mut rng = episode_stream(12, 0);
    let enc = Encoder::new(cfg, &mut rng).unwrap();
    let xs = random_seq(&mut rng, 4, 2);
    let out = enc.encode_with(&enc.params, &xs, 4, None);
    let g = enc.backward(out.tape, &[0.0, 0.0]);
    assert!(g.params.iter().all(|&v| v == 0.0));
    assert!(g.inputs.iter().all(|&v| v == 0.0));
}

#[test]
fn bidirectional_lstm_classifier_cross_entropy() {
    let cfg = EncoderConfig {
        kind: CellKind::Lstm,
        input_size: 4,
        hidden_size: 5,
        layers: 2,
        bidirectional: true,
        dropout: 0.0,
        n_out: 4,
        head: HeadKind::Classifier,
    };
    let mut rng = episode_stream(13, 0);
    let enc = Encoder::new(cfg, &mut rng).unwrap();
    let xs = random_seq(&mut rng, 7, 4);
    check_encoder(&enc, &xs, 7, None, 1e-5);
}

#[test]
fn gru_encoder_hidden4_t5() {
    let cfg = EncoderConfig {
        kind: CellKind::Gru,
        input_size: 4,
        hidden_size: 4,
        layers: 1,
        bidirectional: false,
        dropout: 0.0,
        n_out: 4,
        head: HeadKind::Classifier,
    };
    let mut rng = episode_stream(14, 0);
    let enc = Encoder::new(cfg, &mut rng).unwrap();
    let xs = random_seq(&mut rng, 5, 4);
    check_encoder(&enc, &xs, 5, None, 1e-4);
}

#[test]
fn regressor_mse_at_1e5() {
    let cfg = EncoderConfig {
        kind: CellKind::Gru,
        input_size: 3,
        hidden_size: 4,
        layers: 2,
        bidirectional: false,
        dropout: 0.0,
        n_out: 1,
        head: HeadKind::Regressor,
    };
    let mut rng = episode_stream(15, 0);
    let enc = Encoder::new(cfg, &mut rng).unwrap();
    let xs = random_seq(&mut rng, 6, 3);
    check_encoder(&enc, &xs, 6, None, 1e-5);
}

#[test]
fn input_gradients_match_finite_differences() {
    let cfg = EncoderConfig {
        kind: CellKind::Lstm,
        input_size: 3,
        hidden_size: 3,
        layers: 2,
        bidirectional: true,
        dropout: 0.0,
        n_out: 1,
        head: HeadKind::Regressor,
    };
    let mut rng = episode_stream(16, 0);
    let enc = Encoder::new(cfg, &mut rng).unwrap();
    let xs = random_seq(&mut rng, 4, 3);
    let f = |x: &[f64]| enc.encode_with(&enc.params, x, 4, None).head_output[0];
    let out = enc.encode_with(&enc.params, &xs, 4, None);
    let g = enc.backward(out.tape, &[1.0]);
    for i in 0..xs.len() {
        let mut up = xs.clone();
        up[i] += FD_STEP;
        let mut down = xs.clone();
        down[i] -= FD_STEP;
        let num = (f(&up) - f(&down)) / (2.0 * FD_STEP);
        assert!((num - g.inputs[i]).abs() < 1e-8 * num.abs().max(1.0), "input {i}");
    }
}

#[test]
fn hundred_random_configurations() {
    let mut rng = episode_stream(17, 0);
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let kind = if rng.random::<bool>() { CellKind::Gru } else { CellKind::Lstm };
        let head = if rng.random::<bool>() { HeadKind::Classifier } else { HeadKind::Regressor };
        let dropout = if rng.random::<bool>() { 0.3 } else { 0.0 };
        let cfg = EncoderConfig {
            kind,
            input_size: rng.random_range(1..=4),
            hidden_size: rng.random_range(1..=4),
            layers: rng.random_range(1..=3),
            bidirectional: rng.random(),
            dropout,
            n_out: if head == HeadKind::Classifier { rng.random_range(2..=4) } else { 1 },
            head,
        };
        let steps = rng.random_range(1..=6);
        let enc = Encoder::new(cfg, &mut rng).unwrap();
        let xs = random_seq(&mut rng, steps, enc.config().input_size);
        let seed = (dropout > 0.0).then_some(1000 + case);
        worst = worst.max(check_encoder(&enc, &xs, steps, seed, 1e-4));
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn corrupted_gradient_is_flagged_by_block() {
    let cfg = EncoderConfig {
        kind: CellKind::Gru,
        input_size: 2,
        hidden_size: 3,
        layers: 1,
        bidirectional: false,
        dropout: 0.0,
        n_out: 2,
        head: HeadKind::Classifier,
    };
    let mut rng = episode_stream(18, 0);
    let enc = Encoder::new(cfg, &mut rng).unwrap();
    let xs = random_seq(&mut rng, 4, 2);
    let out = enc.encode_with(&enc.params, &xs, 4, None);
    let (_, hg) = loss_and_head_grad(&enc, &out.head_output, 0, 0.0);
    let mut g = enc.backward(out.tape, &hg).params;
    let u = enc.layout().block("rnn.l0.fwd.u").unwrap().range();
    g[u.start] += 0.5;
    let report = grad_check(
        enc.layout(),
        &enc.params,
        &g,
        |p| loss_and_head_grad(&enc, &enc.encode_with(p, &xs, 4, None).head_output, 0, 0.0).0,
        FD_STEP,
        1e-4,
    );
    assert!(!report.passed());
    assert_eq!(report.worst().unwrap().name, "rnn.l0.fwd.u");
}

#[test]
fn adam_first_step_by_hand() {
    let mut layout = ParamLayout::new();
    layout.weight("p", 1, 1, 1.0);
    let mut p = vec![0.0];
    let mut st = AdamState::new(AdamConfig::with_lr(1e-3), 1);
    st.step(&mut p, &[1.0], &layout).unwrap();
    // m̂ = v̂ = 1 at t = 1
    let expected = -1e-3 * (1.0 / (1.0 + 1e-8));
    assert!((p[0] - expected).abs() < 1e-18, "{}", p[0]);
}

#[test]
fn adam_zero_gradient_keeps_params() {
    let mut layout = ParamLayout::new();
    layout.weight("p", 1, 2, 1.0);
    let before = vec![0.3, -0.7];
    let mut p = before.clone();
    let mut st = AdamState::new(AdamConfig::default(), 2);
    st.step(&mut p, &[0.0, 0.0], &layout).unwrap();
    assert_eq!(p, before);
}

#[test]
fn training_trajectory_is_replayable() {
    let run = || {
        let cfg = EncoderConfig {
            kind: CellKind::Gru,
            input_size: 3,
            hidden_size: 4,
            layers: 2,
            bidirectional: true,
            dropout: 0.2,
            n_out: 3,
            head: HeadKind::Classifier,
        };
        let mut rng: ChaCha8Rng = episode_stream(19, 0);
        let mut enc = Encoder::new(cfg, &mut rng).unwrap();
        let mut adam = AdamState::new(AdamConfig::default(), enc.n_params());
        for step in 0..5 {
            let xs = random_seq(&mut rng, 5, 3);
            let mut drop = episode_stream(19, step + 1);
            let out = enc.encode_with(&enc.params, &xs, 5, Some(&mut drop));
            let (_, hg) = loss_and_head_grad(&enc, &out.head_output, 2, 0.0);
            let g = enc.backward(out.tape, &hg).params;
            let layout = enc.layout().clone();
            adam.step(&mut enc.params, &g, &layout).unwrap();
        }
        enc.params
    };
    let a = run();
    let b = run();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
