use std::path::Path;

use asht_core::env::{
    build_bernoulli_env, load_env_config, presets, product_sensor_env, sample_hypothesis, EnvironmentPair,
};
use asht_core::rng::{episode_stream, EpisodeRng};
use asht_core::Error;
use rand::Rng;

fn shipped(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/env").join(name)
}

/// Monte-Carlo band `4·sqrt(p(1 − p)/n)`.
fn band(p: f64, n: usize) -> f64 {
    4.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn bernoulli_rows_fill_the_complement() {
    let m = build_bernoulli_env(&[vec![0.2, 0.8, 0.2, 0.8], vec![0.2, 0.2, 0.8, 0.8]]).unwrap();
    assert_eq!(m.n_hypotheses(), 4);
    assert_eq!(m.n_actions(), 2);
    assert_eq!(m.n_observations(), 2);
    assert_eq!(m.dist(0, 1), &[1.0 - 0.8, 0.8]);
    assert_eq!(m.prob(1, 0, 1), 0.2);
    assert_eq!(m.prob(1, 0, 0), 1.0 - 0.2);
}

#[test]
fn deterministic_sensor() {
    let m = build_bernoulli_env(&[vec![1.0, 0.0]]).unwrap();
    assert_eq!(m.prob(0, 0, 1), 1.0);
    assert_eq!(m.prob(0, 1, 1), 0.0);
    let mut rng = episode_stream(5, 0);
    for _ in 0..1000 {
        assert_eq!(m.sample_observation(0, 0, &mut rng).unwrap(), 1);
    }
}

#[test]
fn bernoulli_rejects_bad_rows() {
    assert!(matches!(
        build_bernoulli_env(&[vec![0.2, 1.2]]),
        Err(Error::ProbabilityOutOfRange { .. })
    ));
    assert!(build_bernoulli_env(&[vec![0.2, 0.8], vec![0.5]]).is_err());
    assert!(build_bernoulli_env(&[]).is_err());
}

#[test]
fn two_sensor_preset_matches_tables() {
    let env = presets::two_sensor();
    let train = [[0.2, 0.8, 0.2, 0.8], [0.2, 0.2, 0.8, 0.8]];
    let test = [[0.25, 0.75, 0.25, 0.75], [0.15, 0.15, 0.85, 0.85]];
    for a in 0..2 {
        for i in 0..4 {
            assert_eq!(env.train.prob(a, i, 1), train[a][i]);
            assert_eq!(env.test.prob(a, i, 1), test[a][i]);
        }
    }
    assert_eq!(env.prior, vec![0.25; 4]);
}

#[test]
fn product_env_reads_bitmasks() {
    let m = product_sensor_env(4, &[0.85, 0.85, 0.75, 0.75], &[0.2; 4]).unwrap();
    assert_eq!(m.n_hypotheses(), 16);
    assert_eq!(m.n_actions(), 4);
    for i in 0..16 {
        for a in 0..4 {
            let want = if i >> a & 1 == 1 { [0.85, 0.85, 0.75, 0.75][a] } else { 0.2 };
            assert_eq!(m.prob(a, i, 1), want, "a={a} i={i}");
        }
    }
    let noiseless = product_sensor_env(1, &[1.0], &[0.0]).unwrap();
    assert_eq!(noiseless.n_hypotheses(), 2);
    assert_eq!(noiseless.prob(0, 1, 1), 1.0);
    assert_eq!(noiseless.prob(0, 0, 1), 0.0);
    assert!(product_sensor_env(21, &[0.8; 21], &[0.2; 21]).is_err());
    assert!(product_sensor_env(0, &[], &[]).is_err());
}

#[test]
fn two_sensor_is_a_product_environment() {
    let p = product_sensor_env(2, &[0.8, 0.8], &[0.2, 0.2]).unwrap();
    assert_eq!(p.table(), presets::two_sensor().train.table());
}

#[test]
fn identical_sensors_are_permutation_symmetric() {
    let m = product_sensor_env(3, &[0.7; 3], &[0.1; 3]).unwrap();
    // swap sensors 0 and 2, and the matching bits of every hypothesis
    let swap = |i: usize| (i & 0b010) | ((i & 1) << 2) | ((i >> 2) & 1);
    let perm = [2, 1, 0];
    for a in 0..3 {
        for i in 0..8 {
            assert_eq!(m.dist(a, i), m.dist(perm[a], swap(i)));
        }
    }
}

#[test]
fn degenerate_prior_always_draws_its_mass() {
    let mut rng = episode_stream(1, 0);
    for _ in 0..100 {
        assert_eq!(sample_hypothesis(&[1.0, 0.0, 0.0, 0.0], &mut rng).unwrap(), 0);
    }
}

#[test]
fn uniform_prior_frequencies() {
    let mut rng = episode_stream(2, 0);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[sample_hypothesis(&[0.25; 4], &mut rng).unwrap()] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn streams_replay_and_differ() {
    let draw = |seed, idx| {
        let mut r = EpisodeRng::new(seed, idx).stream();
        (0..20).map(|_| sample_hypothesis(&[0.5, 0.5], &mut r).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(9, 3), draw(9, 3));
    let mut a = episode_stream(9, 3);
    let mut b = episode_stream(9, 4);
    let xa: Vec<u64> = (0..8).map(|_| a.random()).collect();
    let xb: Vec<u64> = (0..8).map(|_| b.random()).collect();
    assert_ne!(xa, xb);
}

#[test]
fn observation_frequencies_match_the_table() {
    let m = presets::two_sensor().train;
    let n = 100_000;
    for (h, a, p) in [(1, 0, 0.8), (0, 1, 0.2)] {
        let mut rng = episode_stream(11, h as u64);
        let ones = (0..n).filter(|_| m.sample_observation(h, a, &mut rng).unwrap() == 1).count();
        let f = ones as f64 / n as f64;
        assert!((f - p).abs() < 0.01, "h={h} a={a} f={f}");
        assert!((f - p).abs() < band(p, n));
    }
}

#[test]
fn observation_sampling_checks_indices() {
    let m = presets::two_sensor().train;
    let mut rng = episode_stream(0, 0);
    assert!(m.sample_observation(4, 0, &mut rng).is_err());
    assert!(m.sample_observation(0, 2, &mut rng).is_err());
}

#[test]
fn shipped_two_sensor_file_equals_the_preset() {
    let env = load_env_config(shipped("two_sensor.toml")).unwrap();
    let preset = presets::two_sensor();
    for (file, want) in [(&env.train, &preset.train), (&env.test, &preset.test)] {
        for (ra, rb) in file.table().iter().zip(want.table()) {
            for (da, db) in ra.iter().zip(rb) {
                for (x, y) in da.iter().zip(db) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
    assert_eq!(env.prior, vec![0.25; 4]);
}

#[test]
fn shipped_four_sensor_file_equals_the_preset() {
    let env = load_env_config(shipped("four_sensor.toml")).unwrap();
    let preset = presets::four_sensor();
    assert_eq!(env.prior, vec![1.0 / 16.0; 16]);
    for (file, want) in [(&env.train, &preset.train), (&env.test, &preset.test)] {
        for (ra, rb) in file.table().iter().zip(want.table()) {
            for (da, db) in ra.iter().zip(rb) {
                for (x, y) in da.iter().zip(db) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn save_and_load_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    for env in [presets::two_sensor(), presets::four_sensor()] {
        let path = dir.path().join("env.toml");
        env.save(&path).unwrap();
        let back = load_env_config(&path).unwrap();
        assert_eq!(back, env);
    }
}

const HEADER: &str = "hypotheses = 2\nactions = [\"a\", \"b\"]\nobservations = [\"0\", \"1\"]\n";

#[test]
fn row_sum_violation_names_the_row() {
    let doc = format!(
        "{HEADER}[train]\ntable = [[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.6, 0.6]]]\n\
         [test]\ntable = [[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]\n"
    );
    let err = EnvironmentPair::from_toml_str(&doc).unwrap_err().to_string();
    assert!(err.contains("train.table[1][1]"), "{err}");
    assert!(err.contains("1.2"), "{err}");
}

#[test]
fn mismatched_action_sets_are_rejected() {
    let doc = format!(
        "{HEADER}[train]\ntable = [[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]\n\
         [test]\ntable = [[[0.5, 0.5], [0.5, 0.5]]]\n"
    );
    assert!(EnvironmentPair::from_toml_str(&doc).is_err());
}

#[test]
fn unknown_fields_and_bad_priors_are_rejected() {
    let table = "[train]\ntable = [[[0.5, 0.5], [0.5, 0.5]]]\n[test]\ntable = [[[0.5, 0.5], [0.5, 0.5]]]\n";
    let one_action = "hypotheses = 2\nactions = [\"a\"]\nobservations = [\"0\", \"1\"]\n";
    assert!(EnvironmentPair::from_toml_str(&format!("{one_action}{table}")).is_ok());
    assert!(EnvironmentPair::from_toml_str(&format!("{one_action}colour = 1\n{table}")).is_err());
    let err = EnvironmentPair::from_toml_str(&format!("{one_action}prior = [0.7, 0.7]\n{table}")).unwrap_err();
    assert!(err.to_string().contains("prior"), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(
        load_env_config("/nonexistent/env.toml"),
        Err(Error::Io { .. })
    ));
}
