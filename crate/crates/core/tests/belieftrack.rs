use asht_core::belief::argmax;
use asht_core::env::{build_bernoulli_env, presets, ObservationModel};
use asht_core::rng::episode_stream;
use asht_core::{BeliefState, Error};
use proptest::prelude::*;
use rand::Rng;

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Straight product form of the posterior, no logs.
fn naive_posterior(prior: &[f64], model: &ObservationModel, steps: &[(usize, usize)]) -> Vec<f64> {
    let mut w = prior.to_vec();
    for &(a, y) in steps {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi *= model.prob(a, i, y);
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
    }
    w
}

fn random_model(rng: &mut impl Rng, h: usize, a: usize, o: usize) -> ObservationModel {
    let table: Vec<Vec<Vec<f64>>> = (0..a)
        .map(|_| {
            (0..h)
                .map(|_| {
                    let raw: Vec<f64> = (0..o).map(|_| rng.random_range(0.05..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    raw.iter().map(|x| x / s).collect()
                })
                .collect()
        })
        .collect();
    ObservationModel::new(
        h,
        (0..a).map(|k| format!("a{k}")).collect(),
        (0..o).map(|k| format!("y{k}")).collect(),
        &table,
    )
    .unwrap()
}

#[test]
fn two_updates_by_hand() {
    let m = presets::two_sensor().train;
    let s1 = BeliefState::uniform(4).update(0, 1, &m).unwrap();
    assert!(close(s1.rho(), &[0.1, 0.4, 0.1, 0.4], 1e-12));
    assert!((s1.error_probability() - 0.6).abs() < 1e-12);
    let s2 = s1.update(1, 0, &m).unwrap();
    assert!(close(s2.rho(), &[0.16, 0.64, 0.04, 0.16], 1e-12));
    assert_eq!(s2.map_decode(), 1);
    let (ll, best) = s2.log_likelihood_index().unwrap();
    assert_eq!(best, 1);
    assert!((ll - 1.386_294_361_119_890_6).abs() < 1e-12);
}

#[test]
fn uninformative_observation_keeps_the_belief() {
    let m = build_bernoulli_env(&[vec![0.3, 0.3, 0.3]]).unwrap();
    let s = BeliefState::new(&[0.5, 0.3, 0.2]).unwrap();
    let next = s.update(0, 1, &m).unwrap();
    assert!(close(next.rho(), s.rho(), 1e-15));
}

#[test]
fn impossible_observation_is_an_error_and_leaves_state() {
    let m = build_bernoulli_env(&[vec![1.0, 1.0]]).unwrap();
    let mut s = BeliefState::uniform(2);
    let before = s.clone();
    assert!(matches!(
        s.update_in_place(0, 0, &m),
        Err(Error::InconsistentObservation { action: 0, observation: 0 })
    ));
    assert_eq!(s, before);
}

#[test]
fn error_probability_cases() {
    assert_eq!(BeliefState::uniform(4).error_probability(), 0.75);
    let s = BeliefState::from_parts(vec![0.0, 1.0, 0.0, 0.0], None, 3).unwrap();
    assert_eq!(s.error_probability(), 0.0);
}

#[test]
fn confidence_cases() {
    let c = |rho: Vec<f64>| BeliefState::from_parts(rho, None, 0).unwrap().confidence();
    assert!(c(vec![0.5, 0.5]).abs() < 1e-15);
    assert!((c(vec![0.9, 0.1]) - 0.8 * 9f64.ln()).abs() < 1e-12);
    assert!((c(vec![0.9, 0.1]) - 1.757_779_7).abs() < 1e-6);
    assert!((c(vec![0.25; 4]) - (1.0f64 / 3.0).ln()).abs() < 1e-12);
    // clamping keeps the certain belief finite
    assert!(c(vec![1.0, 0.0]).is_finite());
}

#[test]
fn log_likelihood_index_cases() {
    let tie = BeliefState::from_parts(vec![0.5, 0.5], Some(vec![-2.0, -2.0]), 1).unwrap();
    assert_eq!(tie.log_likelihood_index().unwrap(), (0.0, 0));
    let s = BeliefState::from_parts(vec![0.5, 0.5], Some(vec![-1.0, -5.0]), 1).unwrap();
    assert_eq!(s.log_likelihood_index().unwrap(), (4.0, 0));
    assert!(BeliefState::uniform(1).log_likelihood_index().is_err());
}

#[test]
fn map_decode_ties_and_order() {
    let d = |rho: Vec<f64>| BeliefState::from_parts(rho, None, 0).unwrap().map_decode();
    assert_eq!(d(vec![0.16, 0.64, 0.04, 0.16]), 1);
    assert_eq!(d(vec![0.25; 4]), 0);
    assert_eq!(d(vec![0.4, 0.35, 0.25]), 0);
    assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
}

#[test]
fn normalization_over_many_random_updates() {
    let mut rng = episode_stream(77, 0);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let h = rng.random_range(2..7);
        let a = rng.random_range(1..4);
        let o = rng.random_range(2..5);
        let m = random_model(&mut rng, h, a, o);
        let mut s = BeliefState::uniform(h);
        for _ in 0..100 {
            let action = rng.random_range(0..a);
            let obs = rng.random_range(0..o);
            s.update_in_place(action, obs, &m).unwrap();
            let sum: f64 = s.rho().iter().sum();
            worst = worst.max((sum - 1.0).abs());
            assert!(s.rho().iter().all(|&r| r >= 0.0), "draw {k}");
        }
    }
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn log_space_matches_product_form() {
    let mut rng = episode_stream(78, 0);
    for _ in 0..200 {
        let m = random_model(&mut rng, 5, 3, 3);
        let prior = {
            let raw: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let steps: Vec<(usize, usize)> = (0..rng.random_range(1..=50))
            .map(|_| (rng.random_range(0..3), rng.random_range(0..3)))
            .collect();
        let mut s = BeliefState::new(&prior).unwrap();
        for &(a, y) in &steps {
            s.update_in_place(a, y, &m).unwrap();
        }
        let want = naive_posterior(&prior, &m, &steps);
        for (x, y) in s.rho().iter().zip(&want) {
            assert!((x - y).abs() <= 1e-9 * y.max(1e-300) || (x - y).abs() < 1e-15, "{x} vs {y}");
        }
    }
}

#[test]
fn uniform_prior_belief_tracks_likelihoods() {
    let m = presets::two_sensor().test;
    let mut rng = episode_stream(79, 0);
    let mut s = BeliefState::uniform(4);
    for _ in 0..50 {
        s.update_in_place(rng.random_range(0..2), rng.random_range(0..2), &m).unwrap();
        let max = s.loglik().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = s.loglik().iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        for (r, wi) in s.rho().iter().zip(&w) {
            let want = wi / z;
            assert!((r - want).abs() <= 1e-9 * want.max(1e-12));
        }
        // exact ties can be split either way by rounding
        let mut sorted = s.loglik().to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted[0] - sorted[1] > 1e-9 {
            assert_eq!(s.map_decode(), argmax(s.loglik()));
        }
    }
}

proptest! {
    #[test]
    fn loglik_is_order_invariant(steps in prop::collection::vec((0usize..2, 0usize..2), 1..30), seed in any::<u64>()) {
        let m = presets::two_sensor().train;
        let mut shuffled = steps.clone();
        // deterministic Fisher-Yates from the seed
        let mut rng = episode_stream(seed, 0);
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let run = |seq: &[(usize, usize)]| {
            let mut s = BeliefState::uniform(4);
            for &(a, y) in seq {
                s.update_in_place(a, y, &m).unwrap();
            }
            s
        };
        let (x, y) = (run(&steps), run(&shuffled));
        for (a, b) in x.loglik().iter().zip(y.loglik()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let (lx, ix) = x.log_likelihood_index().unwrap();
        let (ly, iy) = y.log_likelihood_index().unwrap();
        prop_assert!((lx - ly).abs() < 1e-12);
        // summation order can split an exact tie by one rounding step
        if lx > 1e-9 {
            prop_assert_eq!(ix, iy);
        }
    }

    #[test]
    fn step_counter_counts_updates(n in 0usize..40) {
        let m = presets::two_sensor().train;
        let mut s = BeliefState::uniform(4);
        for k in 0..n {
            s.update_in_place(k % 2, (k / 2) % 2, &m).unwrap();
        }
        prop_assert_eq!(s.t(), n);
    }
}
