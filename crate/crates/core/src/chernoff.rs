//! Model-based baseline: KL matrices, the maximin action distribution, the
//! modified Chernoff policy and the log-likelihood stopping rule.

use rand::Rng;

use crate::belief::BeliefState;
use crate::env::{sample_categorical, ObservationModel};
use crate::error::{Error, Result};
use crate::lp::solve_maximin;

/// Cap applied to infinite KL entries before solving.
pub const KL_CAP: f64 = 1e6;

const DIST_TOL: f64 = 1e-9;

/// `D(p || q) = Σ_y p(y) ln(p(y)/q(y))`, with `0 ln(0/q) = 0` and `+∞` when
/// `p(y) > 0 = q(y)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape {
            context: "kl_divergence".into(),
            expected: p.len(),
            got: q.len(),
        });
    }
    for (name, d) in [("p", p), ("q", q)] {
        let sum: f64 = d.iter().sum();
        if d.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > DIST_TOL {
            return Err(Error::NotNormalized {
                field: format!("kl_divergence.{name}"),
                sum,
            });
        }
    }
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += pi * (pi / qi).ln();
    }
    Ok(acc.max(0.0))
}

/// KL divergences from the current estimate to every alternative, per action.
#[derive(Debug, Clone, PartialEq)]
pub struct KlMatrix {
    pub i_hat: usize,
    /// Alternative hypotheses in column order (all `j ≠ i_hat`, ascending).
    pub alternatives: Vec<usize>,
    /// `d[a][k] = D(p_{i_hat}^a || p_{alternatives[k]}^a)`.
    pub d: Vec<Vec<f64>>,
}

/// Build the KL matrix for estimate `i_hat`.
pub fn kl_matrix(model: &ObservationModel, i_hat: usize) -> Result<KlMatrix> {
    model.check_hypothesis(i_hat)?;
    let alternatives: Vec<usize> = (0..model.n_hypotheses()).filter(|&j| j != i_hat).collect();
    let d = (0..model.n_actions())
        .map(|a| {
            alternatives
                .iter()
                .map(|&j| kl_divergence(model.dist(a, i_hat), model.dist(a, j)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KlMatrix {
        i_hat,
        alternatives,
        d,
    })
}

/// Mixed action rule plus its worst-case expected divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub g: Vec<f64>,
    pub value: f64,
    /// Some alternative cannot be told apart from the estimate by any action.
    pub indistinguishable: bool,
}

/// `argmax_g min_j Σ_a g(a) D[a][j]` over the action simplex.
///
/// Infinite entries are capped at [`KL_CAP`]. When some alternative is
/// indistinguishable under every action the value is zero for every `g`; the
/// uniform mixture is returned and flagged.
pub fn maximin_action_distribution(kl: &KlMatrix) -> ActionDistribution {
    let n_actions = kl.d.len();
    let uniform = || ActionDistribution {
        g: vec![1.0 / n_actions as f64; n_actions],
        value: 0.0,
        indistinguishable: true,
    };
    if kl.alternatives.is_empty() {
        return uniform();
    }
    let capped: Vec<Vec<f64>> = kl
        .d
        .iter()
        .map(|row| row.iter().map(|&x| x.min(KL_CAP)).collect())
        .collect();
    match solve_maximin(&capped) {
        Some(sol) => ActionDistribution {
            g: sol.weights,
            value: sol.value,
            indistinguishable: false,
        },
        None => uniform(),
    }
}

/// Probability of taking a uniformly random action at decision step `t ≥ 1`.
pub trait ExplorationSchedule: Send + Sync {
    fn epsilon(&self, t: usize) -> f64;
}

/// `ε_t = min(1, 1/t)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InverseTime;

impl ExplorationSchedule for InverseTime {
    fn epsilon(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            (1.0 / t as f64).min(1.0)
        }
    }
}

/// Fixed exploration probability.
#[derive(Debug, Clone, Copy)]
pub struct ConstantExploration(pub f64);

impl ExplorationSchedule for ConstantExploration {
    fn epsilon(&self, _t: usize) -> f64 {
        self.0
    }
}

/// One modified-Chernoff decision for the step after `state`.
///
/// The decision step is `state.t() + 1`. The estimate is the MAP hypothesis,
/// which before any observation is the prior's argmax.
pub fn chernoff_action<R: Rng + ?Sized>(
    state: &BeliefState,
    model: &ObservationModel,
    rng: &mut R,
    schedule: &dyn ExplorationSchedule,
) -> Result<usize> {
    let g = maximin_action_distribution(&kl_matrix(model, state.map_decode())?).g;
    Ok(draw_action(&g, schedule.epsilon(state.t() + 1), rng))
}

fn draw_action<R: Rng + ?Sized>(g: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < epsilon {
        rng.random_range(0..g.len())
    } else {
        sample_categorical(g, rng)
    }
}

/// Modified Chernoff policy with the maximin distributions precomputed for
/// every possible estimate.
pub struct ChernoffPolicy<S: ExplorationSchedule = InverseTime> {
    per_estimate: Vec<ActionDistribution>,
    schedule: S,
}

impl ChernoffPolicy<InverseTime> {
    pub fn new(model: &ObservationModel) -> Result<Self> {
        Self::with_schedule(model, InverseTime)
    }
}

impl<S: ExplorationSchedule> ChernoffPolicy<S> {
    pub fn with_schedule(model: &ObservationModel, schedule: S) -> Result<Self> {
        let per_estimate = (0..model.n_hypotheses())
            .map(|i| kl_matrix(model, i).map(|k| maximin_action_distribution(&k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            per_estimate,
            schedule,
        })
    }

    pub fn distribution(&self, i_hat: usize) -> &ActionDistribution {
        &self.per_estimate[i_hat]
    }

    /// Same draw sequence as [`chernoff_action`].
    pub fn act<R: Rng + ?Sized>(&self, state: &BeliefState, rng: &mut R) -> usize {
        let g = &self.per_estimate[state.map_decode()].g;
        draw_action(g, self.schedule.epsilon(state.t() + 1), rng)
    }
}

/// Outcome of a stopping check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Stop the first time `LL_t > −ln c`.
pub fn ll_stop(state: &BeliefState, c: f64) -> Result<StopDecision> {
    let (ll, _) = state.log_likelihood_index()?;
    ll_threshold_decision(ll, c)
}

/// Threshold test on a precomputed log-likelihood index.
pub fn ll_threshold_decision(ll: f64, c: f64) -> Result<StopDecision> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::config(format!("tolerance c must lie in (0, 1), got {c}")));
    }
    Ok(if ll > -c.ln() {
        StopDecision::Stop
    } else {
        StopDecision::Continue
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_bernoulli_env, presets};
    use crate::rng::episode_stream;

    const KL_08_02: f64 = 0.831_776_616_671_934_3; // 0.6 ln 4

    #[test]
    fn kl_cases() {
        assert_eq!(kl_divergence(&[0.8, 0.2], &[0.8, 0.2]).unwrap(), 0.0);
        let v = kl_divergence(&[0.2, 0.8], &[0.8, 0.2]).unwrap();
        assert!((v - 0.6 * 4f64.ln()).abs() < 1e-15);
        assert!((v - KL_08_02).abs() < 1e-12);
        let v = kl_divergence(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(kl_divergence(&[0.5, 0.5], &[1.0]).is_err());
        assert!(kl_divergence(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn kl_matrix_two_sensor_train() {
        let m = presets::two_sensor().train;
        let k = kl_matrix(&m, 3).unwrap();
        assert_eq!(k.alternatives, vec![0, 1, 2]);
        let expect = [[KL_08_02, 0.0, KL_08_02], [KL_08_02, KL_08_02, 0.0]];
        for a in 0..2 {
            for j in 0..3 {
                assert!((k.d[a][j] - expect[a][j]).abs() < 1e-6);
            }
        }
        let k = kl_matrix(&m, 0).unwrap();
        assert_eq!(k.alternatives, vec![1, 2, 3]);
        let expect = [[KL_08_02, 0.0, KL_08_02], [0.0, KL_08_02, KL_08_02]];
        for a in 0..2 {
            for j in 0..3 {
                assert!((k.d[a][j] - expect[a][j]).abs() < 1e-6);
            }
        }
        let flat = build_bernoulli_env(&[vec![0.3; 3], vec![0.6; 3]]).unwrap();
        let k = kl_matrix(&flat, 1).unwrap();
        assert!(k.d.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn maximin_two_sensor_estimate_three() {
        let m = presets::two_sensor().train;
        let dist = maximin_action_distribution(&kl_matrix(&m, 3).unwrap());
        assert!((dist.g[0] - 0.5).abs() < 1e-6 && (dist.g[1] - 0.5).abs() < 1e-6);
        assert!((dist.value - 0.415_888).abs() < 1e-5, "{}", dist.value);
        assert!(!dist.indistinguishable);
    }

    #[test]
    fn maximin_single_action_and_degenerate() {
        let k = KlMatrix {
            i_hat: 0,
            alternatives: vec![1, 2],
            d: vec![vec![0.7, 0.3]],
        };
        let dist = maximin_action_distribution(&k);
        assert_eq!(dist.g, vec![1.0]);
        assert!((dist.value - 0.3).abs() < 1e-12);

        let k = KlMatrix {
            i_hat: 0,
            alternatives: vec![1, 2],
            d: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let dist = maximin_action_distribution(&k);
        assert!((dist.g[0] - 0.5).abs() < 1e-12 && (dist.value - 0.5).abs() < 1e-12);

        let k = KlMatrix {
            i_hat: 0,
            alternatives: vec![1],
            d: vec![vec![0.0], vec![0.0], vec![0.0]],
        };
        let dist = maximin_action_distribution(&k);
        assert!(dist.indistinguishable);
        assert_eq!(dist.value, 0.0);
        assert!(dist.g.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn infinite_entries_are_capped() {
        let m = build_bernoulli_env(&[vec![1.0, 0.0], vec![0.6, 0.4]]).unwrap();
        let dist = maximin_action_distribution(&kl_matrix(&m, 0).unwrap());
        assert!(dist.value.is_finite());
        assert!((dist.g[0] - 1.0).abs() < 1e-12);
        assert_eq!(dist.value, KL_CAP);
    }

    #[test]
    fn chernoff_action_uniform_belief_splits_evenly() {
        let m = presets::two_sensor().train;
        let s = BeliefState::uniform(4);
        let no_explore = ConstantExploration(0.0);
        let mut rng = episode_stream(4, 0);
        let n = 20_000;
        let a_count = (0..n)
            .filter(|_| chernoff_action(&s, &m, &mut rng, &no_explore).unwrap() == 0)
            .count();
        assert!((a_count as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn full_exploration_is_uniform() {
        // point-mass maximin distribution, but ε = 1 ignores it
        let m = build_bernoulli_env(&[vec![0.1, 0.9], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let s = BeliefState::uniform(2);
        let mut rng = episode_stream(8, 0);
        let n = 30_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[chernoff_action(&s, &m, &mut rng, &ConstantExploration(1.0)).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.015, "{counts:?}");
        }
    }

    #[test]
    fn single_action_is_always_taken() {
        let m = build_bernoulli_env(&[vec![0.1, 0.9]]).unwrap();
        let s = BeliefState::uniform(2);
        let mut rng = episode_stream(8, 1);
        for _ in 0..100 {
            assert_eq!(chernoff_action(&s, &m, &mut rng, &InverseTime).unwrap(), 0);
        }
    }

    #[test]
    fn cached_policy_matches_direct_draws() {
        let m = presets::two_sensor().test;
        let policy = ChernoffPolicy::new(&m).unwrap();
        let s = BeliefState::uniform(4).update(0, 1, &m).unwrap();
        let mut r1 = episode_stream(1, 1);
        let mut r2 = episode_stream(1, 1);
        for _ in 0..200 {
            assert_eq!(
                policy.act(&s, &mut r1),
                chernoff_action(&s, &m, &mut r2, &InverseTime).unwrap()
            );
        }
    }

    #[test]
    fn inverse_time_schedule() {
        assert_eq!(InverseTime.epsilon(1), 1.0);
        assert_eq!(InverseTime.epsilon(4), 0.25);
    }

    #[test]
    fn ll_stop_thresholds() {
        let ll = (0.64f64 / 0.16).ln();
        assert_eq!(ll_threshold_decision(ll, 0.2).unwrap(), StopDecision::Continue);
        assert_eq!(ll_threshold_decision(ll, 0.3).unwrap(), StopDecision::Stop);
        let fresh = BeliefState::uniform(4);
        for c in [0.01, 0.5, 0.99] {
            assert_eq!(ll_stop(&fresh, c).unwrap(), StopDecision::Continue);
        }
        assert!(ll_stop(&fresh, 0.0).is_err());
        assert!(ll_stop(&fresh, 1.0).is_err());
    }
}
