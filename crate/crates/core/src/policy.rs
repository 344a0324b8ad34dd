//! Recurrent actor-critic for experiment selection, trained with the clipped
//! surrogate objective on the training environment.
//!
//! The network only ever sees its own previous action and the observation
//! that followed: [`PolicyCursor::step`] takes nothing else. Rewards come from
//! a belief tracker that lives in [`rollout`] and never reaches the network.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::decoders::StepEncoding;
use crate::env::{sample_categorical, sample_hypothesis, EnvironmentPair, ObservationModel};
use crate::error::{Error, Result};
use crate::nn::linalg::{axpy, dot, log_sum_exp, matvec_add, matvec_t_add, outer_add, softmax};
use crate::nn::{clip_grad_norm, AdamConfig, AdamState, CellKind, ParamLayout, RecurrentStack, StackConfig, StackState, StackTape};
use crate::rng::{derive_seed, episode_stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub kind: CellKind,
    pub hidden_size: usize,
    pub layers: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: CellKind::Gru,
            hidden_size: 32,
            layers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub encoding: StepEncoding,
    pub config: PolicyConfig,
    layout: ParamLayout,
    stack: RecurrentStack,
    actor_w: usize,
    actor_b: usize,
    critic_w: usize,
    critic_b: usize,
    pub params: Vec<f64>,
}

/// Forward pass over one whole episode.
pub struct EpisodeForward {
    /// T × |A|
    pub logits: Vec<f64>,
    pub values: Vec<f64>,
    hidden: Vec<f64>,
    tape: StackTape,
}

impl PolicyNet {
    pub fn new(encoding: StepEncoding, config: PolicyConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(encoding, config)?;
        net.params = net.layout.init(&mut episode_stream(seed, 0));
        Ok(net)
    }

    pub fn zeros(encoding: StepEncoding, config: PolicyConfig) -> Result<Self> {
        if encoding.n_actions == 0 {
            return Err(Error::config("policy needs at least one action"));
        }
        let mut layout = ParamLayout::new();
        let stack = RecurrentStack::new(
            StackConfig {
                kind: config.kind,
                input_size: encoding.width(),
                hidden_size: config.hidden_size,
                layers: config.layers,
                bidirectional: false,
                dropout: 0.0,
            },
            &mut layout,
            "rnn",
        )?;
        let h = config.hidden_size;
        let bound = 1.0 / (h as f64).sqrt();
        let actor_w = layout.weight("actor.w", encoding.n_actions, h, bound);
        let actor_b = layout.bias("actor.b", encoding.n_actions);
        let critic_w = layout.weight("critic.w", 1, h, bound);
        let critic_b = layout.bias("critic.b", 1);
        let params = vec![0.0; layout.len()];
        Ok(Self {
            encoding,
            config,
            layout,
            stack,
            actor_w,
            actor_b,
            critic_w,
            critic_b,
            params,
        })
    }

    pub fn from_params(encoding: StepEncoding, config: PolicyConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(encoding, config)?;
        if params.len() != net.layout.len() {
            return Err(Error::Shape {
                context: "policy parameters".into(),
                expected: net.layout.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn n_actions(&self) -> usize {
        self.encoding.n_actions
    }

    fn heads(&self, params: &[f64], h: &[f64]) -> (Vec<f64>, f64) {
        let a = self.n_actions();
        let hs = h.len();
        let mut logits = params[self.actor_b..self.actor_b + a].to_vec();
        matvec_add(&mut logits, &params[self.actor_w..self.actor_w + a * hs], h);
        let value = params[self.critic_b] + dot(&params[self.critic_w..self.critic_w + hs], h);
        (logits, value)
    }

    /// Incremental execution, one step at a time.
    pub fn cursor(&self) -> PolicyCursor<'_> {
        PolicyCursor {
            net: self,
            state: self.stack.start(),
            input: vec![0.0; self.encoding.width()],
        }
    }

    /// Step inputs of an episode: zeros, then the encoding of each previous
    /// `(action, observation)`.
    pub fn episode_inputs(&self, actions: &[usize], observations: &[usize]) -> Vec<f64> {
        let w = self.encoding.width();
        let mut x = vec![0.0; actions.len() * w];
        for t in 1..actions.len() {
            self.encoding
                .write(Some((actions[t - 1], observations[t - 1])), &mut x[t * w..(t + 1) * w]);
        }
        x
    }

    pub fn forward_episode(&self, params: &[f64], inputs: &[f64], steps: usize) -> EpisodeForward {
        let (hidden, tape) = self.stack.forward(params, inputs, steps, None);
        let hs = self.config.hidden_size;
        let mut logits = Vec::with_capacity(steps * self.n_actions());
        let mut values = Vec::with_capacity(steps);
        for h in hidden.chunks_exact(hs) {
            let (l, v) = self.heads(params, h);
            logits.extend_from_slice(&l);
            values.push(v);
        }
        EpisodeForward {
            logits,
            values,
            hidden,
            tape,
        }
    }

    /// Accumulate gradients given `∂L/∂logits` (T × |A|) and `∂L/∂values`.
    pub fn backward_episode(
        &self,
        params: &[f64],
        fwd: EpisodeForward,
        d_logits: &[f64],
        d_values: &[f64],
        grads: &mut [f64],
    ) {
        let a = self.n_actions();
        let hs = self.config.hidden_size;
        let steps = fwd.values.len();
        let mut d_hidden = vec![0.0; steps * hs];
        for t in 0..steps {
            let h = &fwd.hidden[t * hs..(t + 1) * hs];
            let dl = &d_logits[t * a..(t + 1) * a];
            let dv = d_values[t];
            axpy(&mut grads[self.actor_b..self.actor_b + a], 1.0, dl);
            outer_add(&mut grads[self.actor_w..self.actor_w + a * hs], dl, h);
            grads[self.critic_b] += dv;
            axpy(&mut grads[self.critic_w..self.critic_w + hs], dv, h);
            let dh = &mut d_hidden[t * hs..(t + 1) * hs];
            matvec_t_add(dh, &params[self.actor_w..self.actor_w + a * hs], dl);
            axpy(dh, dv, &params[self.critic_w..self.critic_w + hs]);
        }
        self.stack.backward(params, &fwd.tape, &d_hidden, grads);
    }
}

/// Running policy state within one episode.
pub struct PolicyCursor<'a> {
    net: &'a PolicyNet,
    state: StackState,
    input: Vec<f64>,
}

impl PolicyCursor<'_> {
    /// Feed the previous `(action, observation)` (`None` at the first step)
    /// and get action logits and the value estimate.
    pub fn step(&mut self, previous: Option<(usize, usize)>) -> (Vec<f64>, f64) {
        let net = self.net;
        net.encoding.write(previous, &mut self.input);
        let h = net.stack.step(&net.params, &mut self.state, &self.input);
        net.heads(&net.params, h)
    }
}

/// Sample an action from logits; returns the action and its log-probability.
pub fn sample_action<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let p = softmax(logits);
    let a = sample_categorical(&p, rng);
    (a, logits[a] - log_sum_exp(logits))
}

/// One training-environment episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// for diagnostics only
    pub hypothesis: usize,
    pub actions: Vec<usize>,
    pub observations: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    /// γ_0 … γ_T from the hidden tracker
    pub gammas: Vec<f64>,
    /// MAP estimate of the hidden tracker at the end
    pub map_estimate: usize,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Run `horizon` steps: the first action is uniform (log-probability
/// `−ln|A|`), later ones are sampled from the actor. Reward at step t is
/// `γ_{t−1} − γ_t` of a belief tracker driven by `model`.
pub fn rollout<R: Rng + ?Sized>(
    policy: &PolicyNet,
    model: &ObservationModel,
    prior: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Result<Rollout> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    if model.n_actions() != policy.n_actions() || model.n_observations() != policy.encoding.n_observations {
        return Err(Error::config("policy alphabet does not match the environment"));
    }
    let hypothesis = sample_hypothesis(prior, rng)?;
    let mut belief = BeliefState::new(prior)?;
    let mut cursor = policy.cursor();
    let mut out = Rollout {
        hypothesis,
        actions: Vec::with_capacity(horizon),
        observations: Vec::with_capacity(horizon),
        log_probs: Vec::with_capacity(horizon),
        values: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        gammas: vec![belief.error_probability()],
        map_estimate: 0,
    };
    let n_a = policy.n_actions();
    let mut previous = None;
    for t in 0..horizon {
        let (logits, value) = cursor.step(previous);
        let (a, logp) = if t == 0 {
            (rng.random_range(0..n_a), -(n_a as f64).ln())
        } else {
            sample_action(&logits, rng)
        };
        let y = model.sample_observation(hypothesis, a, rng)?;
        belief.update_in_place(a, y, model)?;
        let g = belief.error_probability();
        out.rewards.push(out.gammas[t] - g);
        out.gammas.push(g);
        out.actions.push(a);
        out.observations.push(y);
        out.log_probs.push(logp);
        out.values.push(value);
        previous = Some((a, y));
    }
    out.map_estimate = belief.map_decode();
    Ok(out)
}

/// Generalized advantage estimation. Returns `(advantages, returns)`.
pub fn gae(rewards: &[f64], values: &[f64], bootstrap: f64, discount: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return Err(Error::Shape {
            context: "values vs rewards".into(),
            expected: rewards.len(),
            got: values.len(),
        });
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + discount * next_value - values[t];
        acc = delta + discount * lambda * acc;
        adv[t] = acc;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// `min(ρ·A, clip(ρ, 1 − ε, 1 + ε)·A)`
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatch_episodes: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub max_grad_norm: f64,
    pub total_episodes: usize,
    pub horizon: usize,
    /// Episodes collected per update.
    pub rollout_episodes: usize,
    /// Learning-curve point every this many training episodes.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            discount: 0.99,
            gae_lambda: 0.95,
            epochs: 10,
            minibatch_episodes: 16,
            entropy_coef: 0.01,
            value_coef: 0.5,
            lr: 3e-4,
            max_grad_norm: 0.5,
            total_episodes: 30_000,
            horizon: 10,
            rollout_episodes: 64,
            eval_every: 2_000,
            eval_episodes: 1_000,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("ppo: {m}")));
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) || !(self.gae_lambda >= 0.0 && self.gae_lambda <= 1.0) {
            return bad("discount must lie in (0, 1] and lambda in [0, 1]");
        }
        if self.epochs == 0
            || self.minibatch_episodes == 0
            || self.horizon == 0
            || self.rollout_episodes == 0
            || self.eval_episodes == 0
        {
            return bad("counts must be positive");
        }
        if !(self.lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning rate and gradient clip must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// A rollout prepared for optimization.
struct Prepared<'a> {
    rollout: &'a Rollout,
    inputs: Vec<f64>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

#[derive(Default)]
struct Partial {
    policy: f64,
    value: f64,
    entropy: f64,
    clipped: usize,
}

/// Gradient of the minibatch loss restricted to one episode.
/// `n_policy` and `n_value` normalize the sums over the whole minibatch.
fn episode_gradient(
    net: &PolicyNet,
    ep: &Prepared<'_>,
    cfg: &PpoConfig,
    n_policy: f64,
    n_value: f64,
    grads: &mut [f64],
) -> Partial {
    let r = ep.rollout;
    let steps = r.len();
    let n_a = net.n_actions();
    let fwd = net.forward_episode(&net.params, &ep.inputs, steps);
    let mut d_logits = vec![0.0; steps * n_a];
    let mut d_values = vec![0.0; steps];
    let mut part = Partial::default();
    for t in 0..steps {
        let err = fwd.values[t] - ep.returns[t];
        part.value += err * err / n_value;
        d_values[t] = cfg.value_coef * 2.0 * err / n_value;
        // the first action is uniform, not a policy decision
        if t == 0 {
            continue;
        }
        let z = &fwd.logits[t * n_a..(t + 1) * n_a];
        let p = softmax(z);
        let a = r.actions[t];
        let logp = z[a] - log_sum_exp(z);
        let ratio = (logp - r.log_probs[t]).exp();
        let adv = ep.advantages[t];
        let s = clipped_surrogate(ratio, adv, cfg.clip);
        let unclipped = ratio * adv <= ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
        if !unclipped {
            part.clipped += 1;
        }
        let entropy: f64 = -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>();
        part.policy -= s / n_policy;
        part.entropy += entropy / n_policy;
        // ∂(−s)/∂logp = −ρA on the unclipped branch, 0 otherwise
        let g_logp = if unclipped { -ratio * adv / n_policy } else { 0.0 };
        let dl = &mut d_logits[t * n_a..(t + 1) * n_a];
        for k in 0..n_a {
            let onehot = if k == a { 1.0 } else { 0.0 };
            let d_logp = onehot - p[k];
            let log_pk = if p[k] > 0.0 { p[k].ln() } else { 0.0 };
            let d_entropy = -p[k] * (log_pk + entropy);
            dl[k] = g_logp * d_logp - cfg.entropy_coef * d_entropy / n_policy;
        }
    }
    net.backward_episode(&net.params, fwd, &d_logits, &d_values, grads);
    part
}

/// Total minibatch loss `−surrogate + c_v·MSE − c_e·entropy` and its
/// gradient, summed over episodes in index order.
fn minibatch_gradient(net: &PolicyNet, batch: &[&Prepared<'_>], cfg: &PpoConfig) -> (Vec<f64>, Partial) {
    let n_policy = batch.iter().map(|e| e.rollout.len().saturating_sub(1)).sum::<usize>().max(1) as f64;
    let n_value = batch.iter().map(|e| e.rollout.len()).sum::<usize>() as f64;
    let parts: Vec<(Vec<f64>, Partial)> = batch
        .par_iter()
        .map(|ep| {
            let mut g = vec![0.0; net.layout.len()];
            let p = episode_gradient(net, ep, cfg, n_policy, n_value, &mut g);
            (g, p)
        })
        .collect();
    let mut grad = vec![0.0; net.layout.len()];
    let mut total = Partial::default();
    for (g, p) in parts {
        axpy(&mut grad, 1.0, &g);
        total.policy += p.policy;
        total.value += p.value;
        total.entropy += p.entropy;
        total.clipped += p.clipped;
    }
    (grad, total)
}

/// Loss value and gradient on a batch without updating; exposed for checks.
pub fn ppo_loss_and_gradient(net: &PolicyNet, batch: &[Rollout], cfg: &PpoConfig) -> Result<(f64, Vec<f64>)> {
    let prepared = prepare(net, batch, cfg)?;
    let refs: Vec<&Prepared<'_>> = prepared.iter().collect();
    let (g, p) = minibatch_gradient(net, &refs, cfg);
    Ok((p.policy + cfg.value_coef * p.value - cfg.entropy_coef * p.entropy, g))
}

fn prepare<'a>(net: &PolicyNet, batch: &'a [Rollout], cfg: &PpoConfig) -> Result<Vec<Prepared<'a>>> {
    if batch.is_empty() {
        return Err(Error::Empty("rollout batch"));
    }
    let mut prepared = Vec::with_capacity(batch.len());
    for r in batch {
        let (advantages, returns) = gae(&r.rewards, &r.values, 0.0, cfg.discount, cfg.gae_lambda)?;
        prepared.push(Prepared {
            rollout: r,
            inputs: net.episode_inputs(&r.actions, &r.observations),
            advantages,
            returns,
        });
    }
    // normalize advantages over policy decisions (t ≥ 2) of the batch
    let decisions: Vec<f64> = prepared.iter().flat_map(|p| p.advantages.iter().skip(1).copied()).collect();
    if !decisions.is_empty() {
        let n = decisions.len() as f64;
        let mean = decisions.iter().sum::<f64>() / n;
        let var = decisions.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-8);
        for p in &mut prepared {
            for a in p.advantages.iter_mut().skip(1) {
                *a = (*a - mean) / std;
            }
        }
    }
    Ok(prepared)
}

/// Several epochs of minibatch Adam steps over whole episodes.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut PolicyNet,
    adam: &mut AdamState,
    batch: &[Rollout],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let prepared = prepare(net, batch, cfg)?;
    let layout = net.layout.clone();
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut stats = UpdateStats::default();
    let mut decisions = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_episodes) {
            let refs: Vec<&Prepared<'_>> = chunk.iter().map(|&i| &prepared[i]).collect();
            let (mut grad, part) = minibatch_gradient(net, &refs, cfg);
            let loss = part.policy + cfg.value_coef * part.value - cfg.entropy_coef * part.entropy;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "ppo loss (policy {}, value {}, entropy {})",
                    part.policy, part.value, part.entropy
                )));
            }
            clip_grad_norm(&mut grad, cfg.max_grad_norm);
            adam.step(&mut net.params, &grad, &layout)?;
            stats.policy_loss += part.policy;
            stats.value_loss += part.value;
            stats.entropy += part.entropy;
            stats.clip_fraction += part.clipped as f64;
            decisions += refs.iter().map(|e| e.rollout.len().saturating_sub(1)).sum::<usize>();
            stats.minibatches += 1;
        }
    }
    let m = stats.minibatches.max(1) as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.clip_fraction /= decisions.max(1) as f64;
    Ok(stats)
}

/// One point of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episodes_trained: usize,
    pub train_env_error: f64,
    pub mean_episode_reward: f64,
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("episodes_trained,train_env_error,mean_episode_reward\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{}\n",
            p.episodes_trained, p.train_env_error, p.mean_episode_reward
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct PolicyTraining {
    pub policy: PolicyNet,
    pub curve: Vec<CurvePoint>,
}

const ROLLOUT_SALT: u64 = 0x5201;
const EVAL_SALT: u64 = 0x5202;
const SHUFFLE_SALT: u64 = 0x5203;
const INIT_SALT: u64 = 0x5204;

/// MAP-decoded error of the tracker and mean reward over `n` fresh episodes
/// drawn from a fixed evaluation stream.
pub fn evaluate_policy(
    policy: &PolicyNet,
    model: &ObservationModel,
    prior: &[f64],
    horizon: usize,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let eval_seed = derive_seed(seed, EVAL_SALT);
    let results: Vec<Result<(bool, f64)>> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let r = rollout(policy, model, prior, horizon, &mut episode_stream(eval_seed, k))?;
            Ok((r.map_estimate != r.hypothesis, r.total_reward()))
        })
        .collect();
    let mut errors = 0usize;
    let mut reward = 0.0;
    for r in results {
        let (e, rw) = r?;
        errors += e as usize;
        reward += rw;
    }
    Ok((errors as f64 / n as f64, reward / n as f64))
}

/// Alternate rollout collection and updates until `total_episodes` have
/// been played; a curve point is recorded at start and every `eval_every`
/// episodes, plus at the end.
pub fn train_policy(env: &EnvironmentPair, config: &PolicyConfig, ppo: &PpoConfig, seed: u64) -> Result<PolicyTraining> {
    ppo.validate()?;
    let model = &env.train;
    let encoding = StepEncoding::new(model.n_actions(), model.n_observations());
    let mut net = PolicyNet::new(encoding, config.clone(), derive_seed(seed, INIT_SALT))?;
    let mut adam = AdamState::new(AdamConfig::with_lr(ppo.lr), net.layout.len());
    let rollout_seed = derive_seed(seed, ROLLOUT_SALT);
    let mut shuffle_rng = episode_stream(derive_seed(seed, SHUFFLE_SALT), 0);
    let mut curve = Vec::new();
    let point = |net: &PolicyNet, done: usize| -> Result<CurvePoint> {
        let (err, rw) = evaluate_policy(net, model, &env.prior, ppo.horizon, ppo.eval_episodes, seed)?;
        Ok(CurvePoint {
            episodes_trained: done,
            train_env_error: err,
            mean_episode_reward: rw,
        })
    };
    curve.push(point(&net, 0)?);
    let mut done = 0usize;
    let mut next_eval = ppo.eval_every;
    while done < ppo.total_episodes {
        let n = ppo.rollout_episodes.min(ppo.total_episodes - done);
        let batch: Vec<Result<Rollout>> = (done..done + n)
            .into_par_iter()
            .map(|k| rollout(&net, model, &env.prior, ppo.horizon, &mut episode_stream(rollout_seed, k as u64)))
            .collect();
        let batch = batch.into_iter().collect::<Result<Vec<_>>>()?;
        // a single action leaves nothing to learn
        if net.n_actions() > 1 {
            ppo_update(&mut net, &mut adam, &batch, ppo, &mut shuffle_rng)?;
        }
        done += n;
        if ppo.eval_every > 0 && done >= next_eval && done < ppo.total_episodes {
            curve.push(point(&net, done)?);
            next_eval += ppo.eval_every;
        }
    }
    if curve.last().map(|p| p.episodes_trained) != Some(done) {
        curve.push(point(&net, done)?);
    }
    Ok(PolicyTraining { policy: net, curve })
}
