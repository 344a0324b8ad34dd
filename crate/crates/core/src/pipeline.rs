//! Episode simulation, dataset generation, the composite agent and the
//! three-phase training pipeline.
//!
//! Datasets are always generated on the training model; composite
//! evaluation runs on whichever model the caller passes (the testing model
//! in every shipped workflow).

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::checkpoint::{digest_hex, Checkpoint, RunManifest};
use crate::chernoff::{ll_stop, ChernoffPolicy, StopDecision};
use crate::decoders::{
    train_inference, train_monitor, Decoder, DecoderConfig, Label, SequenceDataset, SequenceRecord, Split,
    StepEncoding, Target, TrainConfig, TrainOutcome,
};
use crate::env::{load_env_config, presets, sample_hypothesis, EnvSide, EnvironmentPair, ObservationModel};
use crate::error::{Error, Result};
use crate::eval::{self, EvalAgent, EvalMode, EvalSummary};
use crate::policy::{curve_csv, sample_action, train_policy, CurvePoint, PolicyConfig, PolicyCursor, PolicyNet, PpoConfig};
use crate::rng::{derive_seed, episode_stream};

/// Who picks the experiments.
#[derive(Clone, Copy)]
pub enum Selector<'a> {
    /// uniform over actions
    Random,
    /// modified Chernoff on the agent's belief
    Chernoff(&'a ChernoffPolicy),
    /// recurrent policy; the first action is uniform
    Learned(&'a PolicyNet),
}

/// When an episode ends. `t` counts completed steps.
#[derive(Clone, Copy)]
pub enum StopRule<'a> {
    /// exactly `T` steps
    Fixed(usize),
    /// horizon drawn uniformly from `[lo, hi]` at episode start
    RandomHorizon(usize, usize),
    /// first `t` with monitor score `< c`, or `t_cap`
    Monitor { monitor: &'a Decoder, c: f64, t_cap: usize },
    /// first `t` with `LL_t > −ln c` on the agent's belief, or `t_cap`
    LogLikelihood { c: f64, t_cap: usize },
}

/// Everything that defines how one episode is generated.
#[derive(Clone, Copy)]
pub struct EpisodeSetup<'a> {
    pub selector: Selector<'a>,
    /// model that produces observations
    pub env: &'a ObservationModel,
    pub prior: &'a [f64],
    pub stop: StopRule<'a>,
    /// model behind the agent's own belief (Chernoff selection, MAP
    /// decoding, the log-likelihood stop rule)
    pub belief_model: Option<&'a ObservationModel>,
    /// hidden tracker used only to compute labels
    pub label_model: Option<&'a ObservationModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub hypothesis: usize,
    pub actions: Vec<usize>,
    pub observations: Vec<usize>,
    pub monitor_scores: Vec<f64>,
    pub belief: Option<BeliefState>,
    pub tracker: Option<BeliefState>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

enum Driver<'a> {
    Random,
    Chernoff(&'a ChernoffPolicy),
    Learned { cursor: PolicyCursor<'a>, previous: Option<(usize, usize)> },
}

impl<'a> Driver<'a> {
    fn choose<R: Rng + ?Sized>(&mut self, t: usize, n_actions: usize, belief: Option<&BeliefState>, rng: &mut R) -> usize {
        match self {
            Driver::Random => rng.random_range(0..n_actions),
            Driver::Chernoff(p) => p.act(belief.expect("checked in simulate"), rng),
            Driver::Learned { cursor, previous } => {
                let (logits, _) = cursor.step(*previous);
                if t == 0 {
                    rng.random_range(0..n_actions)
                } else {
                    sample_action(&logits, rng).0
                }
            }
        }
    }

    fn observe(&mut self, a: usize, y: usize) {
        if let Driver::Learned { previous, .. } = self {
            *previous = Some((a, y));
        }
    }
}

/// Run one episode. Per-episode randomness is consumed in a fixed order:
/// random horizon (if any), hypothesis, then per step the action draw and
/// the observation.
pub fn simulate<R: Rng + ?Sized>(setup: &EpisodeSetup<'_>, rng: &mut R) -> Result<Episode> {
    let n_actions = setup.env.n_actions();
    let cap = match setup.stop {
        StopRule::Fixed(t) => t,
        StopRule::RandomHorizon(lo, hi) => {
            if lo == 0 || lo > hi {
                return Err(Error::config(format!("horizon range [{lo}, {hi}] is invalid")));
            }
            rng.random_range(lo..=hi)
        }
        StopRule::Monitor { t_cap, .. } | StopRule::LogLikelihood { t_cap, .. } => t_cap,
    };
    if cap == 0 {
        return Err(Error::config("episode horizon must be at least 1"));
    }
    let needs_belief = matches!(setup.selector, Selector::Chernoff(_)) || matches!(setup.stop, StopRule::LogLikelihood { .. });
    if needs_belief && setup.belief_model.is_none() {
        return Err(Error::config("this selector or stop rule needs a belief model"));
    }
    if let Selector::Learned(p) = setup.selector {
        if p.n_actions() != n_actions || p.encoding.n_observations != setup.env.n_observations() {
            return Err(Error::config("policy alphabet does not match the environment"));
        }
    }
    let hypothesis = sample_hypothesis(setup.prior, rng)?;
    let mut belief = setup.belief_model.map(|_| BeliefState::new(setup.prior)).transpose()?;
    let mut tracker = setup.label_model.map(|_| BeliefState::new(setup.prior)).transpose()?;
    let mut driver = match setup.selector {
        Selector::Random => Driver::Random,
        Selector::Chernoff(p) => Driver::Chernoff(p),
        Selector::Learned(p) => Driver::Learned {
            cursor: p.cursor(),
            previous: None,
        },
    };
    let mut session = match setup.stop {
        StopRule::Monitor { monitor, .. } => Some(monitor.session()),
        _ => None,
    };
    let mut ep = Episode {
        hypothesis,
        actions: Vec::with_capacity(cap),
        observations: Vec::with_capacity(cap),
        monitor_scores: Vec::new(),
        belief: None,
        tracker: None,
    };
    for t in 0..cap {
        let a = driver.choose(t, n_actions, belief.as_ref(), rng);
        let y = setup.env.sample_observation(hypothesis, a, rng)?;
        driver.observe(a, y);
        if let (Some(b), Some(m)) = (belief.as_mut(), setup.belief_model) {
            b.update_in_place(a, y, m)?;
        }
        if let (Some(b), Some(m)) = (tracker.as_mut(), setup.label_model) {
            b.update_in_place(a, y, m)?;
        }
        ep.actions.push(a);
        ep.observations.push(y);
        let stop = match setup.stop {
            StopRule::Fixed(_) | StopRule::RandomHorizon(..) => false,
            StopRule::Monitor { c, .. } => {
                let s = session.as_mut().expect("monitor session").push(a, y)?[0];
                ep.monitor_scores.push(s);
                s < c
            }
            StopRule::LogLikelihood { c, .. } => {
                ll_stop(belief.as_ref().expect("belief present"), c)? == StopDecision::Stop
            }
        };
        if stop {
            break;
        }
    }
    ep.belief = belief;
    ep.tracker = tracker;
    Ok(ep)
}

/// Label of a finished episode; `None` when the sample is discarded
/// (log-likelihood index above 100).
pub fn label_episode(ep: &Episode, target: Target) -> Result<Option<Label>> {
    let tracker = || ep.tracker.as_ref().ok_or_else(|| Error::config("labels need a tracker model"));
    Ok(Some(match target {
        Target::TrueHypothesis => Label::Class(ep.hypothesis),
        Target::MapEstimate => Label::Class(tracker()?.map_decode()),
        Target::ErrorProbability => Label::Scalar(tracker()?.error_probability()),
        Target::Confidence => Label::Scalar(tracker()?.confidence()),
        Target::LogLikelihoodIndex => {
            let (ll, _) = tracker()?.log_likelihood_index()?;
            if ll > 100.0 {
                return Ok(None);
            }
            Label::Scalar(ll)
        }
    }))
}

/// Generate `n` episodes with ids `id_start..id_start + n`; episode `id`
/// uses stream `(seed, id)`. Discarded samples are dropped.
pub fn generate_records(
    setup: &EpisodeSetup<'_>,
    target: Target,
    n: usize,
    split: Split,
    seed: u64,
    id_start: u64,
) -> Result<Vec<SequenceRecord>> {
    if setup.label_model.is_none() && target != Target::TrueHypothesis {
        return Err(Error::config("labels other than the true hypothesis need a tracker model"));
    }
    let out: Vec<Result<Option<SequenceRecord>>> = (id_start..id_start + n as u64)
        .into_par_iter()
        .map(|id| {
            let ep = simulate(setup, &mut episode_stream(seed, id))?;
            Ok(label_episode(&ep, target)?.map(|label| SequenceRecord {
                id,
                actions: ep.actions,
                observations: ep.observations,
                label,
                label_kind: target.label_kind(),
                split,
            }))
        })
        .collect();
    let mut records = Vec::with_capacity(n);
    for r in out {
        if let Some(rec) = r? {
            records.push(rec);
        }
    }
    Ok(records)
}

/// Split sizes: validation and test counts rounded, the rest for training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitFractions {
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            validation: 0.1,
            test: 0.0,
        }
    }
}

impl SplitFractions {
    fn counts(&self, n: usize) -> Result<[(Split, usize); 3]> {
        if !(0.0..1.0).contains(&self.validation) || !(0.0..1.0).contains(&self.test) || self.validation + self.test >= 1.0 {
            return Err(Error::config("split fractions must be in [0, 1) and sum below 1"));
        }
        let val = (n as f64 * self.validation).round() as usize;
        let test = (n as f64 * self.test).round() as usize;
        let train = n.saturating_sub(val + test);
        Ok([(Split::Train, train), (Split::Validation, val), (Split::Test, test)])
    }
}

/// One dataset with consecutive ids for train, validation and test.
pub fn generate_dataset(
    setup: &EpisodeSetup<'_>,
    target: Target,
    n: usize,
    splits: SplitFractions,
    seed: u64,
) -> Result<SequenceDataset> {
    let mut items = Vec::with_capacity(n);
    let mut next = 0u64;
    for (split, count) in splits.counts(n)? {
        items.extend(generate_records(setup, target, count, split, seed, next)?);
        next += count as u64;
    }
    SequenceDataset::new(
        StepEncoding::new(setup.env.n_actions(), setup.env.n_observations()),
        target.label_kind(),
        items,
    )
}

/// Monitor data: policy episodes on the training model with horizons drawn
/// from `[lo, hi]`, labeled from the training-model tracker.
pub fn gen_monitor_dataset(
    policy: &PolicyNet,
    env: &EnvironmentPair,
    n: usize,
    horizon: (usize, usize),
    target: Target,
    splits: SplitFractions,
    seed: u64,
) -> Result<SequenceDataset> {
    let setup = EpisodeSetup {
        selector: Selector::Learned(policy),
        env: &env.train,
        prior: &env.prior,
        stop: StopRule::RandomHorizon(horizon.0, horizon.1),
        belief_model: None,
        label_model: Some(&env.train),
    };
    generate_dataset(&setup, target, n, splits, seed)
}

/// Inference data: policy episodes on the training model, stopped by the
/// monitor (`γ̄_t < c` or `t_cap`), or run for exactly `t_cap` steps when no
/// monitor is given. Labels are the true hypothesis.
pub fn gen_inference_dataset(
    policy: &PolicyNet,
    monitor: Option<&Decoder>,
    env: &EnvironmentPair,
    n: usize,
    c: f64,
    t_cap: usize,
    splits: SplitFractions,
    seed: u64,
) -> Result<SequenceDataset> {
    let stop = match monitor {
        Some(m) => StopRule::Monitor { monitor: m, c, t_cap },
        None => StopRule::Fixed(t_cap),
    };
    let setup = EpisodeSetup {
        selector: Selector::Learned(policy),
        env: &env.train,
        prior: &env.prior,
        stop,
        belief_model: None,
        label_model: None,
    };
    generate_dataset(&setup, Target::TrueHypothesis, n, splits, seed)
}

/// Modified-Chernoff episodes. The agent acts with the exact model of the
/// side it runs on; labels come from a training-model tracker.
pub fn gen_chernoff_dataset(
    env: &EnvironmentPair,
    side: EnvSide,
    n: usize,
    horizon: (usize, usize),
    target: Target,
    splits: SplitFractions,
    seed: u64,
) -> Result<SequenceDataset> {
    let model = env.model(side);
    let chernoff = ChernoffPolicy::new(model)?;
    let setup = EpisodeSetup {
        selector: Selector::Chernoff(&chernoff),
        env: model,
        prior: &env.prior,
        stop: StopRule::RandomHorizon(horizon.0, horizon.1),
        belief_model: Some(model),
        label_model: Some(&env.train),
    };
    generate_dataset(&setup, target, n, splits, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub hypothesis: usize,
    pub inferred: usize,
    pub stop_time: usize,
    pub monitor_scores: Vec<f64>,
    pub correct: bool,
}

/// Policy picks experiments, the monitor (if any) decides when to stop,
/// the inference decoder names the hypothesis. Without a monitor the
/// episode runs exactly `t_cap` steps.
pub fn run_composite_episode<R: Rng + ?Sized>(
    policy: &PolicyNet,
    monitor: Option<&Decoder>,
    inference: &Decoder,
    env: &ObservationModel,
    prior: &[f64],
    c: f64,
    t_cap: usize,
    rng: &mut R,
) -> Result<EpisodeResult> {
    let stop = match monitor {
        Some(m) => StopRule::Monitor { monitor: m, c, t_cap },
        None => StopRule::Fixed(t_cap),
    };
    let setup = EpisodeSetup {
        selector: Selector::Learned(policy),
        env,
        prior,
        stop,
        belief_model: None,
        label_model: None,
    };
    let ep = simulate(&setup, rng)?;
    let (inferred, _) = inference.classify(&ep.actions, &ep.observations)?;
    Ok(EpisodeResult {
        hypothesis: ep.hypothesis,
        inferred,
        stop_time: ep.len(),
        monitor_scores: ep.monitor_scores,
        correct: inferred == ep.hypothesis,
    })
}

/// Fixed horizon (no monitor) or sequential with tolerance `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PipelineMode {
    Fixed { horizon: usize },
    Sequential { c: f64, t_cap: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorDataConfig {
    pub episodes: usize,
    pub horizon_min: usize,
    pub horizon_max: usize,
    pub target: Target,
    pub splits: SplitFractions,
}

impl Default for MonitorDataConfig {
    fn default() -> Self {
        Self {
            episodes: 20_000,
            horizon_min: 1,
            horizon_max: 50,
            target: Target::ErrorProbability,
            splits: SplitFractions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceDataConfig {
    pub episodes: usize,
    pub splits: SplitFractions,
}

impl Default for InferenceDataConfig {
    fn default() -> Self {
        Self {
            episodes: 20_000,
            splits: SplitFractions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineEvalConfig {
    pub episodes: usize,
    /// tolerances evaluated in sequential mode
    pub c_values: Vec<f64>,
    /// also evaluate the Chernoff and random baselines
    pub baselines: bool,
}

impl Default for PipelineEvalConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            c_values: vec![0.3, 0.2, 0.1, 0.05],
            baselines: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// preset name or path to an environment file
    pub env: String,
    pub mode: PipelineMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub monitor_data: MonitorDataConfig,
    #[serde(default = "default_monitor")]
    pub monitor: DecoderConfig,
    #[serde(default)]
    pub monitor_train: TrainConfig,
    #[serde(default)]
    pub inference_data: InferenceDataConfig,
    #[serde(default)]
    pub inference: DecoderConfig,
    #[serde(default)]
    pub inference_train: TrainConfig,
    #[serde(default)]
    pub eval: PipelineEvalConfig,
}

fn default_monitor() -> DecoderConfig {
    DecoderConfig {
        bidirectional: true,
        dropout: 0.2,
        ..DecoderConfig::default()
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&s).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            PipelineMode::Fixed { horizon } if horizon == 0 => return Err(Error::config("mode.horizon must be ≥ 1")),
            PipelineMode::Sequential { c, t_cap } => {
                if !(c > 0.0 && c < 1.0) {
                    return Err(Error::config("mode.c must lie in (0, 1)"));
                }
                if t_cap == 0 {
                    return Err(Error::config("mode.t_cap must be ≥ 1"));
                }
                let d = &self.monitor_data;
                if d.horizon_min == 0 || d.horizon_min > d.horizon_max {
                    return Err(Error::config("monitor_data horizon range is invalid"));
                }
                if d.episodes == 0 {
                    return Err(Error::config("monitor_data.episodes must be ≥ 1"));
                }
            }
            _ => {}
        }
        if self.inference_data.episodes == 0 {
            return Err(Error::config("inference_data.episodes must be ≥ 1"));
        }
        if self.eval.episodes == 0 {
            return Err(Error::config("eval.episodes must be ≥ 1"));
        }
        self.ppo.validate()
    }

    /// sha256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        digest_hex(&serde_json::to_vec(self).expect("pipeline config serializes"))
    }

    /// Resolve `env` relative to `base` when it is not a preset name.
    pub fn environment(&self, base: Option<&Path>) -> Result<EnvironmentPair> {
        resolve_env(&self.env, base)
    }
}

/// Preset name or environment file path.
pub fn resolve_env(name: &str, base: Option<&Path>) -> Result<EnvironmentPair> {
    if let Some(env) = presets::by_name(name) {
        return Ok(env);
    }
    let mut path = PathBuf::from(name);
    if path.is_relative() {
        if let Some(b) = base {
            let candidate = b.join(&path);
            if candidate.exists() {
                path = candidate;
            }
        }
    }
    load_env_config(path)
}

/// Seeds of the individual phases, all derived from the master seed.
pub fn phase_seeds(seed: u64) -> [(&'static str, u64); 6] {
    [
        ("policy", derive_seed(seed, 1)),
        ("monitor_data", derive_seed(seed, 2)),
        ("monitor_train", derive_seed(seed, 3)),
        ("inference_data", derive_seed(seed, 4)),
        ("inference_train", derive_seed(seed, 5)),
        ("eval", derive_seed(seed, 6)),
    ]
}

pub struct PipelineOutput {
    pub policy: PolicyNet,
    pub curve: Vec<CurvePoint>,
    pub monitor: Option<TrainOutcome>,
    pub inference: TrainOutcome,
    pub summaries: Vec<EvalSummary>,
}

/// Phase 1 trains the policy, phase 2 the monitor (sequential mode only),
/// phase 3 the inference decoder; then the composite agent is evaluated on
/// the testing model. Errors are tagged with the failing phase.
pub fn run_pipeline(config: &PipelineConfig, env: &EnvironmentPair) -> Result<PipelineOutput> {
    config.validate()?;
    let seeds: std::collections::HashMap<_, _> = phase_seeds(config.seed).into_iter().collect();
    let mut ppo = config.ppo.clone();
    let horizon = match config.mode {
        PipelineMode::Fixed { horizon } => horizon,
        PipelineMode::Sequential { t_cap, .. } => t_cap,
    };
    ppo.horizon = horizon;
    let trained = train_policy(env, &config.policy, &ppo, seeds["policy"]).map_err(|e| e.in_phase("policy"))?;
    let policy = trained.policy;

    let monitor = match config.mode {
        PipelineMode::Fixed { .. } => None,
        PipelineMode::Sequential { .. } => {
            let d = &config.monitor_data;
            let data = gen_monitor_dataset(
                &policy,
                env,
                d.episodes,
                (d.horizon_min, d.horizon_max),
                d.target,
                d.splits,
                seeds["monitor_data"],
            )
            .map_err(|e| e.in_phase("monitor"))?;
            let train = TrainConfig {
                seed: seeds["monitor_train"],
                ..config.monitor_train.clone()
            };
            Some(train_monitor(&data, &config.monitor, &train).map_err(|e| e.in_phase("monitor"))?)
        }
    };

    let c = match config.mode {
        PipelineMode::Fixed { .. } => 0.5,
        PipelineMode::Sequential { c, .. } => c,
    };
    let data = gen_inference_dataset(
        &policy,
        monitor.as_ref().map(|m| &m.decoder),
        env,
        config.inference_data.episodes,
        c,
        horizon,
        config.inference_data.splits,
        seeds["inference_data"],
    )
    .map_err(|e| e.in_phase("inference"))?;
    let train = TrainConfig {
        seed: seeds["inference_train"],
        ..config.inference_train.clone()
    };
    let inference = train_inference(&data, env.train.n_hypotheses(), &config.inference, &train)
        .map_err(|e| e.in_phase("inference"))?;

    let summaries = evaluate_pipeline(config, env, &policy, monitor.as_ref().map(|m| &m.decoder), &inference.decoder, seeds["eval"])
        .map_err(|e| e.in_phase("eval"))?;
    Ok(PipelineOutput {
        policy,
        curve: trained.curve,
        monitor,
        inference,
        summaries,
    })
}

fn evaluate_pipeline(
    config: &PipelineConfig,
    env: &EnvironmentPair,
    policy: &PolicyNet,
    monitor: Option<&Decoder>,
    inference: &Decoder,
    seed: u64,
) -> Result<Vec<EvalSummary>> {
    let n = config.eval.episodes;
    let composite = EvalAgent::Composite {
        policy,
        monitor,
        inference,
    };
    let modes: Vec<EvalMode> = match config.mode {
        PipelineMode::Fixed { horizon } => vec![EvalMode::Fixed { horizon }],
        PipelineMode::Sequential { t_cap, .. } => config
            .eval
            .c_values
            .iter()
            .map(|&c| EvalMode::Sequential { c, t_cap })
            .collect(),
    };
    let mut out = Vec::new();
    for mode in modes {
        out.push(eval::evaluate(&composite, env, EnvSide::Test, mode, n, seed)?);
        if config.eval.baselines {
            if let EvalMode::Fixed { .. } = mode {
                let random = EvalAgent::Random {
                    inference: Some(inference),
                };
                out.push(eval::evaluate(&random, env, EnvSide::Test, mode, n, seed)?);
            }
            out.push(eval::evaluate(&EvalAgent::Chernoff, env, EnvSide::Test, mode, n, seed)?);
        }
    }
    Ok(out)
}

/// Write checkpoints, the learning curve, the report and the manifest.
/// Refuses to touch an existing non-empty directory unless `force` is set.
pub fn write_pipeline_artifacts(
    dir: &Path,
    run_id: &str,
    config: &PipelineConfig,
    out: &PipelineOutput,
    force: bool,
) -> Result<RunManifest> {
    prepare_run_dir(dir, force)?;
    let digest = config.digest();
    let seeds = phase_seeds(config.seed);
    let seed_of = |name: &str| seeds.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).unwrap_or(0);
    let mut manifest = RunManifest::new(
        run_id,
        "run-pipeline",
        serde_json::to_value(config).expect("pipeline config serializes"),
    );
    manifest.seeds.insert("master".into(), config.seed);
    for (name, s) in seeds {
        manifest.seeds.insert(name.into(), s);
    }
    Checkpoint::from_policy(&out.policy, seed_of("policy"), &digest).save(dir.join("policy.ckpt"))?;
    manifest.record(dir, "policy.ckpt")?;
    if let Some(m) = &out.monitor {
        Checkpoint::from_decoder(&m.decoder, seed_of("monitor_train"), &digest).save(dir.join("monitor.ckpt"))?;
        manifest.record(dir, "monitor.ckpt")?;
    }
    Checkpoint::from_decoder(&out.inference.decoder, seed_of("inference_train"), &digest)
        .save(dir.join("inference.ckpt"))?;
    manifest.record(dir, "inference.ckpt")?;
    write_file(dir, "learning_curve.csv", &curve_csv(&out.curve))?;
    manifest.record(dir, "learning_curve.csv")?;
    write_file(dir, "report.csv", &eval::results_csv(&out.summaries))?;
    manifest.record(dir, "report.csv")?;
    manifest.write(dir)?;
    Ok(manifest)
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

/// Create `dir`; an existing non-empty directory is an error without `force`.
pub fn prepare_run_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if non_empty && !force {
            return Err(Error::config(format!(
                "run directory {} already exists; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
