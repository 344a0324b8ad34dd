//! One function per subcommand. Run directories are named after the command,
//! the seed and a digest of the inputs, so identical invocations map to the
//! same directory and produce the same manifest.

use std::path::{Path, PathBuf};

use asht_core::checkpoint::{digest_hex, Checkpoint, ModelKind, RunManifest};
use asht_core::decoders::{train_inference, train_monitor, Decoder, SequenceDataset, StepEncoding};
use asht_core::eval::{self, EvalAgent, EvalMode, EvalSummary};
use asht_core::pipeline::{
    gen_chernoff_dataset, generate_dataset, phase_seeds, prepare_run_dir, run_pipeline, write_pipeline_artifacts,
    EpisodeSetup, PipelineMode, Selector, SplitFractions, StopRule,
};
use asht_core::policy::{curve_csv, train_policy, PolicyNet};
use asht_core::EnvSide;
use serde_json::json;

use crate::config::{resolve, Resolved};
use crate::error::CliError;
use crate::{
    AgentArg, BaselineAgentArg, BaselineArgs, Command, EvalArgs, GenDatasetArgs, GlobalArgs, ModeArg, ModeArgs,
    RunPipelineArgs, SideArg, SourceArg, SweepArgs, TrainDecoderArgs, TrainPolicyArgs,
};

const FAST_EPISODES: usize = 2_000;

pub fn dispatch(g: &GlobalArgs, command: Command) -> Result<(), CliError> {
    match command {
        Command::TrainPolicy(a) => train_policy_cmd(g, &a),
        Command::GenDataset(a) => gen_dataset_cmd(g, &a),
        Command::TrainMonitor(a) => train_decoder_cmd(g, &a, ModelKind::Monitor),
        Command::TrainInference(a) => train_decoder_cmd(g, &a, ModelKind::Inference),
        Command::RunPipeline(a) => run_pipeline_cmd(g, &a),
        Command::Eval(a) => eval_cmd(g, &a),
        Command::Baseline(a) => baseline_cmd(g, &a),
        Command::Sweep(a) => sweep_cmd(g, &a),
        Command::EnvValidate => env_validate_cmd(g),
    }
}

fn side(s: SideArg) -> EnvSide {
    match s {
        SideArg::Train => EnvSide::Train,
        SideArg::Test => EnvSide::Test,
    }
}

fn seed_of(g: &GlobalArgs, r: &Resolved) -> u64 {
    g.seed.unwrap_or(r.pipeline.seed)
}

fn phase_seed(seed: u64, name: &str) -> u64 {
    phase_seeds(seed)
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
        .expect("known phase")
}

fn eval_episodes(g: &GlobalArgs, explicit: Option<usize>, configured: usize) -> usize {
    match explicit {
        Some(n) => n,
        None if g.fast => FAST_EPISODES,
        None => configured,
    }
}

fn run_id(command: &str, seed: u64, inputs: &serde_json::Value) -> String {
    let digest = digest_hex(&serde_json::to_vec(inputs).expect("inputs serialize"));
    format!("{command}-s{seed}-{}", &digest[..12])
}

/// `--out`, else `$ASHT_RUN_DIR/<run id>`, else `runs/<run id>`.
fn run_dir(g: &GlobalArgs, id: &str) -> PathBuf {
    if let Some(out) = &g.out {
        return out.clone();
    }
    let root = std::env::var_os("ASHT_RUN_DIR").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(id)
}

fn write_artifact(dir: &Path, manifest: &mut RunManifest, name: &str, contents: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
    manifest.record(dir, name)?;
    Ok(())
}

fn load_policy(path: &Path) -> Result<PolicyNet, CliError> {
    Ok(Checkpoint::load(path)?.to_policy()?)
}

fn load_decoder(path: &Path, kind: ModelKind) -> Result<Decoder, CliError> {
    Ok(Checkpoint::load(path)?.to_decoder(kind)?)
}

fn train_policy_cmd(g: &GlobalArgs, a: &TrainPolicyArgs) -> Result<(), CliError> {
    let r = resolve(g.config.as_deref())?;
    let seed = seed_of(g, &r);
    let mut ppo = r.pipeline.ppo.clone();
    ppo.horizon = a.horizon.unwrap_or(match r.pipeline.mode {
        PipelineMode::Fixed { horizon } => horizon,
        PipelineMode::Sequential { t_cap, .. } => t_cap,
    });
    if let Some(n) = a.episodes {
        ppo.total_episodes = n;
    }
    let inputs = json!({ "env": r.pipeline.env, "policy": r.pipeline.policy, "ppo": ppo, "seed": seed });
    let id = run_id("train-policy", seed, &inputs);
    let dir = run_dir(g, &id);
    prepare_run_dir(&dir, g.force)?;

    let policy_seed = phase_seed(seed, "policy");
    let trained = train_policy(&r.env, &r.pipeline.policy, &ppo, policy_seed)?;
    let digest = digest_hex(&serde_json::to_vec(&inputs).expect("inputs serialize"));
    let mut manifest = RunManifest::new(id, "train-policy", inputs);
    manifest.seeds.insert("master".into(), seed);
    manifest.seeds.insert("policy".into(), policy_seed);
    let ckpt = Checkpoint::from_policy(&trained.policy, policy_seed, &digest).to_bytes();
    write_artifact(&dir, &mut manifest, "policy.ckpt", &ckpt)?;
    write_artifact(&dir, &mut manifest, "learning_curve.csv", curve_csv(&trained.curve).as_bytes())?;
    manifest.write(&dir)?;
    if let Some(last) = trained.curve.last() {
        println!(
            "episodes={} train_env_error={} mean_episode_reward={}",
            last.episodes_trained, last.train_env_error, last.mean_episode_reward
        );
    }
    println!("{}", dir.display());
    Ok(())
}

fn gen_dataset_cmd(g: &GlobalArgs, a: &GenDatasetArgs) -> Result<(), CliError> {
    let r = resolve(g.config.as_deref())?;
    let seed = seed_of(g, &r);
    let splits = SplitFractions {
        validation: a.validation,
        test: a.test_fraction,
    };
    let range = (a.horizon_min, a.horizon_max);
    let env_side = side(a.side);
    let policy = match (a.source, &a.policy) {
        (SourceArg::Policy, Some(p)) => Some(load_policy(p)?),
        (SourceArg::Policy, None) => return Err(CliError::Usage("--source policy needs --policy <checkpoint>".into())),
        (_, Some(_)) => return Err(CliError::Usage("--policy is only used with --source policy".into())),
        _ => None,
    };
    let inputs = json!({
        "env": r.pipeline.env,
        "source": format!("{:?}", a.source).to_lowercase(),
        "policy_digest": policy.as_ref().map(|p| digest_hex(&Checkpoint::from_policy(p, 0, "").to_bytes())),
        "side": env_side,
        "target": a.target,
        "episodes": a.episodes,
        "horizon": [a.horizon_min, a.horizon_max],
        "splits": splits,
        "seed": seed,
    });
    let id = run_id("gen-dataset", seed, &inputs);
    let dir = run_dir(g, &id);
    prepare_run_dir(&dir, g.force)?;

    let data = match a.source {
        SourceArg::Chernoff => gen_chernoff_dataset(&r.env, env_side, a.episodes, range, a.target, splits, seed)?,
        SourceArg::Policy | SourceArg::Random => {
            let selector = match &policy {
                Some(p) => Selector::Learned(p),
                None => Selector::Random,
            };
            let setup = EpisodeSetup {
                selector,
                env: r.env.model(env_side),
                prior: &r.env.prior,
                stop: StopRule::RandomHorizon(range.0, range.1),
                belief_model: None,
                label_model: Some(&r.env.train),
            };
            generate_dataset(&setup, a.target, a.episodes, splits, seed)?
        }
    };
    let mut manifest = RunManifest::new(id, "gen-dataset", inputs);
    manifest.seeds.insert("master".into(), seed);
    data.write_jsonl(dir.join("dataset.jsonl"))?;
    manifest.record(&dir, "dataset.jsonl")?;
    manifest.write(&dir)?;
    println!("records={}", data.len());
    println!("{}", dir.display());
    Ok(())
}

fn train_decoder_cmd(g: &GlobalArgs, a: &TrainDecoderArgs, kind: ModelKind) -> Result<(), CliError> {
    let r = resolve(g.config.as_deref())?;
    let seed = seed_of(g, &r);
    let encoding = StepEncoding::new(r.env.train.n_actions(), r.env.train.n_observations());
    let data = SequenceDataset::read_jsonl(&a.data, encoding)?;
    let data_digest = digest_hex(&std::fs::read(&a.data).map_err(|source| CliError::Io {
        path: a.data.clone(),
        source,
    })?);
    let (command, phase, mut decoder, mut train) = match kind {
        ModelKind::Monitor => (
            "train-monitor",
            "monitor_train",
            r.pipeline.monitor.clone(),
            r.pipeline.monitor_train.clone(),
        ),
        _ => (
            "train-inference",
            "inference_train",
            r.pipeline.inference.clone(),
            r.pipeline.inference_train.clone(),
        ),
    };
    if let Some(h) = a.hidden {
        decoder.hidden_size = h;
    }
    if let Some(e) = a.epochs {
        train.epochs = e;
    }
    train.seed = phase_seed(seed, phase);
    let inputs = json!({ "env": r.pipeline.env, "data": data_digest, "decoder": decoder, "train": train, "seed": seed });
    let id = run_id(command, seed, &inputs);
    let dir = run_dir(g, &id);
    prepare_run_dir(&dir, g.force)?;

    let outcome = match kind {
        ModelKind::Monitor => train_monitor(&data, &decoder, &train)?,
        _ => train_inference(&data, r.env.train.n_hypotheses(), &decoder, &train)?,
    };
    let digest = digest_hex(&serde_json::to_vec(&inputs).expect("inputs serialize"));
    let mut manifest = RunManifest::new(id, command, inputs);
    manifest.seeds.insert("master".into(), seed);
    manifest.seeds.insert(phase.into(), train.seed);
    let file = if kind == ModelKind::Monitor { "monitor.ckpt" } else { "inference.ckpt" };
    let ckpt = Checkpoint::from_decoder(&outcome.decoder, train.seed, &digest).to_bytes();
    write_artifact(&dir, &mut manifest, file, &ckpt)?;
    let metrics = json!({ "best_epoch": outcome.best_epoch, "history": outcome.history, "test": outcome.test });
    let mut text = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    text.push('\n');
    write_artifact(&dir, &mut manifest, "metrics.json", text.as_bytes())?;
    manifest.write(&dir)?;
    if let Some(t) = &outcome.test {
        println!("{}", serde_json::to_string(t).expect("metrics serialize"));
    }
    println!("{}", dir.display());
    Ok(())
}

fn run_pipeline_cmd(g: &GlobalArgs, a: &RunPipelineArgs) -> Result<(), CliError> {
    let r = resolve(g.config.as_deref())?;
    let mut cfg = r.pipeline.clone();
    cfg.seed = seed_of(g, &r);
    if let Some(n) = a.episodes {
        cfg.ppo.total_episodes = n;
    }
    cfg.eval.episodes = eval_episodes(g, None, cfg.eval.episodes);
    let value = serde_json::to_value(&cfg).expect("pipeline config serializes");
    let id = run_id("run-pipeline", cfg.seed, &value);
    let dir = run_dir(g, &id);
    prepare_run_dir(&dir, g.force)?;
    let mut out = run_pipeline(&cfg, &r.env)?;
    if !g.timing {
        out.summaries = eval::without_timing(std::mem::take(&mut out.summaries));
    }
    write_pipeline_artifacts(&dir, &id, &cfg, &out, true)?;
    print!("{}", eval::compare_report(&out.summaries)?);
    println!("{}", dir.display());
    Ok(())
}

/// Modes named on the command line; sequential mode requires `--c`.
fn modes(m: &ModeArgs, r: &Resolved) -> Result<Vec<EvalMode>, CliError> {
    match m.mode {
        ModeArg::Fixed => {
            if !m.thresholds.is_empty() {
                return Err(CliError::Usage("--c only applies to --mode sequential".into()));
            }
            let horizons = if m.horizons.is_empty() {
                match r.pipeline.mode {
                    PipelineMode::Fixed { horizon } if r.has_pipeline => vec![horizon],
                    _ => return Err(CliError::Usage("--mode fixed needs --T".into())),
                }
            } else {
                m.horizons.clone()
            };
            Ok(horizons.into_iter().map(|horizon| EvalMode::Fixed { horizon }).collect())
        }
        ModeArg::Sequential => {
            if m.thresholds.is_empty() {
                return Err(CliError::Usage("--mode sequential needs --c".into()));
            }
            if !m.horizons.is_empty() {
                return Err(CliError::Usage("--T only applies to --mode fixed; use --t-cap".into()));
            }
            Ok(m.thresholds.iter().map(|&c| EvalMode::Sequential { c, t_cap: m.t_cap }).collect())
        }
    }
}

fn evaluate_all(
    g: &GlobalArgs,
    agent: &EvalAgent<'_>,
    r: &Resolved,
    m: &ModeArgs,
    modes: &[EvalMode],
    seed: u64,
) -> Result<Vec<EvalSummary>, CliError> {
    let n = eval_episodes(g, m.episodes, r.pipeline.eval.episodes);
    let mut out = Vec::with_capacity(modes.len());
    for &mode in modes {
        out.push(eval::evaluate(agent, &r.env, side(m.side), mode, n, seed)?);
    }
    Ok(if g.timing { out } else { eval::without_timing(out) })
}

/// CSV on stdout; files (report.csv, report.txt, manifest) only with `--out`.
fn emit_report(
    g: &GlobalArgs,
    command: &str,
    seed: u64,
    inputs: serde_json::Value,
    summaries: &[EvalSummary],
) -> Result<(), CliError> {
    let csv = eval::results_csv(summaries);
    print!("{csv}");
    if let Some(dir) = &g.out {
        prepare_run_dir(dir, g.force)?;
        let id = run_id(command, seed, &inputs);
        let mut manifest = RunManifest::new(id, command, inputs);
        manifest.seeds.insert("master".into(), seed);
        write_artifact(dir, &mut manifest, "report.csv", csv.as_bytes())?;
        write_artifact(dir, &mut manifest, "report.txt", eval::compare_report(summaries)?.as_bytes())?;
        manifest.write(dir)?;
    }
    Ok(())
}

fn eval_cmd(g: &GlobalArgs, a: &EvalArgs) -> Result<(), CliError> {
    let r = resolve(g.config.as_deref())?;
    let seed = seed_of(g, &r);
    let modes = modes(&a.mode, &r)?;
    let sequential = a.mode.mode == ModeArg::Sequential;
    let from_run = |explicit: &Option<PathBuf>, file: &str| -> Option<PathBuf> {
        explicit.clone().or_else(|| {
            a.run
                .as_ref()
                .map(|d| d.join(file))
                .filter(|p| p.exists())
        })
    };
    let policy_path = from_run(&a.policy, "policy.ckpt");
    let monitor_path = from_run(&a.monitor, "monitor.ckpt");
    let inference_path = from_run(&a.inference, "inference.ckpt");

    let policy = policy_path.as_deref().map(load_policy).transpose()?;
    let monitor = monitor_path
        .as_deref()
        .map(|p| load_decoder(p, ModelKind::Monitor))
        .transpose()?;
    let inference = inference_path
        .as_deref()
        .map(|p| load_decoder(p, ModelKind::Inference))
        .transpose()?;

    let agent = match a.agent {
        AgentArg::Chernoff => EvalAgent::Chernoff,
        AgentArg::Random => EvalAgent::Random {
            inference: inference.as_ref(),
        },
        AgentArg::Composite => {
            let policy = policy
                .as_ref()
                .ok_or_else(|| CliError::Usage("composite agent needs --policy or --run".into()))?;
            let inference = inference
                .as_ref()
                .ok_or_else(|| CliError::Usage("composite agent needs --inference or --run".into()))?;
            if sequential && monitor.is_none() {
                return Err(CliError::Usage("sequential composite evaluation needs --monitor or --run".into()));
            }
            EvalAgent::Composite {
                policy,
                monitor: if sequential { monitor.as_ref() } else { None },
                inference,
            }
        }
    };
    let summaries = evaluate_all(g, &agent, &r, &a.mode, &modes, seed)?;
    let digest_file = |p: &Option<PathBuf>| -> Result<Option<String>, CliError> {
        p.as_ref()
            .map(|p| {
                std::fs::read(p)
                    .map(|b| digest_hex(&b))
                    .map_err(|source| CliError::Io { path: p.clone(), source })
            })
            .transpose()
    };
    let inputs = json!({
        "env": r.pipeline.env,
        "agent": agent.name(),
        "modes": modes,
        "policy": digest_file(&policy_path)?,
        "monitor": digest_file(&monitor_path)?,
        "inference": digest_file(&inference_path)?,
        "seed": seed,
    });
    emit_report(g, "eval", seed, inputs, &summaries)
}

fn baseline_cmd(g: &GlobalArgs, a: &BaselineArgs) -> Result<(), CliError> {
    let r = resolve(g.config.as_deref())?;
    let seed = seed_of(g, &r);
    let modes = modes(&a.mode, &r)?;
    let agent = match a.agent {
        BaselineAgentArg::Chernoff => EvalAgent::Chernoff,
        BaselineAgentArg::Random => EvalAgent::Random { inference: None },
    };
    let summaries = evaluate_all(g, &agent, &r, &a.mode, &modes, seed)?;
    let inputs = json!({ "env": r.pipeline.env, "agent": agent.name(), "modes": modes, "seed": seed });
    emit_report(g, "baseline", seed, inputs, &summaries)
}

fn sweep_cmd(g: &GlobalArgs, a: &SweepArgs) -> Result<(), CliError> {
    let r = resolve(g.config.as_deref())?;
    let seed = seed_of(g, &r);
    let path = a
        .policy
        .clone()
        .or_else(|| a.run.as_ref().map(|d| d.join("policy.ckpt")))
        .ok_or_else(|| CliError::Usage("sweep needs --policy or --run".into()))?;
    let policy = load_policy(&path)?;
    let mut train = r.pipeline.inference_train.clone();
    if let Some(e) = a.epochs {
        train.epochs = e;
    }
    let n = eval_episodes(g, a.episodes, r.pipeline.eval.episodes);
    let points = eval::sample_efficiency_sweep(&policy, &r.env, &a.sizes, a.horizon, n, &r.pipeline.inference, &train, seed)?;
    let csv = eval::sweep_csv(&points);
    print!("{csv}");
    if let Some(dir) = &g.out {
        prepare_run_dir(dir, g.force)?;
        let policy_digest = digest_hex(&std::fs::read(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?);
        let inputs = json!({
            "env": r.pipeline.env,
            "policy": policy_digest,
            "sizes": a.sizes,
            "T": a.horizon,
            "episodes": n,
            "decoder": r.pipeline.inference,
            "train": train,
            "seed": seed,
        });
        let mut manifest = RunManifest::new(run_id("sweep", seed, &inputs), "sweep", inputs);
        manifest.seeds.insert("master".into(), seed);
        write_artifact(dir, &mut manifest, "sweep.csv", csv.as_bytes())?;
        manifest.write(dir)?;
    }
    Ok(())
}

fn env_validate_cmd(g: &GlobalArgs) -> Result<(), CliError> {
    let r = resolve(g.config.as_deref())?;
    let m = &r.env.train;
    println!(
        "ok: hypotheses={} actions={} observations={} prior={:?}",
        m.n_hypotheses(),
        m.n_actions(),
        m.n_observations(),
        r.env.prior
    );
    Ok(())
}
