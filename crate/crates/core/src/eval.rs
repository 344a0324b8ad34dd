//! Monte-Carlo evaluation: fixed-horizon and sequential error rates,
//! baseline comparison and sample-efficiency sweeps.
//!
//! The Chernoff baseline is given the exact model of the side it is
//! evaluated on (on the testing side that is an advantage the learned agent
//! never has). Episode `k` always uses stream `(seed, k)`, so agents compared
//! under one seed face the same hypotheses.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chernoff::ChernoffPolicy;
use crate::decoders::{Decoder, DecoderConfig, TrainConfig};
use crate::env::{EnvSide, EnvironmentPair};
use crate::error::{Error, Result};
use crate::pipeline::{
    gen_inference_dataset, run_composite_episode, simulate, EpisodeSetup, Selector, SplitFractions, StopRule,
};
use crate::policy::PolicyNet;
use crate::rng::{derive_seed, episode_stream};

pub enum EvalAgent<'a> {
    /// modified Chernoff with MAP decoding
    Chernoff,
    /// uniform actions; MAP decoding on the evaluated model, or the given
    /// inference decoder
    Random { inference: Option<&'a Decoder> },
    /// learned policy, optional monitor, inference decoder
    Composite {
        policy: &'a PolicyNet,
        monitor: Option<&'a Decoder>,
        inference: &'a Decoder,
    },
}

impl EvalAgent<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            EvalAgent::Chernoff => "chernoff",
            EvalAgent::Random { .. } => "random",
            EvalAgent::Composite { .. } => "composite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EvalMode {
    Fixed { horizon: usize },
    Sequential { c: f64, t_cap: usize },
}

impl EvalMode {
    fn name(&self) -> &'static str {
        match self {
            EvalMode::Fixed { .. } => "fixed",
            EvalMode::Sequential { .. } => "sequential",
        }
    }

    fn parameter(&self) -> f64 {
        match *self {
            EvalMode::Fixed { horizon } => horizon as f64,
            EvalMode::Sequential { c, .. } => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub agent: String,
    pub env: EnvSide,
    pub mode: String,
    pub t_or_c: f64,
    pub episodes: usize,
    pub error: f64,
    pub error_ci95: f64,
    pub mean_stop_time: f64,
    pub seed: u64,
    /// wall-clock time, only when timing was requested
    pub seconds: Option<f64>,
}

/// `1.96·sqrt(p(1 − p)/n)`
pub fn binomial_half_width(p: f64, n: usize) -> f64 {
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Run `n` episodes of `agent` on one side of `env`.
pub fn evaluate(
    agent: &EvalAgent<'_>,
    env: &EnvironmentPair,
    side: EnvSide,
    mode: EvalMode,
    n: usize,
    seed: u64,
) -> Result<EvalSummary> {
    if n == 0 {
        return Err(Error::config("episode count must be ≥ 1"));
    }
    if let EvalMode::Sequential { c, t_cap } = mode {
        if !(c > 0.0 && c < 1.0) || t_cap == 0 {
            return Err(Error::config("sequential mode needs c in (0, 1) and t_cap ≥ 1"));
        }
    }
    let start = Instant::now();
    let model = env.model(side);
    let chernoff = match agent {
        EvalAgent::Chernoff => Some(ChernoffPolicy::new(model)?),
        _ => None,
    };
    let outcomes: Vec<Result<(bool, usize)>> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = episode_stream(seed, k);
            match agent {
                EvalAgent::Composite {
                    policy,
                    monitor,
                    inference,
                } => {
                    let (mon, c, cap) = match mode {
                        EvalMode::Fixed { horizon } => (None, 0.5, horizon),
                        EvalMode::Sequential { c, t_cap } => {
                            let m = monitor.ok_or_else(|| Error::config("sequential evaluation needs a monitor"))?;
                            (Some(m), c, t_cap)
                        }
                    };
                    let r = run_composite_episode(policy, mon, inference, model, &env.prior, c, cap, &mut rng)?;
                    Ok((r.correct, r.stop_time))
                }
                EvalAgent::Chernoff | EvalAgent::Random { .. } => {
                    let selector = match (agent, &chernoff) {
                        (EvalAgent::Chernoff, Some(p)) => Selector::Chernoff(p),
                        _ => Selector::Random,
                    };
                    let stop = match mode {
                        EvalMode::Fixed { horizon } => StopRule::Fixed(horizon),
                        EvalMode::Sequential { c, t_cap } => StopRule::LogLikelihood { c, t_cap },
                    };
                    let setup = EpisodeSetup {
                        selector,
                        env: model,
                        prior: &env.prior,
                        stop,
                        belief_model: Some(model),
                        label_model: None,
                    };
                    let ep = simulate(&setup, &mut rng)?;
                    let guess = match agent {
                        EvalAgent::Random { inference: Some(d) } => d.classify(&ep.actions, &ep.observations)?.0,
                        _ => ep.belief.as_ref().expect("belief model set").map_decode(),
                    };
                    Ok((guess == ep.hypothesis, ep.len()))
                }
            }
        })
        .collect();
    let mut wrong = 0usize;
    let mut steps = 0usize;
    for o in outcomes {
        let (correct, t) = o?;
        wrong += (!correct) as usize;
        steps += t;
    }
    let error = wrong as f64 / n as f64;
    Ok(EvalSummary {
        agent: agent.name().to_string(),
        env: side,
        mode: mode.name().to_string(),
        t_or_c: mode.parameter(),
        episodes: n,
        error,
        error_ci95: binomial_half_width(error, n),
        mean_stop_time: steps as f64 / n as f64,
        seed,
        seconds: Some(start.elapsed().as_secs_f64()),
    })
}

pub fn eval_fixed(
    agent: &EvalAgent<'_>,
    env: &EnvironmentPair,
    side: EnvSide,
    horizon: usize,
    n: usize,
    seed: u64,
) -> Result<EvalSummary> {
    evaluate(agent, env, side, EvalMode::Fixed { horizon }, n, seed)
}

pub fn eval_sequential(
    agent: &EvalAgent<'_>,
    env: &EnvironmentPair,
    side: EnvSide,
    c: f64,
    t_cap: usize,
    n: usize,
    seed: u64,
) -> Result<EvalSummary> {
    evaluate(agent, env, side, EvalMode::Sequential { c, t_cap }, n, seed)
}

pub const RESULTS_HEADER: &str = "agent,env,mode,T_or_c,episodes,error,error_ci95,mean_stop_time,seed,seconds";

/// Long-format CSV. The `seconds` field is left empty for summaries whose
/// timing was dropped, which keeps reports byte-reproducible.
pub fn results_csv(summaries: &[EvalSummary]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in summaries {
        let secs = r.seconds.map_or(String::new(), |v| format!("{v:.3}"));
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.agent, r.env, r.mode, r.t_or_c, r.episodes, r.error, r.error_ci95, r.mean_stop_time, r.seed, secs
        ));
    }
    s
}

/// Drop wall-clock timings (for reproducible artifacts).
pub fn without_timing(mut summaries: Vec<EvalSummary>) -> Vec<EvalSummary> {
    summaries.iter_mut().for_each(|s| s.seconds = None);
    summaries
}

/// Plain-text table: one row per (mode, T or c), one column per agent
/// showing `error ± half-width` and, in sequential mode, the mean stop time.
pub fn compare_report(summaries: &[EvalSummary]) -> Result<String> {
    if summaries.is_empty() {
        return Err(Error::Empty("summaries"));
    }
    let mut agents: Vec<&str> = Vec::new();
    let mut rows: Vec<(&str, f64)> = Vec::new();
    for s in summaries {
        if !agents.contains(&s.agent.as_str()) {
            agents.push(&s.agent);
        }
        if !rows.iter().any(|&(m, p)| m == s.mode && p == s.t_or_c) {
            rows.push((&s.mode, s.t_or_c));
        }
    }
    let cell = |s: &EvalSummary| {
        if s.mode == "sequential" {
            format!("{:.4} ± {:.4} (t̄ {:.2})", s.error, s.error_ci95, s.mean_stop_time)
        } else {
            format!("{:.4} ± {:.4}", s.error, s.error_ci95)
        }
    };
    let mut table: Vec<Vec<String>> = vec![std::iter::once("mode".to_string())
        .chain(std::iter::once("T_or_c".to_string()))
        .chain(agents.iter().map(|a| a.to_string()))
        .collect()];
    for &(mode, p) in &rows {
        let mut line = vec![mode.to_string(), format!("{p}")];
        for a in &agents {
            let found = summaries.iter().find(|s| s.agent == *a && s.mode == mode && s.t_or_c == p);
            line.push(found.map_or("-".to_string(), cell));
        }
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &table {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub dataset_size: usize,
    pub error: f64,
    pub error_ci95: f64,
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("dataset_size,error,error_ci95\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.dataset_size, p.error, p.error_ci95));
    }
    s
}

/// For each size: generate that many fixed-horizon policy episodes on the
/// training model (10% kept for validation when at least 10), train a fresh
/// inference decoder, and evaluate the composite agent on the testing model
/// with a shared evaluation seed.
pub fn sample_efficiency_sweep(
    policy: &PolicyNet,
    env: &EnvironmentPair,
    sizes: &[usize],
    horizon: usize,
    eval_n: usize,
    decoder: &DecoderConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let eval_seed = derive_seed(seed, 0xE7A1);
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        if size == 0 {
            return Err(Error::config("dataset sizes must be ≥ 1"));
        }
        let splits = SplitFractions {
            validation: if size >= 10 { 0.1 } else { 0.0 },
            test: 0.0,
        };
        let data = gen_inference_dataset(
            policy,
            None,
            env,
            size,
            0.5,
            horizon,
            splits,
            derive_seed(seed, size as u64),
        )?;
        let cfg = TrainConfig {
            seed: derive_seed(seed, 0x1000 + size as u64),
            ..train.clone()
        };
        let trained = crate::decoders::train_inference(&data, env.train.n_hypotheses(), decoder, &cfg)?;
        let agent = EvalAgent::Composite {
            policy,
            monitor: None,
            inference: &trained.decoder,
        };
        let s = eval_fixed(&agent, env, EnvSide::Test, horizon, eval_n, eval_seed)?;
        out.push(SweepPoint {
            dataset_size: size,
            error: s.error,
            error_ci95: s.error_ci95,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::presets;

    fn summary(agent: &str, mode: &str, p: f64) -> EvalSummary {
        EvalSummary {
            agent: agent.into(),
            env: EnvSide::Test,
            mode: mode.into(),
            t_or_c: p,
            episodes: 100,
            error: 0.1,
            error_ci95: binomial_half_width(0.1, 100),
            mean_stop_time: p,
            seed: 1,
            seconds: None,
        }
    }

    #[test]
    fn half_width_formula() {
        assert_eq!(binomial_half_width(0.5, 100), 1.96 * 0.05);
        assert_eq!(binomial_half_width(0.0, 10), 0.0);
    }

    #[test]
    fn single_episode_error_is_binary() {
        let env = presets::two_sensor();
        let s = eval_fixed(&EvalAgent::Chernoff, &env, EnvSide::Test, 5, 1, 9).unwrap();
        assert!(s.error == 0.0 || s.error == 1.0);
    }

    #[test]
    fn cap_one_stops_at_one() {
        let env = presets::two_sensor();
        let s = eval_sequential(&EvalAgent::Chernoff, &env, EnvSide::Test, 0.1, 1, 200, 2).unwrap();
        assert_eq!(s.mean_stop_time, 1.0);
    }

    #[test]
    fn report_shapes() {
        let mut v = Vec::new();
        for t in [10.0, 25.0, 50.0, 100.0] {
            for a in ["chernoff", "random", "composite"] {
                v.push(summary(a, "fixed", t));
            }
        }
        let table = compare_report(&v).unwrap();
        assert_eq!(table.lines().count(), 5);
        let one = compare_report(&v[..1]).unwrap();
        assert_eq!(one.lines().count(), 2);
        assert!(compare_report(&[]).is_err());
        let csv = results_csv(&v[..1]);
        assert_eq!(csv, format!("{RESULTS_HEADER}\nchernoff,test,fixed,10,100,0.1,{},10,1,\n", binomial_half_width(0.1, 100)));
    }
}
