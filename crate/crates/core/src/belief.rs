//! Exact Bayesian bookkeeping over a finite hypothesis set.
//!
//! The posterior is advanced in log space and renormalized after every
//! observation. Cumulative per-hypothesis log-likelihoods are kept alongside
//! so the log-likelihood index can be read off without touching the prior.
//! All logarithms are natural.

use crate::env::{validate_prior, ObservationModel};
use crate::error::{Error, Result};

/// Clamp applied to beliefs inside [`BeliefState::confidence`] only.
pub const CONFIDENCE_CLAMP: f64 = 1e-12;

/// Posterior over hypotheses plus cumulative log-likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    rho: Vec<f64>,
    loglik: Vec<f64>,
    t: usize,
}

impl BeliefState {
    /// Start from a prior; `t = 0`, all log-likelihoods zero.
    pub fn new(prior: &[f64]) -> Result<Self> {
        validate_prior(prior)?;
        Ok(Self {
            rho: prior.to_vec(),
            loglik: vec![0.0; prior.len()],
            t: 0,
        })
    }

    pub fn uniform(n_hypotheses: usize) -> Self {
        Self {
            rho: vec![1.0 / n_hypotheses as f64; n_hypotheses],
            loglik: vec![0.0; n_hypotheses],
            t: 0,
        }
    }

    /// Construct directly from a posterior (and optional log-likelihoods).
    /// Used by tests and by callers that already hold a belief vector.
    pub fn from_parts(rho: Vec<f64>, loglik: Option<Vec<f64>>, t: usize) -> Result<Self> {
        validate_prior(&rho)?;
        let loglik = loglik.unwrap_or_else(|| vec![0.0; rho.len()]);
        if loglik.len() != rho.len() {
            return Err(Error::Shape {
                context: "loglik".into(),
                expected: rho.len(),
                got: loglik.len(),
            });
        }
        Ok(Self { rho, loglik, t })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn loglik(&self) -> &[f64] {
        &self.loglik
    }

    /// Number of observations absorbed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n_hypotheses(&self) -> usize {
        self.rho.len()
    }

    /// Absorb observation `observation` taken under `action`.
    pub fn update(&self, action: usize, observation: usize, model: &ObservationModel) -> Result<Self> {
        let mut next = self.clone();
        next.update_in_place(action, observation, model)?;
        Ok(next)
    }

    /// In-place form of [`BeliefState::update`]; on error the state is untouched.
    pub fn update_in_place(
        &mut self,
        action: usize,
        observation: usize,
        model: &ObservationModel,
    ) -> Result<()> {
        model.check_action(action)?;
        model.check_observation(observation)?;
        if model.n_hypotheses() != self.rho.len() {
            return Err(Error::Shape {
                context: "belief vs model hypotheses".into(),
                expected: self.rho.len(),
                got: model.n_hypotheses(),
            });
        }
        let n = self.rho.len();
        let mut log_post = Vec::with_capacity(n);
        let mut max = f64::NEG_INFINITY;
        for i in 0..n {
            let v = self.rho[i].ln() + model.prob(action, i, observation).ln();
            max = max.max(v);
            log_post.push(v);
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::InconsistentObservation {
                action,
                observation,
            });
        }
        let mut total = 0.0;
        for v in log_post.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for (i, v) in log_post.into_iter().enumerate() {
            self.rho[i] = v / total;
            self.loglik[i] += model.prob(action, i, observation).ln();
        }
        self.t += 1;
        Ok(())
    }

    /// `1 − max_i ρ(i)`: the MAP decoder's error probability under this belief.
    pub fn error_probability(&self) -> f64 {
        1.0 - self.rho.iter().copied().fold(0.0, f64::max)
    }

    /// Average confidence `Σ_i ρ(i) ln(ρ(i) / (1 − ρ(i)))`, with each ρ(i)
    /// clamped to `[1e-12, 1 − 1e-12]` inside the logarithm.
    pub fn confidence(&self) -> f64 {
        self.rho
            .iter()
            .map(|&r| {
                let c = r.clamp(CONFIDENCE_CLAMP, 1.0 - CONFIDENCE_CLAMP);
                r * (c / (1.0 - c)).ln()
            })
            .sum()
    }

    /// Log-likelihood index: `(LL, î)` where `î = argmax_i L(i)` and
    /// `LL = L(î) − max_{j≠î} L(j)`.
    pub fn log_likelihood_index(&self) -> Result<(f64, usize)> {
        if self.loglik.len() < 2 {
            return Err(Error::config("log-likelihood index needs at least two hypotheses"));
        }
        let best = argmax(&self.loglik);
        let runner_up = self
            .loglik
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != best)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let ll = if self.loglik[best] == runner_up {
            0.0
        } else {
            self.loglik[best] - runner_up
        };
        Ok((ll, best))
    }

    /// MAP decision, ties broken toward the smallest index.
    pub fn map_decode(&self) -> usize {
        argmax(&self.rho)
    }
}

/// Index of the maximum; the first occurrence wins ties. NaNs are never selected
/// over a finite value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() {
            best = k;
        }
    }
    best
}
