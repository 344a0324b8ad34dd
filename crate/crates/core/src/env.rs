//! Hypothesis/action/observation spaces and stochastic observation generation.
//!
//! An [`ObservationModel`] is a conditional table `p[a][i][y] = P[Y = y | X = i, a]`
//! over finite sets. Observations travel through the rest of the crate as
//! symbol indices, so only this module knows about the alphabet itself.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;
const MAX_SENSORS: usize = 20;

/// Conditional observation table for a finite hypothesis/action/observation space.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    n_hypotheses: usize,
    actions: Vec<String>,
    observations: Vec<String>,
    // flat, indexed [a][i][y]
    table: Vec<f64>,
}

impl ObservationModel {
    /// Build and validate a model from a nested `table[action][hypothesis][symbol]`.
    pub fn new(
        n_hypotheses: usize,
        actions: Vec<String>,
        observations: Vec<String>,
        table: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        Self::validated("table", n_hypotheses, actions, observations, table)
    }

    fn validated(
        field: &str,
        n_hypotheses: usize,
        actions: Vec<String>,
        observations: Vec<String>,
        table: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        if n_hypotheses < 2 {
            return Err(Error::config(format!(
                "hypotheses: need at least 2, got {n_hypotheses}"
            )));
        }
        if actions.is_empty() {
            return Err(Error::config("actions: need at least one action"));
        }
        if observations.len() < 2 {
            return Err(Error::config("observations: need at least two symbols"));
        }
        if table.len() != actions.len() {
            return Err(Error::Shape {
                context: format!("{field} (actions)"),
                expected: actions.len(),
                got: table.len(),
            });
        }
        let n_obs = observations.len();
        let mut flat = Vec::with_capacity(actions.len() * n_hypotheses * n_obs);
        for (a, rows) in table.iter().enumerate() {
            if rows.len() != n_hypotheses {
                return Err(Error::Shape {
                    context: format!("{field}[{a}] (hypotheses)"),
                    expected: n_hypotheses,
                    got: rows.len(),
                });
            }
            for (i, dist) in rows.iter().enumerate() {
                let name = format!("{field}[{a}][{i}]");
                if dist.len() != n_obs {
                    return Err(Error::Shape {
                        context: format!("{name} (observations)"),
                        expected: n_obs,
                        got: dist.len(),
                    });
                }
                check_distribution(&name, dist)?;
                flat.extend_from_slice(dist);
            }
        }
        Ok(Self {
            n_hypotheses,
            actions,
            observations,
            table: flat,
        })
    }

    pub fn n_hypotheses(&self) -> usize {
        self.n_hypotheses
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    /// `P[Y = y | X = i, a]`. Panics on out-of-range indices.
    #[inline]
    pub fn prob(&self, action: usize, hypothesis: usize, observation: usize) -> f64 {
        self.table[self.offset(action, hypothesis) + observation]
    }

    /// Observation distribution `p[a][i][·]`.
    #[inline]
    pub fn dist(&self, action: usize, hypothesis: usize) -> &[f64] {
        let o = self.offset(action, hypothesis);
        &self.table[o..o + self.observations.len()]
    }

    #[inline]
    fn offset(&self, action: usize, hypothesis: usize) -> usize {
        (action * self.n_hypotheses + hypothesis) * self.observations.len()
    }

    /// Nested copy of the table, `[a][i][y]`.
    pub fn table(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_actions())
            .map(|a| {
                (0..self.n_hypotheses)
                    .map(|i| self.dist(a, i).to_vec())
                    .collect()
            })
            .collect()
    }

    pub fn check_action(&self, action: usize) -> Result<()> {
        check_index("action", action, self.n_actions())
    }

    pub fn check_hypothesis(&self, hypothesis: usize) -> Result<()> {
        check_index("hypothesis", hypothesis, self.n_hypotheses)
    }

    pub fn check_observation(&self, observation: usize) -> Result<()> {
        check_index("observation", observation, self.n_observations())
    }

    /// True when both models share hypothesis, action and observation sets.
    pub fn same_spaces(&self, other: &ObservationModel) -> bool {
        self.n_hypotheses == other.n_hypotheses
            && self.actions == other.actions
            && self.observations == other.observations
    }

    /// Rename the actions (e.g. to sensor names); count must match.
    pub fn with_action_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.actions.len() {
            return Err(Error::Shape {
                context: "action names".into(),
                expected: self.actions.len(),
                got: names.len(),
            });
        }
        self.actions = names;
        Ok(self)
    }

    /// Draw an observation symbol for hypothesis `hypothesis` under action `action`.
    pub fn sample_observation<R: Rng + ?Sized>(
        &self,
        hypothesis: usize,
        action: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.check_hypothesis(hypothesis)?;
        self.check_action(action)?;
        Ok(sample_categorical(self.dist(action, hypothesis), rng))
    }
}

/// Binary-observation model from per-action rows of `P[Y = 1 | X = i, a]`.
///
/// `rows[a][i]` is the probability that action `a` reads `1` under hypothesis `i`.
pub fn build_bernoulli_env(rows: &[Vec<f64>]) -> Result<ObservationModel> {
    let Some(first) = rows.first() else {
        return Err(Error::config("rows: need at least one action"));
    };
    let n_hypotheses = first.len();
    let mut table = Vec::with_capacity(rows.len());
    for (a, row) in rows.iter().enumerate() {
        if row.len() != n_hypotheses {
            return Err(Error::Shape {
                context: format!("rows[{a}]"),
                expected: n_hypotheses,
                got: row.len(),
            });
        }
        let mut per_action = Vec::with_capacity(n_hypotheses);
        for (i, &p) in row.iter().enumerate() {
            check_probability(&format!("rows[{a}][{i}]"), p)?;
            per_action.push(vec![1.0 - p, p]);
        }
        table.push(per_action);
    }
    let actions = (0..rows.len()).map(|a| format!("a{a}")).collect();
    ObservationModel::new(
        n_hypotheses,
        actions,
        vec!["0".into(), "1".into()],
        &table,
    )
}

/// Independent-process anomaly model with one binary sensor per process.
///
/// Hypothesis `i` is read as a bitmask of abnormal processes; action `a`
/// queries sensor `a`, which reads `1` with probability `p_abnormal[a]` when
/// bit `a` of `i` is set and `p_normal[a]` otherwise.
pub fn product_sensor_env(
    n_sensors: usize,
    p_abnormal: &[f64],
    p_normal: &[f64],
) -> Result<ObservationModel> {
    if n_sensors == 0 {
        return Err(Error::config("n_sensors: need at least one sensor"));
    }
    if n_sensors > MAX_SENSORS {
        return Err(Error::config(format!(
            "n_sensors: {n_sensors} exceeds the limit of {MAX_SENSORS}"
        )));
    }
    for (name, v) in [("p_abnormal", p_abnormal), ("p_normal", p_normal)] {
        if v.len() != n_sensors {
            return Err(Error::Shape {
                context: name.into(),
                expected: n_sensors,
                got: v.len(),
            });
        }
    }
    let n_hypotheses = 1usize << n_sensors;
    let rows: Vec<Vec<f64>> = (0..n_sensors)
        .map(|a| {
            (0..n_hypotheses)
                .map(|i| {
                    if i >> a & 1 == 1 {
                        p_abnormal[a]
                    } else {
                        p_normal[a]
                    }
                })
                .collect()
        })
        .collect();
    let names = (0..n_sensors).map(|a| format!("S{a}")).collect();
    build_bernoulli_env(&rows)?.with_action_names(names)
}

/// Draw a hypothesis index from `prior`.
pub fn sample_hypothesis<R: Rng + ?Sized>(prior: &[f64], rng: &mut R) -> Result<usize> {
    validate_prior(prior)?;
    Ok(sample_categorical(prior, rng))
}

/// Inverse-CDF draw from a (validated) distribution; the last index absorbs
/// any rounding slack.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding gap above the cumulative sum: take the last
    // index with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Train/test observation models over shared spaces plus the hypothesis prior.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentPair {
    pub train: ObservationModel,
    pub test: ObservationModel,
    pub prior: Vec<f64>,
}

impl EnvironmentPair {
    pub fn new(train: ObservationModel, test: ObservationModel, prior: Vec<f64>) -> Result<Self> {
        if !train.same_spaces(&test) {
            return Err(Error::config(
                "train/test: hypothesis, action and observation sets must match",
            ));
        }
        if prior.len() != train.n_hypotheses() {
            return Err(Error::Shape {
                context: "prior".into(),
                expected: train.n_hypotheses(),
                got: prior.len(),
            });
        }
        validate_prior(&prior)?;
        Ok(Self { train, test, prior })
    }

    /// Both models with a uniform prior.
    pub fn uniform(train: ObservationModel, test: ObservationModel) -> Result<Self> {
        let n = train.n_hypotheses();
        Self::new(train, test, vec![1.0 / n as f64; n])
    }

    pub fn model(&self, which: EnvSide) -> &ObservationModel {
        match which {
            EnvSide::Train => &self.train,
            EnvSide::Test => &self.test,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let doc: EnvConfigDoc = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        doc.into_pair()
    }

    pub fn to_toml_string(&self) -> String {
        let doc = EnvConfigDoc {
            hypotheses: self.train.n_hypotheses(),
            actions: self.train.actions().to_vec(),
            observations: self.train.observations().to_vec(),
            prior: Some(self.prior.clone()),
            train: TableDoc {
                table: self.train.table(),
            },
            test: TableDoc {
                table: self.test.table(),
            },
        };
        toml::to_string(&doc).expect("environment config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

/// Which side of an [`EnvironmentPair`] an operation runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvSide {
    Train,
    Test,
}

impl std::fmt::Display for EnvSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnvSide::Train => "train",
            EnvSide::Test => "test",
        })
    }
}

/// Load and validate an environment config file.
pub fn load_env_config(path: impl AsRef<Path>) -> Result<EnvironmentPair> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EnvironmentPair::from_toml_str(&text).map_err(|e| match e {
        Error::Config(message) => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvConfigDoc {
    hypotheses: usize,
    actions: Vec<String>,
    observations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior: Option<Vec<f64>>,
    train: TableDoc,
    test: TableDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    table: Vec<Vec<Vec<f64>>>,
}

impl EnvConfigDoc {
    fn into_pair(self) -> Result<EnvironmentPair> {
        let train = ObservationModel::validated(
            "train.table",
            self.hypotheses,
            self.actions.clone(),
            self.observations.clone(),
            &self.train.table,
        )?;
        let test = ObservationModel::validated(
            "test.table",
            self.hypotheses,
            self.actions,
            self.observations,
            &self.test.table,
        )?;
        let prior = self
            .prior
            .unwrap_or_else(|| vec![1.0 / self.hypotheses as f64; self.hypotheses]);
        EnvironmentPair::new(train, test, prior)
    }
}

/// Validate that `prior` is a probability vector.
pub fn validate_prior(prior: &[f64]) -> Result<()> {
    if prior.is_empty() {
        return Err(Error::Empty("prior"));
    }
    check_distribution("prior", prior)
}

fn check_probability(field: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange {
            field: field.to_string(),
            value: p,
        });
    }
    Ok(())
}

fn check_distribution(field: &str, dist: &[f64]) -> Result<()> {
    for (k, &p) in dist.iter().enumerate() {
        check_probability(&format!("{field}[{k}]"), p)?;
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::NotNormalized {
            field: field.to_string(),
            sum,
        });
    }
    Ok(())
}

fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(Error::IndexOutOfRange { what, index, len });
    }
    Ok(())
}

/// Built-in environments from the two anomaly-detection case studies.
pub mod presets {
    use super::*;

    /// Two sensors, four hypotheses: training model rows.
    pub const TWO_SENSOR_TRAIN: [[f64; 4]; 2] = [[0.2, 0.8, 0.2, 0.8], [0.2, 0.2, 0.8, 0.8]];
    /// Two sensors, four hypotheses: testing model rows.
    pub const TWO_SENSOR_TEST: [[f64; 4]; 2] = [[0.25, 0.75, 0.25, 0.75], [0.15, 0.15, 0.85, 0.85]];

    fn two_sensor_model(rows: &[[f64; 4]; 2]) -> ObservationModel {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        build_bernoulli_env(&rows)
            .and_then(|m| m.with_action_names(vec!["A".into(), "B".into()]))
            .expect("preset is valid")
    }

    /// Two-sensor anomaly detection with a uniform prior.
    pub fn two_sensor() -> EnvironmentPair {
        EnvironmentPair::uniform(
            two_sensor_model(&TWO_SENSOR_TRAIN),
            two_sensor_model(&TWO_SENSOR_TEST),
        )
        .expect("preset is valid")
    }

    /// Four independent processes, sixteen hypotheses, uniform prior.
    pub fn four_sensor() -> EnvironmentPair {
        let train = product_sensor_env(4, &[0.8; 4], &[0.2; 4]).expect("preset is valid");
        let test = product_sensor_env(4, &[0.85, 0.85, 0.75, 0.75], &[0.15, 0.15, 0.25, 0.25])
            .expect("preset is valid");
        EnvironmentPair::uniform(train, test).expect("preset is valid")
    }

    /// Look up a preset by name.
    pub fn by_name(name: &str) -> Option<EnvironmentPair> {
        match name {
            "two_sensor" => Some(two_sensor()),
            "four_sensor" => Some(four_sensor()),
            _ => None,
        }
    }
}
