//! Supervised sequence decoders: the inference classifier (which hypothesis
//! is true) and the monitor regressor (how likely the current estimate is
//! wrong), their datasets, training loops and metrics.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::argmax;
use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy, squared_error, AdamConfig, AdamState, CellKind, Encoder, EncoderConfig, HeadKind, PrefixScorer,
};
use crate::rng::{derive_seed, episode_stream};

/// One-hot step encoding `onehot(action) ⊕ onehot(observation)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEncoding {
    pub n_actions: usize,
    pub n_observations: usize,
}

impl StepEncoding {
    pub fn new(n_actions: usize, n_observations: usize) -> Self {
        Self {
            n_actions,
            n_observations,
        }
    }

    pub fn width(&self) -> usize {
        self.n_actions + self.n_observations
    }

    /// Writes the encoding of `(action, observation)` into `out`, or zeros
    /// when `step` is `None` (the policy's first input).
    pub fn write(&self, step: Option<(usize, usize)>, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some((a, y)) = step {
            out[a] = 1.0;
            out[self.n_actions + y] = 1.0;
        }
    }

    pub fn encode(&self, action: usize, observation: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.width()];
        self.write(Some((action, observation)), &mut v);
        v
    }

    /// Flat `T × width` encoding of a whole sequence.
    pub fn encode_sequence(&self, actions: &[usize], observations: &[usize]) -> Result<Vec<f64>> {
        if actions.len() != observations.len() {
            return Err(Error::Shape {
                context: "sequence observations".into(),
                expected: actions.len(),
                got: observations.len(),
            });
        }
        let w = self.width();
        let mut flat = vec![0.0; actions.len() * w];
        for (t, (&a, &y)) in actions.iter().zip(observations).enumerate() {
            if a >= self.n_actions {
                return Err(Error::IndexOutOfRange {
                    what: "action",
                    index: a,
                    len: self.n_actions,
                });
            }
            if y >= self.n_observations {
                return Err(Error::IndexOutOfRange {
                    what: "observation",
                    index: y,
                    len: self.n_observations,
                });
            }
            self.write(Some((a, y)), &mut flat[t * w..(t + 1) * w]);
        }
        Ok(flat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Class,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(usize),
    Scalar(f64),
}

impl Label {
    pub fn kind(&self) -> LabelKind {
        match self {
            Label::Class(_) => LabelKind::Class,
            Label::Scalar(_) => LabelKind::Scalar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Validation,
    Test,
}

/// What a generated sequence is labeled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// true hypothesis X (class)
    TrueHypothesis,
    /// maximum-a-posteriori estimate ĵ_T (class)
    MapEstimate,
    /// γ_T = 1 − max ρ_T
    ErrorProbability,
    /// C(ρ_T)
    Confidence,
    /// LL_T
    LogLikelihoodIndex,
}

impl Target {
    pub fn label_kind(self) -> LabelKind {
        match self {
            Target::TrueHypothesis | Target::MapEstimate => LabelKind::Class,
            _ => LabelKind::Scalar,
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true_hypothesis" | "x" => Ok(Target::TrueHypothesis),
            "map_estimate" | "j_hat" => Ok(Target::MapEstimate),
            "error_probability" | "gamma" => Ok(Target::ErrorProbability),
            "confidence" => Ok(Target::Confidence),
            "log_likelihood_index" | "ll" => Ok(Target::LogLikelihoodIndex),
            other => Err(Error::config(format!("unknown label target `{other}`"))),
        }
    }
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: u64,
    pub actions: Vec<usize>,
    pub observations: Vec<usize>,
    pub label: Label,
    pub label_kind: LabelKind,
    #[serde(default)]
    pub split: Split,
}

impl SequenceRecord {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Labeled sequences over a fixed action/observation alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub encoding: StepEncoding,
    pub label_kind: LabelKind,
    pub items: Vec<SequenceRecord>,
}

impl SequenceDataset {
    /// Validates homogeneity, lengths, alphabets and label values.
    pub fn new(encoding: StepEncoding, label_kind: LabelKind, items: Vec<SequenceRecord>) -> Result<Self> {
        for r in &items {
            if r.is_empty() {
                return Err(Error::config(format!("record {} has an empty sequence", r.id)));
            }
            if r.actions.len() != r.observations.len() {
                return Err(Error::config(format!(
                    "record {}: {} actions but {} observations",
                    r.id,
                    r.actions.len(),
                    r.observations.len()
                )));
            }
            if r.label_kind != label_kind || r.label.kind() != label_kind {
                return Err(Error::config(format!("record {}: label kind differs from {label_kind:?}", r.id)));
            }
            if let Label::Scalar(v) = r.label {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("label of record {}", r.id)));
                }
            }
            if let Some(&a) = r.actions.iter().find(|&&a| a >= encoding.n_actions) {
                return Err(Error::IndexOutOfRange {
                    what: "action",
                    index: a,
                    len: encoding.n_actions,
                });
            }
            if let Some(&y) = r.observations.iter().find(|&&y| y >= encoding.n_observations) {
                return Err(Error::IndexOutOfRange {
                    what: "observation",
                    index: y,
                    len: encoding.n_observations,
                });
            }
        }
        Ok(Self {
            encoding,
            label_kind,
            items,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn split(&self, which: Split) -> Vec<&SequenceRecord> {
        self.items.iter().filter(|r| r.split == which).collect()
    }

    /// Largest class label plus one (zero for scalar datasets).
    pub fn class_count(&self) -> usize {
        self.items
            .iter()
            .filter_map(|r| match r.label {
                Label::Class(c) => Some(c + 1),
                Label::Scalar(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for r in &self.items {
            serde_json::to_writer(&mut w, r).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>, encoding: StepEncoding) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut items = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut r: SequenceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", n + 1),
            })?;
            // integers are valid scalar labels
            if let (LabelKind::Scalar, Label::Class(c)) = (r.label_kind, r.label) {
                r.label = Label::Scalar(c as f64);
            }
            items.push(r);
        }
        let kind = items.first().map_or(LabelKind::Class, |r| r.label_kind);
        Self::new(encoding, kind, items)
    }
}

/// Recurrent architecture of a decoder (the head follows from the task).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub kind: CellKind,
    pub hidden_size: usize,
    pub layers: usize,
    pub bidirectional: bool,
    pub dropout: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            kind: CellKind::Gru,
            hidden_size: 64,
            layers: 2,
            bidirectional: false,
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Optional global gradient-norm clip.
    pub grad_clip: Option<f64>,
    /// Cosine-anneal the step size to `lr · final_lr_fraction` over the
    /// run; 1 keeps it constant.
    pub final_lr_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            lr: 1e-3,
            grad_clip: None,
            final_lr_fraction: 1.0,
            seed: 0,
        }
    }
}

/// Everything needed to rebuild a decoder besides its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub encoding: StepEncoding,
    pub label_kind: LabelKind,
    pub n_classes: usize,
    pub config: DecoderConfig,
}

impl DecoderSpec {
    pub fn encoder_config(&self) -> EncoderConfig {
        let (n_out, head) = match self.label_kind {
            LabelKind::Class => (self.n_classes, HeadKind::Classifier),
            LabelKind::Scalar => (1, HeadKind::Regressor),
        };
        EncoderConfig {
            kind: self.config.kind,
            input_size: self.encoding.width(),
            hidden_size: self.config.hidden_size,
            layers: self.config.layers,
            bidirectional: self.config.bidirectional,
            dropout: self.config.dropout,
            n_out,
            head,
        }
    }
}

/// A trained (or freshly initialized) classifier or regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub spec: DecoderSpec,
    pub encoder: Encoder,
}

impl Decoder {
    pub fn new(spec: DecoderSpec, seed: u64) -> Result<Self> {
        let mut rng = episode_stream(seed, 0);
        let encoder = Encoder::new(spec.encoder_config(), &mut rng)?;
        Ok(Self { spec, encoder })
    }

    pub fn from_params(spec: DecoderSpec, params: Vec<f64>) -> Result<Self> {
        let encoder = Encoder::from_params(spec.encoder_config(), params)?;
        Ok(Self { spec, encoder })
    }

    fn check_kind(&self, kind: LabelKind) -> Result<()> {
        if self.spec.label_kind != kind {
            return Err(Error::config(format!(
                "decoder produces {:?} outputs, {:?} requested",
                self.spec.label_kind, kind
            )));
        }
        Ok(())
    }

    fn head(&self, actions: &[usize], observations: &[usize]) -> Result<Vec<f64>> {
        if actions.is_empty() {
            return Err(Error::Empty("sequence"));
        }
        let flat = self.spec.encoding.encode_sequence(actions, observations)?;
        Ok(self.encoder.predict_flat(&flat))
    }

    /// Most probable class (ties to the smallest index) and the class
    /// probabilities.
    pub fn classify(&self, actions: &[usize], observations: &[usize]) -> Result<(usize, Vec<f64>)> {
        self.check_kind(LabelKind::Class)?;
        let p = self.head(actions, observations)?;
        Ok((argmax(&p), p))
    }

    /// Scalar estimate for the whole prefix.
    pub fn monitor_score(&self, actions: &[usize], observations: &[usize]) -> Result<f64> {
        self.check_kind(LabelKind::Scalar)?;
        Ok(self.head(actions, observations)?[0])
    }

    /// Step-by-step scorer: O(1) extra work per step for unidirectional
    /// decoders, full recomputation over the prefix otherwise.
    pub fn session(&self) -> MonitorSession<'_> {
        MonitorSession {
            decoder: self,
            scorer: self.encoder.prefix_scorer(),
            actions: Vec::new(),
            observations: Vec::new(),
        }
    }

    /// Raw head output for a sequence (probabilities or the scalar).
    pub fn predict(&self, actions: &[usize], observations: &[usize]) -> Result<Vec<f64>> {
        self.head(actions, observations)
    }
}

pub struct MonitorSession<'a> {
    decoder: &'a Decoder,
    scorer: Option<PrefixScorer<'a>>,
    actions: Vec<usize>,
    observations: Vec<usize>,
}

impl MonitorSession<'_> {
    /// Append `(action, observation)`; returns the head output for the prefix.
    pub fn push(&mut self, action: usize, observation: usize) -> Result<Vec<f64>> {
        let enc = self.decoder.spec.encoding;
        if action >= enc.n_actions || observation >= enc.n_observations {
            return Err(Error::config(format!(
                "step ({action}, {observation}) outside the decoder alphabet"
            )));
        }
        self.actions.push(action);
        self.observations.push(observation);
        match &mut self.scorer {
            Some(s) => Ok(s.push(&enc.encode(action, observation))),
            None => self.decoder.head(&self.actions, &self.observations),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Held-out quality of a decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MetricReport {
    Class {
        precision: f64,
        recall: f64,
        f1: f64,
        accuracy: f64,
        n: usize,
    },
    Scalar {
        mae: f64,
        n: usize,
    },
}

impl MetricReport {
    pub fn n(&self) -> usize {
        match self {
            MetricReport::Class { n, .. } | MetricReport::Scalar { n, .. } => *n,
        }
    }
}

/// Macro-averaged precision, recall and F1 over every class that appears in
/// either the predictions or the labels; an undefined ratio counts as 0.
pub fn classification_metrics(predictions: &[usize], labels: &[usize]) -> Result<MetricReport> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            context: "predictions vs labels".into(),
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let k = predictions.iter().chain(labels).max().map_or(0, |m| m + 1);
    let mut tp = vec![0usize; k];
    let mut pred_n = vec![0usize; k];
    let mut true_n = vec![0usize; k];
    for (&p, &l) in predictions.iter().zip(labels) {
        pred_n[p] += 1;
        true_n[l] += 1;
        if p == l {
            tp[p] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut ps, mut rs, mut fs, mut classes) = (0.0, 0.0, 0.0, 0usize);
    for c in 0..k {
        if pred_n[c] == 0 && true_n[c] == 0 {
            continue;
        }
        let p = ratio(tp[c], pred_n[c]);
        let r = ratio(tp[c], true_n[c]);
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        ps += p;
        rs += r;
        fs += f;
        classes += 1;
    }
    let m = classes as f64;
    Ok(MetricReport::Class {
        precision: ps / m,
        recall: rs / m,
        f1: fs / m,
        accuracy: ratio(tp.iter().sum(), labels.len()),
        n: labels.len(),
    })
}

pub fn regression_metrics(predictions: &[f64], labels: &[f64]) -> Result<MetricReport> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            context: "predictions vs labels".into(),
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let mae = predictions.iter().zip(labels).map(|(p, l)| (p - l).abs()).sum::<f64>() / labels.len() as f64;
    Ok(MetricReport::Scalar { mae, n: labels.len() })
}

/// Dispatches on the label kind; all labels must share one kind.
pub fn eval_metrics(predictions: &[Label], labels: &[Label]) -> Result<MetricReport> {
    let kind = labels.first().ok_or(Error::Empty("labels"))?.kind();
    match kind {
        LabelKind::Class => {
            let unwrap = |v: &[Label]| -> Result<Vec<usize>> {
                v.iter()
                    .map(|l| match l {
                        Label::Class(c) => Ok(*c),
                        Label::Scalar(_) => Err(Error::config("mixed label kinds")),
                    })
                    .collect()
            };
            classification_metrics(&unwrap(predictions)?, &unwrap(labels)?)
        }
        LabelKind::Scalar => {
            let unwrap = |v: &[Label]| -> Result<Vec<f64>> {
                v.iter()
                    .map(|l| match l {
                        Label::Scalar(x) => Ok(*x),
                        Label::Class(_) => Err(Error::config("mixed label kinds")),
                    })
                    .collect()
            };
            regression_metrics(&unwrap(predictions)?, &unwrap(labels)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub decoder: Decoder,
    pub history: Vec<EpochStats>,
    /// Epoch whose parameters were kept (1-based; 0 = initialization).
    pub best_epoch: usize,
    /// Metrics on the test split, when it is non-empty.
    pub test: Option<MetricReport>,
}

struct Prepared {
    inputs: Vec<f64>,
    steps: usize,
    label: Label,
}

fn prepare(encoding: &StepEncoding, records: &[&SequenceRecord]) -> Result<Vec<Prepared>> {
    records
        .iter()
        .map(|r| {
            Ok(Prepared {
                inputs: encoding.encode_sequence(&r.actions, &r.observations)?,
                steps: r.len(),
                label: r.label,
            })
        })
        .collect()
}

fn example_loss(out: &[f64], label: Label) -> (f64, Vec<f64>) {
    match label {
        Label::Class(c) => cross_entropy(out, c),
        Label::Scalar(t) => {
            let (l, g) = squared_error(out[0], t);
            (l, vec![g])
        }
    }
}

fn mean_loss(encoder: &Encoder, items: &[Prepared]) -> f64 {
    let losses: Vec<f64> = items
        .par_iter()
        .map(|it| {
            let out = encoder.encode_with(&encoder.params, &it.inputs, it.steps, None);
            example_loss(&out.head_output, it.label).0
        })
        .collect();
    losses.iter().sum::<f64>() / items.len() as f64
}

/// Sum of per-example gradients (and losses) over `batch`, reduced in index
/// order so the result does not depend on the thread count.
fn batch_gradient(encoder: &Encoder, items: &[Prepared], batch: &[usize], dropout_seed: u64) -> (Vec<f64>, f64) {
    let per: Vec<(Vec<f64>, f64)> = batch
        .par_iter()
        .map(|&i| {
            let it = &items[i];
            let mut drng = episode_stream(dropout_seed, i as u64);
            let out = encoder.encode_with(&encoder.params, &it.inputs, it.steps, Some(&mut drng));
            let (loss, pre) = example_loss(&out.head_output, it.label);
            let mut g = vec![0.0; encoder.n_params()];
            encoder.backward_pre(&encoder.params, out.tape, &pre, &mut g);
            (g, loss)
        })
        .collect();
    let mut grad = vec![0.0; encoder.n_params()];
    let mut loss = 0.0;
    for (g, l) in per {
        crate::nn::linalg::axpy(&mut grad, 1.0, &g);
        loss += l;
    }
    (grad, loss)
}

fn predict_labels(decoder: &Decoder, items: &[Prepared]) -> Vec<Label> {
    items
        .par_iter()
        .map(|it| {
            let out = decoder.encoder.predict_flat(&it.inputs);
            match decoder.spec.label_kind {
                LabelKind::Class => Label::Class(argmax(&out)),
                LabelKind::Scalar => Label::Scalar(out[0]),
            }
        })
        .collect()
}

/// Evaluate a decoder on records (typically a held-out split).
pub fn evaluate(decoder: &Decoder, records: &[&SequenceRecord]) -> Result<MetricReport> {
    let items = prepare(&decoder.spec.encoding, records)?;
    let preds = predict_labels(decoder, &items);
    let labels: Vec<Label> = items.iter().map(|it| it.label).collect();
    eval_metrics(&preds, &labels)
}

/// Mini-batch Adam on the train split. After each epoch the validation loss
/// is measured; the parameters with the lowest validation loss are kept (the
/// last epoch's when there is no validation split). Test metrics are
/// computed once, on the kept parameters.
pub fn train_decoder(
    dataset: &SequenceDataset,
    n_classes: usize,
    config: &DecoderConfig,
    train: &TrainConfig,
) -> Result<TrainOutcome> {
    let train_recs = dataset.split(Split::Train);
    if train_recs.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if dataset.label_kind == LabelKind::Class {
        if n_classes == 0 {
            return Err(Error::config("classifier needs at least one class"));
        }
        if let Some(r) = dataset
            .items
            .iter()
            .find(|r| matches!(r.label, Label::Class(c) if c >= n_classes))
        {
            return Err(Error::IndexOutOfRange {
                what: "class label",
                index: match r.label {
                    Label::Class(c) => c,
                    Label::Scalar(_) => unreachable!(),
                },
                len: n_classes,
            });
        }
    }
    if train.batch_size == 0 || !(train.lr > 0.0) {
        return Err(Error::config("batch size and learning rate must be positive"));
    }
    if !(train.final_lr_fraction > 0.0 && train.final_lr_fraction <= 1.0) {
        return Err(Error::config("final_lr_fraction must lie in (0, 1]"));
    }
    let spec = DecoderSpec {
        encoding: dataset.encoding,
        label_kind: dataset.label_kind,
        n_classes: if dataset.label_kind == LabelKind::Class { n_classes } else { 0 },
        config: config.clone(),
    };
    let mut decoder = Decoder::new(spec, derive_seed(train.seed, 1))?;
    let train_items = prepare(&dataset.encoding, &train_recs)?;
    let val_items = prepare(&dataset.encoding, &dataset.split(Split::Validation))?;
    let test_recs = dataset.split(Split::Test);

    let layout = decoder.encoder.layout().clone();
    let mut adam = AdamState::new(AdamConfig::with_lr(train.lr), decoder.encoder.n_params());
    let mut order: Vec<usize> = (0..train_items.len()).collect();
    let mut history = Vec::with_capacity(train.epochs);
    let mut best = (
        if val_items.is_empty() { f64::INFINITY } else { mean_loss(&decoder.encoder, &val_items) },
        0usize,
        decoder.encoder.params.clone(),
    );
    for epoch in 1..=train.epochs {
        let epoch_seed = derive_seed(train.seed, 100 + epoch as u64);
        order.shuffle(&mut episode_stream(epoch_seed, 0));
        adam.config.lr = scheduled_lr(train, epoch);
        let mut total = 0.0;
        for (b, batch) in order.chunks(train.batch_size).enumerate() {
            let (mut grad, loss) = batch_gradient(&decoder.encoder, &train_items, batch, derive_seed(epoch_seed, b as u64));
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if let Some(c) = train.grad_clip {
                crate::nn::clip_grad_norm(&mut grad, c);
            }
            adam.step(&mut decoder.encoder.params, &grad, &layout)?;
        }
        let train_loss = total / train_items.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        let validation_loss = (!val_items.is_empty()).then(|| mean_loss(&decoder.encoder, &val_items));
        let score = validation_loss.unwrap_or(f64::NEG_INFINITY);
        if val_items.is_empty() || score < best.0 {
            best = (score, epoch, decoder.encoder.params.clone());
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            validation_loss,
        });
    }
    decoder.encoder.params = best.2;
    let test = if test_recs.is_empty() {
        None
    } else {
        Some(evaluate(&decoder, &test_recs)?)
    };
    Ok(TrainOutcome {
        decoder,
        history,
        best_epoch: best.1,
        test,
    })
}

/// Per-epoch step size; epoch 1 runs at the full rate, the last at the floor.
pub fn scheduled_lr(train: &TrainConfig, epoch: usize) -> f64 {
    let f = train.final_lr_fraction;
    if f >= 1.0 || train.epochs <= 1 {
        return train.lr;
    }
    let progress = (epoch - 1) as f64 / (train.epochs - 1) as f64;
    train.lr * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

/// Train the inference classifier (cross-entropy).
pub fn train_inference(
    dataset: &SequenceDataset,
    n_classes: usize,
    config: &DecoderConfig,
    train: &TrainConfig,
) -> Result<TrainOutcome> {
    if dataset.label_kind != LabelKind::Class {
        return Err(Error::config("inference decoder needs class labels"));
    }
    train_decoder(dataset, n_classes, config, train)
}

/// Train the monitor regressor (mean squared error).
pub fn train_monitor(dataset: &SequenceDataset, config: &DecoderConfig, train: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.label_kind != LabelKind::Scalar {
        return Err(Error::config("monitor decoder needs scalar labels"));
    }
    train_decoder(dataset, 0, config, train)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_encoding_layout() {
        let e = StepEncoding::new(2, 2);
        assert_eq!(e.encode(1, 0), vec![0.0, 1.0, 1.0, 0.0]);
        let mut z = vec![7.0; 4];
        e.write(None, &mut z);
        assert_eq!(z, vec![0.0; 4]);
        assert!(e.encode_sequence(&[2], &[0]).is_err());
        assert!(e.encode_sequence(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn macro_metrics_by_hand() {
        let m = classification_metrics(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
        let MetricReport::Class { precision, recall, .. } = m else { panic!() };
        assert!((precision - 0.75).abs() < 1e-12);
        assert!((recall - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions() {
        let m = classification_metrics(&[2, 0, 1, 3], &[2, 0, 1, 3]).unwrap();
        assert_eq!(
            m,
            MetricReport::Class {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                accuracy: 1.0,
                n: 4
            }
        );
    }

    #[test]
    fn mae_by_hand() {
        let MetricReport::Scalar { mae, .. } = regression_metrics(&[0.1, 0.3], &[0.2, 0.2]).unwrap() else {
            panic!()
        };
        assert!((mae - 0.1).abs() < 1e-12);
        assert!(regression_metrics(&[0.1], &[0.2, 0.2]).is_err());
    }

    #[test]
    fn mixed_kinds_rejected() {
        assert!(eval_metrics(&[Label::Scalar(0.1)], &[Label::Class(0)]).is_err());
    }

    #[test]
    fn record_json_shape() {
        let r = SequenceRecord {
            id: 3,
            actions: vec![0, 1],
            observations: vec![1, 1],
            label: Label::Scalar(0.25),
            label_kind: LabelKind::Scalar,
            split: Split::Validation,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(
            s,
            r#"{"id":3,"actions":[0,1],"observations":[1,1],"label":0.25,"label_kind":"scalar","split":"validation"}"#
        );
        let back: SequenceRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        let c: SequenceRecord =
            serde_json::from_str(r#"{"id":1,"actions":[0],"observations":[0],"label":2,"label_kind":"class"}"#)
                .unwrap();
        assert_eq!(c.label, Label::Class(2));
        assert_eq!(c.split, Split::Train);
    }
}
