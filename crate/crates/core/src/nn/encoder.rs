//! Sequence encoder: recurrent stack → mean over steps → affine head, with a
//! softmax on top for classifiers.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::cell::CellKind;
use super::layout::ParamLayout;
use super::linalg::{matvec_add, matvec_t_add, outer_add, softmax};
use super::stack::{RecurrentStack, StackConfig, StackState, StackTape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// softmax over `n_out` classes
    Classifier,
    /// identity output
    Regressor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: CellKind,
    pub input_size: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub bidirectional: bool,
    pub dropout: f64,
    pub n_out: usize,
    pub head: HeadKind,
}

impl EncoderConfig {
    fn stack(&self) -> StackConfig {
        StackConfig {
            kind: self.kind,
            input_size: self.input_size,
            hidden_size: self.hidden_size,
            layers: self.layers,
            bidirectional: self.bidirectional,
            dropout: self.dropout,
        }
    }
}

/// Encoder parameters together with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    layout: ParamLayout,
    stack: RecurrentStack,
    head_w: usize,
    head_b: usize,
    pub params: Vec<f64>,
}

/// Forward products of one sequence.
#[derive(Debug)]
pub struct Encoded {
    /// T × output_size top-layer outputs.
    pub outputs: Vec<f64>,
    pub pooled: Vec<f64>,
    pub head_output: Vec<f64>,
    pub tape: Tape,
}

/// Recorded forward pass; consumed by [`Encoder::backward`].
#[derive(Debug)]
pub struct Tape {
    stack: StackTape,
    steps: usize,
    pooled: Vec<f64>,
    head_output: Vec<f64>,
}

/// Gradients of a scalar loss.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    /// T × input_size
    pub inputs: Vec<f64>,
}

impl Encoder {
    /// Fresh encoder with weights uniform in `±1/√fan` and zero biases.
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Self> {
        let mut me = Self::zeros(config)?;
        me.params = me.layout.init(rng);
        Ok(me)
    }

    /// Encoder with every parameter zero.
    pub fn zeros(config: EncoderConfig) -> Result<Self> {
        if config.n_out == 0 {
            return Err(Error::config("encoder head needs at least one output"));
        }
        let mut layout = ParamLayout::new();
        let stack = RecurrentStack::new(config.stack(), &mut layout, "rnn")?;
        let d = stack.output_size();
        let head_w = layout.weight("head.w", config.n_out, d, 1.0 / (d as f64).sqrt());
        let head_b = layout.bias("head.b", config.n_out);
        let params = vec![0.0; layout.len()];
        Ok(Self {
            config,
            layout,
            stack,
            head_w,
            head_b,
            params,
        })
    }

    /// Rebuild from a config and a parameter vector (e.g. from a checkpoint).
    pub fn from_params(config: EncoderConfig, params: Vec<f64>) -> Result<Self> {
        let mut me = Self::zeros(config)?;
        if params.len() != me.layout.len() {
            return Err(Error::Shape {
                context: "encoder parameters".into(),
                expected: me.layout.len(),
                got: params.len(),
            });
        }
        me.params = params;
        Ok(me)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.len()
    }

    /// Encode a sequence of step vectors.
    pub fn encode<R: Rng + ?Sized>(&self, inputs: &[Vec<f64>], mode: Mode, rng: &mut R) -> Result<Encoded> {
        let flat = self.flatten(inputs)?;
        let mut rng = RngAdapter(rng);
        let dropout: Option<&mut dyn RngCore> = match mode {
            Mode::Train => Some(&mut rng),
            Mode::Eval => None,
        };
        Ok(self.encode_with(&self.params, &flat, inputs.len(), dropout))
    }

    /// Eval-mode encoding without a tape-owning caller.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let flat = self.flatten(inputs)?;
        Ok(self.encode_with(&self.params, &flat, inputs.len(), None).head_output)
    }

    /// Eval-mode encoding of a flat `T × input_size` slice.
    pub fn predict_flat(&self, inputs: &[f64]) -> Vec<f64> {
        let steps = inputs.len() / self.config.input_size;
        self.encode_with(&self.params, inputs, steps, None).head_output
    }

    fn flatten(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Err(Error::Empty("input sequence"));
        }
        let width = self.config.input_size;
        let mut flat = Vec::with_capacity(inputs.len() * width);
        for x in inputs {
            if x.len() != width {
                return Err(Error::Shape {
                    context: "encoder step input".into(),
                    expected: width,
                    got: x.len(),
                });
            }
            flat.extend_from_slice(x);
        }
        Ok(flat)
    }

    /// Forward with explicit parameters (gradient checks perturb these).
    pub fn encode_with(
        &self,
        params: &[f64],
        inputs: &[f64],
        steps: usize,
        dropout: Option<&mut dyn RngCore>,
    ) -> Encoded {
        assert!(steps > 0, "empty sequence");
        let (outputs, stack_tape) = self.stack.forward(params, inputs, steps, dropout);
        let d = self.stack.output_size();
        let mut sum = vec![0.0; d];
        for row in outputs.chunks_exact(d) {
            for (s, &o) in sum.iter_mut().zip(row) {
                *s += o;
            }
        }
        let pooled: Vec<f64> = sum.iter().map(|s| s / steps as f64).collect();
        let head_output = self.head(params, &pooled);
        Encoded {
            outputs,
            pooled: pooled.clone(),
            head_output: head_output.clone(),
            tape: Tape {
                stack: stack_tape,
                steps,
                pooled,
                head_output,
            },
        }
    }

    fn head(&self, params: &[f64], pooled: &[f64]) -> Vec<f64> {
        let n = self.config.n_out;
        let d = pooled.len();
        let mut z = params[self.head_b..self.head_b + n].to_vec();
        matvec_add(&mut z, &params[self.head_w..self.head_w + n * d], pooled);
        match self.config.head {
            HeadKind::Classifier => softmax(&z),
            HeadKind::Regressor => z,
        }
    }

    /// Exact gradients given `∂loss/∂head_output`.
    pub fn backward(&self, tape: Tape, head_grad: &[f64]) -> Gradients {
        self.backward_with(&self.params, tape, head_grad)
    }

    pub fn backward_with(&self, params: &[f64], tape: Tape, head_grad: &[f64]) -> Gradients {
        let pre = match self.config.head {
            HeadKind::Classifier => {
                let p = &tape.head_output;
                let gp: f64 = head_grad.iter().zip(p).map(|(g, p)| g * p).sum();
                p.iter().zip(head_grad).map(|(p, g)| p * (g - gp)).collect()
            }
            HeadKind::Regressor => head_grad.to_vec(),
        };
        let mut grads = vec![0.0; self.layout.len()];
        let inputs = self.backward_pre(params, tape, &pre, &mut grads);
        Gradients {
            params: grads,
            inputs,
        }
    }

    /// Backward from the gradient w.r.t. the head pre-activation (the logits
    /// for classifiers), accumulating into `grads`. Returns input gradients.
    pub fn backward_pre(&self, params: &[f64], tape: Tape, pre_grad: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let n = self.config.n_out;
        let d = self.stack.output_size();
        for (g, &v) in grads[self.head_b..self.head_b + n].iter_mut().zip(pre_grad) {
            *g += v;
        }
        outer_add(&mut grads[self.head_w..self.head_w + n * d], pre_grad, &tape.pooled);
        let mut d_pooled = vec![0.0; d];
        matvec_t_add(&mut d_pooled, &params[self.head_w..self.head_w + n * d], pre_grad);
        let inv = 1.0 / tape.steps as f64;
        let d_step: Vec<f64> = d_pooled.iter().map(|v| v * inv).collect();
        let mut d_outputs = Vec::with_capacity(tape.steps * d);
        for _ in 0..tape.steps {
            d_outputs.extend_from_slice(&d_step);
        }
        self.stack.backward(params, &tape.stack, &d_outputs, grads)
    }

    /// Incremental scorer for unidirectional encoders; `None` when bidirectional.
    pub fn prefix_scorer(&self) -> Option<PrefixScorer<'_>> {
        if self.config.bidirectional {
            return None;
        }
        Some(PrefixScorer {
            encoder: self,
            state: self.stack.start(),
            sum: vec![0.0; self.stack.output_size()],
            steps: 0,
        })
    }
}

/// Scores successive prefixes of a sequence in O(1) extra work per step by
/// keeping the recurrent state and a running sum of outputs.
#[derive(Debug, Clone)]
pub struct PrefixScorer<'a> {
    encoder: &'a Encoder,
    state: StackState,
    sum: Vec<f64>,
    steps: usize,
}

impl PrefixScorer<'_> {
    /// Append one step and return the head output for the prefix so far.
    pub fn push(&mut self, x: &[f64]) -> Vec<f64> {
        let enc = self.encoder;
        let o = enc.stack.step(&enc.params, &mut self.state, x);
        for (s, &v) in self.sum.iter_mut().zip(o) {
            *s += v;
        }
        self.steps += 1;
        let pooled: Vec<f64> = self.sum.iter().map(|s| s / self.steps as f64).collect();
        enc.head(&enc.params, &pooled)
    }

    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }
}

// Lets a `&mut R` with `R: ?Sized` travel as `&mut dyn RngCore`.
struct RngAdapter<'a, R: ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Mean cross-entropy pieces for one example: `(−ln p_label, ∂/∂logits)`.
/// Takes the softmax output directly; `∂/∂logits = p − onehot(label)`.
pub fn cross_entropy(probs: &[f64], label: usize) -> (f64, Vec<f64>) {
    let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
    let mut grad = probs.to_vec();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Squared error pieces for a scalar regression: `((y − t)², 2(y − t))`.
pub fn squared_error(pred: f64, target: f64) -> (f64, f64) {
    let e = pred - target;
    (e * e, 2.0 * e)
}
