//! Stacked (optionally bidirectional) recurrent layers with inverted dropout
//! between layers, full-sequence forward/backward and an incremental
//! step-by-step path for unidirectional stacks.
//!
//! Sequences are flat row-major `T × width` slices. Initial hidden and cell
//! states are zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{Cell, CellKind, CellScratch};
use super::layout::ParamLayout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub kind: CellKind,
    pub input_size: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub bidirectional: bool,
    /// Dropout probability applied to each layer's output before the next
    /// layer (training mode only). Never applied after the top layer.
    pub dropout: f64,
}

impl StackConfig {
    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    pub fn output_size(&self) -> usize {
        self.hidden_size * self.directions()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.hidden_size == 0 || self.layers == 0 {
            return Err(Error::config(
                "recurrent stack: input size, hidden size and layer count must be positive",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "recurrent stack: dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentStack {
    config: StackConfig,
    // index: layer * directions + direction
    cells: Vec<Cell>,
}

/// Forward intermediates for one sequence.
#[derive(Debug, Clone)]
pub struct StackTape {
    steps: usize,
    // per layer: the (post-dropout) input sequence, T × in_l
    inputs: Vec<Vec<f64>>,
    // per layer l ≥ 1: dropout mask applied to layer l−1 output
    masks: Vec<Option<Vec<f64>>>,
    // per (layer, direction)
    dirs: Vec<DirTape>,
}

#[derive(Debug, Clone)]
struct DirTape {
    // (T + 1) × H hidden states in processing order; row 0 is the zero state
    hs: Vec<f64>,
    // T × cache_width·H
    caches: Vec<f64>,
}

/// Running state of a unidirectional stack in eval mode.
#[derive(Debug, Clone)]
pub struct StackState {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    next_h: Vec<f64>,
    next_c: Vec<f64>,
    cache: Vec<f64>,
    scratch: Vec<CellScratch>,
}

impl StackState {
    /// Top-layer output after the last step.
    pub fn output(&self) -> &[f64] {
        self.h.last().expect("at least one layer")
    }
}

impl RecurrentStack {
    pub fn new(config: StackConfig, layout: &mut ParamLayout, prefix: &str) -> Result<Self> {
        config.validate()?;
        let dirs = config.directions();
        let mut cells = Vec::with_capacity(config.layers * dirs);
        for l in 0..config.layers {
            let input = if l == 0 {
                config.input_size
            } else {
                config.output_size()
            };
            for d in 0..dirs {
                let tag = if d == 0 { "fwd" } else { "bwd" };
                cells.push(Cell::register(
                    layout,
                    &format!("{prefix}.l{l}.{tag}"),
                    config.kind,
                    input,
                    config.hidden_size,
                ));
            }
        }
        Ok(Self { config, cells })
    }

    pub fn config(&self) -> &StackConfig {
        &self.config
    }

    pub fn output_size(&self) -> usize {
        self.config.output_size()
    }

    /// Run the whole sequence. `dropout_rng` enables training-mode dropout.
    pub fn forward(
        &self,
        params: &[f64],
        inputs: &[f64],
        steps: usize,
        mut dropout_rng: Option<&mut dyn rand::RngCore>,
    ) -> (Vec<f64>, StackTape) {
        let cfg = &self.config;
        let hs = cfg.hidden_size;
        let dirs = cfg.directions();
        let out_w = cfg.output_size();
        let cw = cfg.kind.cache_width() * hs;
        debug_assert_eq!(inputs.len(), steps * cfg.input_size);

        let mut tape = StackTape {
            steps,
            inputs: Vec::with_capacity(cfg.layers),
            masks: Vec::with_capacity(cfg.layers),
            dirs: Vec::with_capacity(cfg.layers * dirs),
        };
        let mut layer_in = inputs.to_vec();
        let mut mask_for_this_layer: Option<Vec<f64>> = None;
        let mut layer_out = Vec::new();
        for l in 0..cfg.layers {
            let in_w = layer_in.len() / steps;
            layer_out = vec![0.0; steps * out_w];
            for d in 0..dirs {
                let cell = &self.cells[l * dirs + d];
                let mut dt = DirTape {
                    hs: vec![0.0; (steps + 1) * hs],
                    caches: vec![0.0; steps * cw],
                };
                let mut c_prev = vec![0.0; hs];
                let mut c_new = vec![0.0; hs];
                let mut scratch = cell.scratch();
                for k in 0..steps {
                    let t = if d == 0 { k } else { steps - 1 - k };
                    let x = &layer_in[t * in_w..(t + 1) * in_w];
                    let (prev, next) = dt.hs.split_at_mut((k + 1) * hs);
                    cell.forward(
                        params,
                        x,
                        &prev[k * hs..],
                        &c_prev,
                        &mut next[..hs],
                        &mut c_new,
                        &mut dt.caches[k * cw..(k + 1) * cw],
                        &mut scratch,
                    );
                    std::mem::swap(&mut c_prev, &mut c_new);
                    layer_out[t * out_w + d * hs..t * out_w + (d + 1) * hs]
                        .copy_from_slice(&next[..hs]);
                }
                tape.dirs.push(dt);
            }
            tape.inputs.push(std::mem::take(&mut layer_in));
            tape.masks.push(mask_for_this_layer.take());
            if l + 1 < cfg.layers {
                let mut next_in = layer_out.clone();
                if let Some(rng) = dropout_rng.as_deref_mut() {
                    if cfg.dropout > 0.0 {
                        let keep = 1.0 - cfg.dropout;
                        let mask: Vec<f64> = (0..next_in.len())
                            .map(|_| {
                                if rng.random::<f64>() < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        for (v, m) in next_in.iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        mask_for_this_layer = Some(mask);
                    }
                }
                layer_in = next_in;
            }
        }
        (layer_out, tape)
    }

    /// Backpropagate `d_outputs` (T × output_size); parameter gradients are
    /// accumulated into `grads`, input gradients returned (T × input_size).
    pub fn backward(&self, params: &[f64], tape: &StackTape, d_outputs: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let cfg = &self.config;
        let hs = cfg.hidden_size;
        let dirs = cfg.directions();
        let out_w = cfg.output_size();
        let cw = cfg.kind.cache_width() * hs;
        let steps = tape.steps;

        let mut d_out = d_outputs.to_vec();
        let mut dh = vec![0.0; hs];
        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        let mut dh_prev = vec![0.0; hs];
        let mut dc_prev = vec![0.0; hs];
        for l in (0..cfg.layers).rev() {
            let layer_in = &tape.inputs[l];
            let in_w = layer_in.len() / steps;
            let mut d_in = vec![0.0; steps * in_w];
            for d in 0..dirs {
                let cell = &self.cells[l * dirs + d];
                let dt = &tape.dirs[l * dirs + d];
                let mut scratch = cell.scratch();
                dh_next.iter_mut().for_each(|v| *v = 0.0);
                dc_next.iter_mut().for_each(|v| *v = 0.0);
                for k in (0..steps).rev() {
                    let t = if d == 0 { k } else { steps - 1 - k };
                    let src = &d_out[t * out_w + d * hs..t * out_w + (d + 1) * hs];
                    for j in 0..hs {
                        dh[j] = src[j] + dh_next[j];
                    }
                    cell.backward(
                        params,
                        &layer_in[t * in_w..(t + 1) * in_w],
                        &dt.hs[k * hs..(k + 1) * hs],
                        &dt.caches[k * cw..(k + 1) * cw],
                        &dh,
                        &dc_next,
                        grads,
                        &mut d_in[t * in_w..(t + 1) * in_w],
                        &mut dh_prev,
                        &mut dc_prev,
                        &mut scratch,
                    );
                    std::mem::swap(&mut dh_next, &mut dh_prev);
                    std::mem::swap(&mut dc_next, &mut dc_prev);
                }
            }
            if let Some(mask) = &tape.masks[l] {
                for (v, m) in d_in.iter_mut().zip(mask) {
                    *v *= m;
                }
            }
            d_out = d_in;
        }
        d_out
    }

    /// Fresh zero state for [`RecurrentStack::step`].
    pub fn start(&self) -> StackState {
        let hs = self.config.hidden_size;
        StackState {
            h: vec![vec![0.0; hs]; self.config.layers],
            c: vec![vec![0.0; hs]; self.config.layers],
            next_h: vec![0.0; hs],
            next_c: vec![0.0; hs],
            cache: vec![0.0; self.config.kind.cache_width() * hs],
            scratch: self.cells.iter().map(Cell::scratch).collect(),
        }
    }

    /// Advance a unidirectional stack by one input, eval mode. Produces the
    /// same numbers as [`RecurrentStack::forward`] without dropout.
    pub fn step<'s>(&self, params: &[f64], state: &'s mut StackState, x: &[f64]) -> &'s [f64] {
        assert!(
            !self.config.bidirectional,
            "incremental stepping needs a unidirectional stack"
        );
        for l in 0..self.config.layers {
            let cell = &self.cells[l];
            let (below, rest) = state.h.split_at_mut(l);
            let input = if l == 0 { x } else { &below[l - 1][..] };
            cell.forward(
                params,
                input,
                &rest[0],
                &state.c[l],
                &mut state.next_h,
                &mut state.next_c,
                &mut state.cache,
                &mut state.scratch[l],
            );
            std::mem::swap(&mut rest[0], &mut state.next_h);
            std::mem::swap(&mut state.c[l], &mut state.next_c);
        }
        state.output()
    }
}
