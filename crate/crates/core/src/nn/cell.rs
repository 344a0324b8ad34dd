//! GRU and LSTM cells over a flat parameter vector.
//!
//! Gate conventions (σ = logistic, ∘ = elementwise):
//!
//! ```text
//! GRU   r  = σ(W_r x + U_r h + b_r)
//!       z  = σ(W_z x + U_z h + b_z)
//!       n  = tanh(W_n x + b_n + r ∘ (U_n h + c_n))
//!       h' = (1 − z) ∘ n + z ∘ h
//!
//! LSTM  i, f, o = σ(W_· x + U_· h + b_·),  g = tanh(W_g x + U_g h + b_g)
//!       c' = f ∘ c + i ∘ g
//!       h' = o ∘ tanh(c')
//! ```
//!
//! Stacked gate matrices are stored row-major in gate order `[r; z; n]` and
//! `[i; f; g; o]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::ParamLayout;
use super::linalg::{matvec_add, matvec_t_add, outer_add, sigmoid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Gru,
    Lstm,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    /// Per-step cache width, in multiples of the hidden size.
    pub(crate) fn cache_width(self) -> usize {
        match self {
            // r, z, n, U_n h + c_n
            CellKind::Gru => 4,
            // i, f, g, o, c_prev, c_new
            CellKind::Lstm => 6,
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gru" => Ok(CellKind::Gru),
            "lstm" => Ok(CellKind::Lstm),
            other => Err(Error::config(format!("unknown cell kind {other:?}"))),
        }
    }
}

/// Where one cell's blocks live inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub kind: CellKind,
    pub input_size: usize,
    pub hidden_size: usize,
    w: usize,
    u: usize,
    b: usize,
    // recurrent bias of the GRU candidate; unused for LSTM
    c: usize,
}

impl Cell {
    /// Register this cell's blocks under `prefix`.
    pub fn register(
        layout: &mut ParamLayout,
        prefix: &str,
        kind: CellKind,
        input_size: usize,
        hidden_size: usize,
    ) -> Self {
        let g = kind.gates() * hidden_size;
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let w = layout.weight(format!("{prefix}.w"), g, input_size, bound);
        let u = layout.weight(format!("{prefix}.u"), g, hidden_size, bound);
        let b = layout.bias(format!("{prefix}.b"), g);
        let c = match kind {
            CellKind::Gru => layout.bias(format!("{prefix}.c"), hidden_size),
            CellKind::Lstm => usize::MAX,
        };
        Self {
            kind,
            input_size,
            hidden_size,
            w,
            u,
            b,
            c,
        }
    }

    fn w<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w..self.w + self.kind.gates() * self.hidden_size * self.input_size]
    }

    fn u<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.u..self.u + self.kind.gates() * self.hidden_size * self.hidden_size]
    }

    fn b<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.b..self.b + self.kind.gates() * self.hidden_size]
    }

    fn c<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.c..self.c + self.hidden_size]
    }

    /// One forward step.
    ///
    /// `c_prev`/`c_out` are the LSTM memory cells (ignored for GRU); `cache`
    /// receives `cache_width · H` values needed by [`Cell::backward`].
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn forward(
        &self,
        p: &[f64],
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        h_out: &mut [f64],
        c_out: &mut [f64],
        cache: &mut [f64],
        scratch: &mut CellScratch,
    ) {
        let h = self.hidden_size;
        let gx = &mut scratch.gx;
        let gh = &mut scratch.gh;
        gx.copy_from_slice(self.b(p));
        matvec_add(gx, self.w(p), x);
        gh.iter_mut().for_each(|v| *v = 0.0);
        matvec_add(gh, self.u(p), h_prev);
        match self.kind {
            CellKind::Gru => {
                let cn = self.c(p);
                let (r_c, rest) = cache.split_at_mut(h);
                let (z_c, rest) = rest.split_at_mut(h);
                let (n_c, ghn_c) = rest.split_at_mut(h);
                for k in 0..h {
                    let r = sigmoid(gx[k] + gh[k]);
                    let z = sigmoid(gx[h + k] + gh[h + k]);
                    let ghn = gh[2 * h + k] + cn[k];
                    let n = (gx[2 * h + k] + r * ghn).tanh();
                    r_c[k] = r;
                    z_c[k] = z;
                    n_c[k] = n;
                    ghn_c[k] = ghn;
                    h_out[k] = (1.0 - z) * n + z * h_prev[k];
                }
            }
            CellKind::Lstm => {
                for k in 0..h {
                    let i = sigmoid(gx[k] + gh[k]);
                    let f = sigmoid(gx[h + k] + gh[h + k]);
                    let g = (gx[2 * h + k] + gh[2 * h + k]).tanh();
                    let o = sigmoid(gx[3 * h + k] + gh[3 * h + k]);
                    let c = f * c_prev[k] + i * g;
                    cache[k] = i;
                    cache[h + k] = f;
                    cache[2 * h + k] = g;
                    cache[3 * h + k] = o;
                    cache[4 * h + k] = c_prev[k];
                    cache[5 * h + k] = c;
                    c_out[k] = c;
                    h_out[k] = o * c.tanh();
                }
            }
        }
    }

    /// Reverse of [`Cell::forward`].
    ///
    /// Takes the gradient flowing into `h_out` (and `c_out` for LSTM),
    /// accumulates parameter gradients into `grads`, adds the input gradient
    /// to `dx`, and writes the gradients w.r.t. `h_prev`/`c_prev` into
    /// `dh_prev`/`dc_prev` (overwritten).
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward(
        &self,
        p: &[f64],
        x: &[f64],
        h_prev: &[f64],
        cache: &[f64],
        dh: &[f64],
        dc: &[f64],
        grads: &mut [f64],
        dx: &mut [f64],
        dh_prev: &mut [f64],
        dc_prev: &mut [f64],
        scratch: &mut CellScratch,
    ) {
        let h = self.hidden_size;
        let g = self.kind.gates() * h;
        let dgx = &mut scratch.gx;
        let dgh = &mut scratch.gh;
        match self.kind {
            CellKind::Gru => {
                let (r_c, rest) = cache.split_at(h);
                let (z_c, rest) = rest.split_at(h);
                let (n_c, ghn_c) = rest.split_at(h);
                let dcn = &mut grads[self.c..self.c + h];
                for k in 0..h {
                    let (r, z, n) = (r_c[k], z_c[k], n_c[k]);
                    let dn = dh[k] * (1.0 - z);
                    let dz = dh[k] * (h_prev[k] - n);
                    dh_prev[k] = dh[k] * z;
                    let dan = dn * (1.0 - n * n);
                    let dr = dan * ghn_c[k];
                    let dar = dr * r * (1.0 - r);
                    let daz = dz * z * (1.0 - z);
                    dgx[k] = dar;
                    dgx[h + k] = daz;
                    dgx[2 * h + k] = dan;
                    dgh[k] = dar;
                    dgh[h + k] = daz;
                    dgh[2 * h + k] = dan * r;
                    dcn[k] += dan * r;
                }
            }
            CellKind::Lstm => {
                for k in 0..h {
                    let i = cache[k];
                    let f = cache[h + k];
                    let gg = cache[2 * h + k];
                    let o = cache[3 * h + k];
                    let c_prev = cache[4 * h + k];
                    let tc = cache[5 * h + k].tanh();
                    let d_o = dh[k] * tc;
                    let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
                    let di = dct * gg;
                    let dg = dct * i;
                    let df = dct * c_prev;
                    dc_prev[k] = dct * f;
                    dgx[k] = di * i * (1.0 - i);
                    dgx[h + k] = df * f * (1.0 - f);
                    dgx[2 * h + k] = dg * (1.0 - gg * gg);
                    dgx[3 * h + k] = d_o * o * (1.0 - o);
                }
                dgh.copy_from_slice(dgx);
                dh_prev.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        debug_assert_eq!(dgx.len(), g);
        let b = self.b;
        for (acc, &d) in grads[b..b + g].iter_mut().zip(dgx.iter()) {
            *acc += d;
        }
        let (w, u, n_in) = (self.w, self.u, self.input_size);
        outer_add(&mut grads[w..w + g * n_in], dgx, x);
        outer_add(&mut grads[u..u + g * h], dgh, h_prev);
        matvec_t_add(dx, self.w(p), dgx);
        matvec_t_add(dh_prev, self.u(p), dgh);
    }

    pub(crate) fn scratch(&self) -> CellScratch {
        let g = self.kind.gates() * self.hidden_size;
        CellScratch {
            gx: vec![0.0; g],
            gh: vec![0.0; g],
        }
    }
}

/// Reusable per-cell work buffers.
#[derive(Debug, Clone)]
pub(crate) struct CellScratch {
    gx: Vec<f64>,
    gh: Vec<f64>,
}

/// A standalone cell owning its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub cell: Cell,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
}

impl CellParams {
    /// Zero-initialized cell.
    pub fn zeros(kind: CellKind, input_size: usize, hidden_size: usize) -> Self {
        let mut layout = ParamLayout::new();
        let cell = Cell::register(&mut layout, "cell", kind, input_size, hidden_size);
        let params = vec![0.0; layout.len()];
        Self {
            cell,
            layout,
            params,
        }
    }

    /// Cell with weights uniform in `±1/√hidden_size` and zero biases.
    pub fn random<R: Rng + ?Sized>(kind: CellKind, input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut me = Self::zeros(kind, input_size, hidden_size);
        me.params = me.layout.init(rng);
        me
    }

    /// Named block, e.g. `"cell.w"`, `"cell.u"`, `"cell.b"`, `"cell.c"`.
    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.block(name)?.range();
        Some(&mut self.params[range])
    }

    fn check(&self, kind: CellKind, x: &[f64], h: &[f64]) -> Result<()> {
        if self.cell.kind != kind {
            return Err(Error::config(format!("cell is {:?}, not {kind:?}", self.cell.kind)));
        }
        if x.len() != self.cell.input_size {
            return Err(Error::Shape {
                context: "cell input".into(),
                expected: self.cell.input_size,
                got: x.len(),
            });
        }
        if h.len() != self.cell.hidden_size {
            return Err(Error::Shape {
                context: "cell hidden state".into(),
                expected: self.cell.hidden_size,
                got: h.len(),
            });
        }
        if x.iter().chain(h).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cell input".into()));
        }
        Ok(())
    }
}

/// One GRU step: `h' = GRU(x, h)`.
pub fn gru_step(params: &CellParams, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    params.check(CellKind::Gru, x, h)?;
    let cell = &params.cell;
    let mut out = vec![0.0; cell.hidden_size];
    let mut cache = vec![0.0; cell.kind.cache_width() * cell.hidden_size];
    cell.forward(&params.params, x, h, &[], &mut out, &mut [], &mut cache, &mut cell.scratch());
    Ok(out)
}

/// One LSTM step: `(h', c') = LSTM(x, h, c)`.
pub fn lstm_step(params: &CellParams, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check(CellKind::Lstm, x, h)?;
    if c.len() != params.cell.hidden_size {
        return Err(Error::Shape {
            context: "cell memory".into(),
            expected: params.cell.hidden_size,
            got: c.len(),
        });
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cell memory".into()));
    }
    let cell = &params.cell;
    let hs = cell.hidden_size;
    let (mut h_out, mut c_out) = (vec![0.0; hs], vec![0.0; hs]);
    let mut cache = vec![0.0; cell.kind.cache_width() * hs];
    cell.forward(&params.params, x, h, c, &mut h_out, &mut c_out, &mut cache, &mut cell.scratch());
    Ok((h_out, c_out))
}
