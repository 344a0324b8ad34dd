//! Adam with bias correction, plus global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use super::layout::ParamLayout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. Parameters are untouched if any gradient entry is not
    /// finite; the error names the offending block.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], layout: &ParamLayout) -> Result<()> {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            let block = layout.block_at(i).map_or("<unknown>", |b| b.name.as_str());
            return Err(Error::NonFinite(format!(
                "gradient entry {i} in parameter block {block} is {}",
                grads[i]
            )));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        Ok(())
    }
}

/// Rescale `grads` so its L2 norm is at most `max_norm`. Returns the norm
/// before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = super::linalg::l2_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut layout = ParamLayout::new();
        layout.weight("w", 1, 3, 1.0);
        let mut p = vec![1.0, 1.0, 1.0];
        let mut st = AdamState::new(AdamConfig::with_lr(0.1), 3);
        st.step(&mut p, &[2.0, -0.5, 0.0], &layout).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-7);
        assert!((p[1] - 1.1).abs() < 1e-7);
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut layout = ParamLayout::new();
        layout.weight("w", 1, 2, 1.0);
        let mut p = vec![3.0, -2.0];
        let mut st = AdamState::new(AdamConfig::with_lr(0.05), 2);
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
            st.step(&mut p, &g, &layout).unwrap();
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut layout = ParamLayout::new();
        layout.weight("first", 1, 2, 1.0);
        layout.bias("second", 2);
        let mut p = vec![0.0; 4];
        let mut st = AdamState::new(AdamConfig::default(), 4);
        let err = st.step(&mut p, &[0.0, 0.0, f64::NAN, 0.0], &layout).unwrap_err();
        assert!(err.to_string().contains("second"), "{err}");
        assert_eq!(p, vec![0.0; 4]);
        assert_eq!(st.steps(), 0);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut g = vec![0.3, 0.4];
        clip_grad_norm(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
    }
}
