//! Small dense kernels over row-major slices.

/// `out += m · x` for an `out.len() × x.len()` row-major matrix.
#[inline]
pub fn matvec_add(out: &mut [f64], m: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(m.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += mᵀ · y` for an `y.len() × out.len()` row-major matrix.
#[inline]
pub fn matvec_t_add(out: &mut [f64], m: &[f64], y: &[f64]) {
    let cols = out.len();
    debug_assert_eq!(m.len(), y.len() * cols);
    for (&yr, row) in y.iter().zip(m.chunks_exact(cols)) {
        if yr != 0.0 {
            axpy(out, yr, row);
        }
    }
}

/// `m += y ⊗ x` (rank-one update of a row-major `y.len() × x.len()` matrix).
#[inline]
pub fn outer_add(m: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(m.len(), y.len() * cols);
    for (&yr, row) in y.iter().zip(m.chunks_exact_mut(cols)) {
        if yr != 0.0 {
            axpy(row, yr, x);
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four independent accumulators so the adds pipeline
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha · x`
#[inline]
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= total;
    }
    out
}

/// `ln Σ exp(z)`
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

pub fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
