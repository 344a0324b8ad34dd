//! Central-difference gradient checking, reported per parameter block.

use super::layout::ParamLayout;

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockError>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_error <= self.tolerance)
    }

    pub fn worst(&self) -> Option<&BlockError> {
        self.blocks
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Compare `analytic` against `(L(θ+h) − L(θ−h)) / 2h` for every parameter.
///
/// Error within a block is `max |a − n| / max(max|a|, max|n|, 1e-6)`, the
/// scale taken over the whole block so tiny entries do not blow up the ratio.
pub fn grad_check<F>(
    layout: &ParamLayout,
    params: &[f64],
    analytic: &[f64],
    mut loss: F,
    h: f64,
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), layout.len());
    assert_eq!(analytic.len(), layout.len());
    let mut theta = params.to_vec();
    let mut blocks = Vec::with_capacity(layout.blocks().len());
    for b in layout.blocks() {
        let mut max_diff: f64 = 0.0;
        let mut scale: f64 = 1e-6;
        for i in b.range() {
            let orig = theta[i];
            theta[i] = orig + h;
            let up = loss(&theta);
            theta[i] = orig - h;
            let down = loss(&theta);
            theta[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            max_diff = max_diff.max((analytic[i] - numeric).abs());
            scale = scale.max(analytic[i].abs()).max(numeric.abs());
        }
        blocks.push(BlockError {
            name: b.name.clone(),
            max_rel_error: max_diff / scale,
        });
    }
    GradCheckReport { blocks, tolerance }
}
