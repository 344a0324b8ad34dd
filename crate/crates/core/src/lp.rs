//! Dense maximin solver for small zero-sum matrix games.
//!
//! Row player mixes over rows of a nonnegative payoff matrix `m[r][c]` and
//! maximizes the worst column payoff. With every column carrying some positive
//! entry the game value is positive and the classical substitution
//! `u = g / v` turns it into
//!
//! ```text
//! min Σ u_r   s.t.  Σ_r u_r m[r][c] ≥ 1 ∀c,  u ≥ 0
//! ```
//!
//! whose dual `max Σ w_c  s.t.  Σ_c m[r][c] w_c ≤ 1 ∀r,  w ≥ 0` starts feasible
//! at the slack basis. We run a tableau simplex on the dual (Bland's rule,
//! no cycling) and read `u` off the slack reduced costs.

const PIVOT_EPS: f64 = 1e-12;

/// Optimal row mixture and the attained value.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub weights: Vec<f64>,
    pub value: f64,
}

/// Solve `max_g min_c Σ_r g_r m[r][c]` over the probability simplex.
///
/// Entries must be finite and nonnegative; `m` has at least one row and one
/// column. Returns `None` when some column is identically zero (value 0, every
/// mixture optimal).
pub fn solve_maximin(m: &[Vec<f64>]) -> Option<GameSolution> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    debug_assert!(rows > 0 && cols > 0);
    if (0..cols).any(|c| m.iter().all(|row| row[c] <= 0.0)) {
        return None;
    }

    // Rescale so the pivot tolerance is meaningful whatever the magnitude.
    let scale = m
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(0.0f64, f64::max);

    // Tableau: `rows` constraint rows of width cols + rows + 1 (rhs), then the
    // objective row holding reduced costs and the negated objective value.
    let width = cols + rows + 1;
    let mut tab = vec![0.0; (rows + 1) * width];
    for r in 0..rows {
        for c in 0..cols {
            tab[r * width + c] = m[r][c] / scale;
        }
        tab[r * width + cols + r] = 1.0;
        tab[r * width + width - 1] = 1.0;
    }
    let obj = rows * width;
    for c in 0..cols {
        tab[obj + c] = 1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    loop {
        // Bland: lowest-index improving column.
        let Some(enter) = (0..cols + rows).find(|&j| tab[obj + j] > PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..rows {
            let a = tab[r * width + enter];
            if a > PIVOT_EPS {
                let ratio = tab[r * width + width - 1] / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - PIVOT_EPS
                            || ((ratio - best_ratio).abs() <= PIVOT_EPS && basis[r] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        // Every column has a positive entry (checked above), so the dual is bounded.
        let leave = leave.expect("dual LP is bounded");
        pivot(&mut tab, width, rows + 1, leave, enter);
        basis[leave] = enter;
    }

    // Shadow prices of the slack rows.
    let u: Vec<f64> = (0..rows).map(|r| (-tab[obj + cols + r]).max(0.0)).collect();
    let total: f64 = u.iter().sum();
    let weights: Vec<f64> = u.iter().map(|x| x / total).collect();
    let value = (0..cols)
        .map(|c| (0..rows).map(|r| weights[r] * m[r][c]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Some(GameSolution { weights, value })
}

fn pivot(tab: &mut [f64], width: usize, n_rows: usize, pr: usize, pc: usize) {
    let p = tab[pr * width + pc];
    for j in 0..width {
        tab[pr * width + j] /= p;
    }
    for r in 0..n_rows {
        if r == pr {
            continue;
        }
        let f = tab[r * width + pc];
        if f == 0.0 {
            continue;
        }
        for j in 0..width {
            tab[r * width + j] -= f * tab[pr * width + j];
        }
    }
}
