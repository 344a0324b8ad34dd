//! Grid-search oracle for `max_g min_j Σ_a g(a)·D[a][j]` over the simplex.
//!
//! An exhaustive 1e-3 grid over five actions has ~4·10^10 points, so the
//! search is coarse-to-fine: a full grid at step 0.1, then local grids
//! around the incumbent, each four times finer, climbed to a fixed point,
//! until the step is below 1e-5. Every point it visits is feasible, so the
//! result is a certified lower bound. It is not exact: lattice moves cannot
//! follow a ridge of the piecewise-linear objective and can stall short of
//! the optimum by ~1e-2. Exact values come from `vertex`.

pub fn objective(d: &[Vec<f64>], g: &[f64]) -> f64 {
    let n_alt = d[0].len();
    (0..n_alt)
        .map(|j| d.iter().zip(g).map(|(row, w)| w * row[j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// All compositions of `total` into `parts` non-negative integers.
fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

pub fn grid_maximin(d: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = d.len();
    if n == 1 {
        return (vec![1.0], objective(d, &[1.0]));
    }
    let mut pts = Vec::new();
    compositions(10, n, &mut Vec::new(), &mut pts);
    let mut best_g = vec![1.0 / n as f64; n];
    let mut best = f64::NEG_INFINITY;
    for p in pts {
        let g: Vec<f64> = p.iter().map(|&k| k as f64 / 10.0).collect();
        let v = objective(d, &g);
        if v > best {
            best = v;
            best_g = g;
        }
    }
    let mut step = 0.1;
    while step > 1e-5 {
        let fine = step / 4.0;
        // climb at this resolution until no lattice neighbour improves
        loop {
            let before = best;
            local_pass(d, fine, &mut best_g, &mut best);
            if best <= before {
                break;
            }
        }
        step = fine;
    }
    (best_g, best)
}

fn local_pass(d: &[Vec<f64>], fine: f64, best_g: &mut Vec<f64>, best: &mut f64) {
    let n = d.len();
    {
        let center = best_g.clone();
        let span = 4i64;
        let mut offsets = vec![-span; n - 1];
        loop {
            let mut g = Vec::with_capacity(n);
            let mut sum = 0.0;
            let mut ok = true;
            for (c, &o) in center[..n - 1].iter().zip(&offsets) {
                let x = c + o as f64 * fine;
                if x < -1e-12 {
                    ok = false;
                    break;
                }
                let x = x.max(0.0);
                sum += x;
                g.push(x);
            }
            if ok && sum <= 1.0 + 1e-12 {
                g.push((1.0 - sum).max(0.0));
                let v = objective(d, &g);
                if v > *best {
                    *best = v;
                    *best_g = g;
                }
            }
            // odometer over the offsets
            let mut k = 0;
            while k < n - 1 {
                offsets[k] += 1;
                if offsets[k] <= span {
                    break;
                }
                offsets[k] = -span;
                k += 1;
            }
            if k == n - 1 {
                break;
            }
        }
    }
}
