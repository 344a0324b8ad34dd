//! Exact maximin value by vertex enumeration.
//!
//! Variables are `(g_1..g_n, v)`. Every vertex of
//! `{Σg = 1, g ≥ 0, v ≤ D_j·g}` makes `n` of the `n + m` inequalities tight,
//! so trying every such subset and keeping the best feasible point finds the
//! optimum. At most C(13, 5) = 1287 systems of size 6 for the sizes used here.

/// Solve `a·x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

pub fn vertex_maximin(d: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = d.len();
    let m = d[0].len();
    // inequality i < n: g_i = 0; i ≥ n: v − D_{i−n}·g = 0
    let row = |i: usize| -> Vec<f64> {
        let mut r = vec![0.0; n + 1];
        if i < n {
            r[i] = 1.0;
        } else {
            for a in 0..n {
                r[a] = -d[a][i - n];
            }
            r[n] = 1.0;
        }
        r
    };
    let mut all = Vec::new();
    subsets(n + m, n, 0, &mut Vec::new(), &mut all);
    let mut best = (vec![], f64::NEG_INFINITY);
    for s in all {
        let mut a = vec![{
            let mut r = vec![1.0; n + 1];
            r[n] = 0.0;
            r
        }];
        a.extend(s.iter().map(|&i| row(i)));
        let mut b = vec![0.0; n + 1];
        b[0] = 1.0;
        let Some(x) = solve(a, b) else { continue };
        let (g, v) = (&x[..n], x[n]);
        let feasible = g.iter().all(|&w| w >= -1e-9)
            && (0..m).all(|j| v <= (0..n).map(|a| d[a][j] * g[a]).sum::<f64>() + 1e-9);
        if feasible && v > best.1 {
            best = (g.to_vec(), v);
        }
    }
    best
}
