//! Small dense linear algebra.
//!
//! Field matrices here are `d x m` with `d <= ~6` and rows whose scales can
//! differ by hundreds of orders of magnitude (exponentially flat
//! coefficients). One-sided Jacobi on the rows keeps high relative accuracy
//! for the smallest singular value in that setting, which a Gram-matrix
//! eigensolver would not.

const ORTHO_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

/// Singular values of the `d x m` matrix whose rows are `rows`, in
/// ascending order. Returns `d` values; when `m < d` the trailing rank
/// deficit shows up as zeros.
///
/// Panics if the rows have different lengths.
pub fn singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.len();
    if d == 0 {
        return Vec::new();
    }
    let m = rows[0].len();
    assert!(rows.iter().all(|r| r.len() == m), "ragged matrix");
    let mut a: Vec<Vec<f64>> = rows.to_vec();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let (alpha, beta, gamma) = gram(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= ORTHO_TOL * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                let (head, tail) = a.split_at_mut(q);
                let (rp, rq) = (&mut head[p], &mut tail[0]);
                for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = c * u - s * v;
                    *y = s * u + c * v;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = a.iter().map(|r| norm(r)).collect();
    sv.sort_by(|x, y| x.total_cmp(y));
    sv
}

/// Squared smallest singular value, i.e. the smallest eigenvalue of `A Aᵗ`.
pub fn min_eigen_gram(rows: &[Vec<f64>]) -> f64 {
    singular_values(rows).first().map_or(0.0, |s| s * s)
}

fn gram(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (&u, &v) in x.iter().zip(y) {
        alpha += u * u;
        beta += v * v;
        gamma += u * v;
    }
    (alpha, beta, gamma)
}

/// Euclidean norm with scaling so tiny rows do not underflow early.
pub fn norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * s.sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Solve `A x = b` for a small square `A` (row-major rows) by Gaussian
/// elimination with partial pivoting. `None` when singular.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col] == 0.0 || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            let (top, rest) = m.split_at_mut(row);
            for (dst, src) in rest[0][col..].iter_mut().zip(&top[col][col..]) {
                *dst -= factor * src;
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for k in (row + 1)..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Inverse of a small square matrix, column by column.
pub fn inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(solve(a, &e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}
