//! Weighted least squares through centered normal equations.
//!
//! The intercept is handled by weighted centering, so the Cholesky solve only
//! sees the slope block. That keeps the system well conditioned when a
//! regressor has a large mean relative to its spread.

use crate::error::{Error, Result};

/// Pivot below this fraction of the original diagonal marks collinearity.
const PIVOT_TOL: f64 = 1e-10;
/// Centered column energy below this fraction of its raw energy marks a constant column.
const CONSTANT_COLUMN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution {
    /// Intercept first, then one slope per regressor.
    pub coefficients: Vec<f64>,
    /// Sum of weighted squared residuals.
    pub weighted_rss: f64,
    pub weight_sum: f64,
}

impl WlsSolution {
    pub fn predict(&self, regressors: &[f64]) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(regressors)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

/// Solves `min sum_s w_s (y_s - b0 - b . x_s)^2`.
///
/// `regressors(s, buf)` writes the `n_regressors` non-intercept regressors of
/// row `s` into `buf`. `weights = None` means unit weights.
pub fn weighted_least_squares<F>(
    n_rows: usize,
    n_regressors: usize,
    response: impl Fn(usize) -> f64,
    regressors: F,
    weights: Option<&[f64]>,
) -> Result<WlsSolution>
where
    F: Fn(usize, &mut [f64]),
{
    let p = n_regressors;
    let w = |s: usize| weights.map_or(1.0, |w| w[s]);
    let mut buf = vec![0.0; p];

    let mut wsum = 0.0;
    let mut ybar = 0.0;
    let mut xbar = vec![0.0; p];
    for s in 0..n_rows {
        let ws = w(s);
        if ws == 0.0 {
            continue;
        }
        regressors(s, &mut buf);
        wsum += ws;
        ybar += ws * response(s);
        for (m, x) in xbar.iter_mut().zip(&buf) {
            *m += ws * x;
        }
    }
    if !(wsum > 0.0) {
        return Err(Error::RankDeficientDesign);
    }
    ybar /= wsum;
    for m in &mut xbar {
        *m /= wsum;
    }

    let mut slopes = vec![0.0; p];
    if p > 0 {
        // Packed lower triangle of the centered Gram matrix.
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        let mut raw = vec![0.0; p];
        for s in 0..n_rows {
            let ws = w(s);
            if ws == 0.0 {
                continue;
            }
            regressors(s, &mut buf);
            let yc = response(s) - ybar;
            for j in 0..p {
                let xj = buf[j] - xbar[j];
                raw[j] += ws * buf[j] * buf[j];
                rhs[j] += ws * xj * yc;
                for l in 0..=j {
                    gram[j * p + l] += ws * xj * (buf[l] - xbar[l]);
                }
            }
        }
        for j in 0..p {
            let g = gram[j * p + j];
            if !(g > CONSTANT_COLUMN_TOL * raw[j]) || g <= 0.0 {
                return Err(Error::RankDeficientDesign);
            }
        }
        let chol = cholesky(&gram, p)?;
        slopes = cholesky_solve(&chol, p, &rhs);
    }

    let intercept = ybar - slopes.iter().zip(&xbar).map(|(b, m)| b * m).sum::<f64>();
    let mut coefficients = Vec::with_capacity(p + 1);
    coefficients.push(intercept);
    coefficients.extend_from_slice(&slopes);

    let mut rss = 0.0;
    for s in 0..n_rows {
        let ws = w(s);
        if ws == 0.0 {
            continue;
        }
        regressors(s, &mut buf);
        let fitted = intercept + slopes.iter().zip(&buf).map(|(b, x)| b * x).sum::<f64>();
        let r = response(s) - fitted;
        rss += ws * r * r;
    }

    Ok(WlsSolution {
        coefficients,
        weighted_rss: rss,
        weight_sum: wsum,
    })
}

/// Weighted least squares from accumulated raw moments about a fixed origin.
///
/// With regressors `x` (length `p`) and response `y` already shifted near
/// their means, `stats` holds, in order: `sum w`, `sum w x` (p), `sum w y`,
/// `sum w x x'` (p x p, lower triangle used), `sum w x y` (p), `sum w y^2`.
/// Returns coefficients in the shifted coordinates (intercept first) and the
/// weighted residual sum of squares.
pub fn solve_from_moments(stats: &[f64], p: usize) -> Result<(Vec<f64>, f64)> {
    let w = stats[0];
    if !(w > 0.0) {
        return Err(Error::RankDeficientDesign);
    }
    let sx = &stats[1..1 + p];
    let sy = stats[1 + p];
    let sxx = &stats[2 + p..2 + p + p * p];
    let sxy = &stats[2 + p + p * p..2 + 2 * p + p * p];
    let syy = stats[2 + 2 * p + p * p];

    let my = sy / w;
    let cyy = syy - w * my * my;
    if p == 0 {
        return Ok((vec![my], cyy.max(0.0)));
    }
    let mx: Vec<f64> = sx.iter().map(|v| v / w).collect();
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for j in 0..p {
        rhs[j] = sxy[j] - w * mx[j] * my;
        for l in 0..=j {
            gram[j * p + l] = sxx[j * p + l] - w * mx[j] * mx[l];
        }
        let g = gram[j * p + j];
        if !(g > CONSTANT_COLUMN_TOL * sxx[j * p + j]) || g <= 0.0 {
            return Err(Error::RankDeficientDesign);
        }
    }
    let chol = cholesky(&gram, p)?;
    let slopes = cholesky_solve(&chol, p, &rhs);
    let explained: f64 = slopes.iter().zip(&rhs).map(|(b, c)| b * c).sum();
    let intercept = my - slopes.iter().zip(&mx).map(|(b, m)| b * m).sum::<f64>();
    let mut coef = Vec::with_capacity(p + 1);
    coef.push(intercept);
    coef.extend_from_slice(&slopes);
    Ok((coef, (cyy - explained).max(0.0)))
}

/// Lower Cholesky factor of a symmetric matrix given by its lower triangle
/// (row-major, `a[j * n + l]` for `l <= j`).
fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > PIVOT_TOL * a[j * n + j]) {
            return Err(Error::RankDeficientDesign);
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[k * n + i] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    z
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
/// Test oracle for the normal-equation path above.
#[cfg(test)]
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
