//! Conditional-independence growth mixture models.
//!
//! Given membership in component k, the outcomes at the modelled time points
//! are independent Gaussians, each a linear regression on that time point's
//! covariates (or a plain mean when covariates are off or absent). Fitting is
//! EM from a hard k-means start; the number of components is chosen by BIC in
//! the form `-loglik + nu * ln(S)`, smaller is better.

use serde::{Deserialize, Serialize};

use crate::dataset::{LongitudinalDataset, TimepointSet};
use crate::error::{Error, Result};
use crate::init::{kmeans_init, InitAssignment, DEFAULT_RESTARTS};
use crate::lstsq::solve_from_moments;
use crate::seed;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Component variances are floored at this fraction of the total outcome
/// variance at the time point.
pub const VARIANCE_FLOOR_FRACTION: f64 = 1e-8;

/// Two k values whose BICs differ by less than this are tied; the smaller k wins.
pub const BIC_TIE_TOLERANCE: f64 = 1e-9;

/// Inclusive range of component counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRange {
    pub min: usize,
    pub max: usize,
}

impl KRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::InvalidConfig(format!("invalid k range {min}..={max}")));
        }
        Ok(Self { min, max })
    }

    pub fn single(k: usize) -> Result<Self> {
        Self::new(k, k)
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }
}

impl Default for KRange {
    fn default() -> Self {
        Self { min: 1, max: 6 }
    }
}

/// Settings shared by every mixture fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Relative log-likelihood change that stops EM.
    pub em_tol: f64,
    pub em_max_iter: usize,
    /// k-means restarts per initialization.
    pub n_restarts: usize,
    /// Regress each outcome on its time point's covariates.
    pub use_covariates: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            em_tol: 1e-6,
            em_max_iter: 1000,
            n_restarts: DEFAULT_RESTARTS,
            use_covariates: false,
        }
    }
}

/// Regression parameters of one component at one time point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    /// Intercept first, then one slope per covariate.
    pub coefficients: Vec<f64>,
    pub variance: f64,
}

impl ComponentParams {
    #[inline]
    pub fn mean(&self, covariates: &[f64]) -> f64 {
        let mut m = self.coefficients[0];
        for (b, x) in self.coefficients[1..].iter().zip(covariates) {
            m += b * x;
        }
        m
    }
}

/// A fitted (or hand-set) mixture over the time points in `subset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub subset: TimepointSet,
    pub use_covariates: bool,
    /// `params[i][k]` belongs to time point `subset.indices()[i]`, component k.
    pub params: Vec<Vec<ComponentParams>>,
}

impl GmmModel {
    /// Checks shapes, the weight simplex, and positive variances.
    pub fn new(
        weights: Vec<f64>,
        subset: TimepointSet,
        use_covariates: bool,
        params: Vec<Vec<ComponentParams>>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidConfig("model needs at least one component".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("weights {weights:?} are not on the simplex")));
        }
        if params.len() != subset.len() || params.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidConfig("parameter grid does not match subset x k".into()));
        }
        if params.iter().flatten().any(|c| !(c.variance > 0.0) || c.coefficients.is_empty()) {
            return Err(Error::InvalidConfig("variances must be positive".into()));
        }
        Ok(Self {
            weights,
            subset,
            use_covariates,
            params,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Free parameters: K-1 weights plus, per time point and component,
    /// the regression coefficients and one variance.
    pub fn n_params(&self) -> usize {
        let per_component: usize = self.params.iter().map(|row| row[0].coefficients.len() + 1).sum();
        self.k() - 1 + self.k() * per_component
    }

    /// Checks that every time point's coefficient count matches the data.
    fn check_against(&self, dataset: &LongitudinalDataset) -> Result<()> {
        for (i, n) in self.subset.iter().enumerate() {
            if n >= dataset.n_timepoints() {
                return Err(Error::InvalidConfig(format!("time point {n} outside dataset")));
            }
            let p = effective_covariates(dataset, n, self.use_covariates);
            if self.params[i].iter().any(|c| c.coefficients.len() != p + 1) {
                return Err(Error::InvalidConfig(format!(
                    "time point {n} expects {} coefficients",
                    p + 1
                )));
            }
        }
        Ok(())
    }

    /// Copy with components reordered: new component j is old component `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            weights: perm.iter().map(|&j| self.weights[j]).collect(),
            subset: self.subset.clone(),
            use_covariates: self.use_covariates,
            params: self
                .params
                .iter()
                .map(|row| perm.iter().map(|&j| row[j].clone()).collect())
                .collect(),
        }
    }
}

/// Number of covariates a model uses at time point `n`.
#[inline]
pub fn effective_covariates(dataset: &LongitudinalDataset, n: usize, use_covariates: bool) -> usize {
    if use_covariates {
        dataset.covariate_count(n)
    } else {
        0
    }
}

#[inline]
fn covariates_for<'a>(dataset: &'a LongitudinalDataset, s: usize, n: usize, use_covariates: bool) -> &'a [f64] {
    if use_covariates {
        dataset.covariates(s, n)
    } else {
        &[]
    }
}

/// Row-stochastic S x K matrix of membership probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posteriors {
    n_components: usize,
    values: Vec<f64>,
}

impl Posteriors {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidConfig("ragged posterior rows".into()));
        }
        Ok(Self {
            n_components: k,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    /// One-hot rows from hard labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        let mut values = vec![0.0; labels.len() * k];
        for (s, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidConfig(format!("label {l} out of range for k={k}")));
            }
            values[s * k + l] = 1.0;
        }
        Ok(Self { n_components: k, values })
    }

    pub fn n_rows(&self) -> usize {
        if self.n_components == 0 {
            0
        } else {
            self.values.len() / self.n_components
        }
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_components..(s + 1) * self.n_components]
    }

    pub fn get(&self, s: usize, k: usize) -> f64 {
        self.values[s * self.n_components + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_components.max(1))
    }

    /// Column `k` as a vector.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Outcome of one EM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: GmmModel,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub posteriors: Posteriors,
    pub map_labels: Vec<usize>,
    pub n_iterations: usize,
    pub converged: bool,
    /// Log-likelihood after the initial M-step and after every iteration.
    pub loglik_trace: Vec<f64>,
}

impl FitResult {
    pub fn k(&self) -> usize {
        self.model.k()
    }
}

/// `sum_n log phi(y_sn; beta_nk . [1, x_sn], sigma2_nk)` over the model's subset.
pub fn component_logdensity(model: &GmmModel, dataset: &LongitudinalDataset, subject: usize, component: usize) -> f64 {
    model
        .subset
        .iter()
        .zip(&model.params)
        .map(|(n, row)| {
            let c = &row[component];
            let x = covariates_for(dataset, subject, n, model.use_covariates);
            let r = dataset.outcome(subject, n) - c.mean(x);
            -0.5 * (LN_2PI + c.variance.ln()) - r * r / (2.0 * c.variance)
        })
        .sum()
}

/// Per-subject `ln pi_k + log f_k(y_s)` into `out` (row-major S x K).
fn log_joint(model: &GmmModel, dataset: &LongitudinalDataset, out: &mut [f64]) {
    let k = model.k();
    let s_count = dataset.n_subjects();
    // Per (time point, component): log normalizer and 1 / (2 sigma^2).
    let consts: Vec<(f64, f64)> = model
        .params
        .iter()
        .flatten()
        .map(|c| (-0.5 * (LN_2PI + c.variance.ln()), 0.5 / c.variance))
        .collect();
    let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();
    for s in 0..s_count {
        let row = &mut out[s * k..(s + 1) * k];
        row.copy_from_slice(&log_w);
        for (i, n) in model.subset.iter().enumerate() {
            let y = dataset.outcome(s, n);
            let x = covariates_for(dataset, s, n, model.use_covariates);
            for (j, slot) in row.iter_mut().enumerate() {
                let c = &model.params[i][j];
                let (norm, inv2v) = consts[i * k + j];
                let r = y - c.mean(x);
                *slot += norm - r * r * inv2v;
            }
        }
    }
}

/// Stable `ln sum_i exp(v_i)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-likelihood plus posteriors in one pass.
fn evaluate(model: &GmmModel, dataset: &LongitudinalDataset) -> Result<(f64, Posteriors)> {
    let k = model.k();
    let mut values = vec![0.0; dataset.n_subjects() * k];
    log_joint(model, dataset, &mut values);
    finish_posteriors(values, k)
}

/// Turns per-subject log joint densities into the log-likelihood and posteriors.
fn finish_posteriors(mut values: Vec<f64>, k: usize) -> Result<(f64, Posteriors)> {
    let mut ll = 0.0;
    for (s, row) in values.chunks_mut(k).enumerate() {
        let lse = log_sum_exp(row);
        if !lse.is_finite() {
            return Err(Error::NumericalUnderflow(s));
        }
        ll += lse;
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok((ll, Posteriors { n_components: k, values }))
}

/// Mixture log-likelihood `sum_s ln sum_k pi_k f_k(y_s)`.
pub fn loglik(model: &GmmModel, dataset: &LongitudinalDataset) -> Result<f64> {
    model.check_against(dataset)?;
    evaluate(model, dataset).map(|(ll, _)| ll)
}

/// Membership probabilities by Bayes' rule, computed in log space.
pub fn e_step(model: &GmmModel, dataset: &LongitudinalDataset) -> Result<Posteriors> {
    model.check_against(dataset)?;
    evaluate(model, dataset).map(|(_, p)| p)
}

/// Per-time-point data of one fit, shifted to near-zero means so raw
/// moments can be accumulated without cancellation. Everything is stored
/// by column so the inner loops run over subjects.
struct Design {
    n_subjects: usize,
    timepoints: Vec<DesignColumn>,
}

struct DesignColumn {
    n: usize,
    p: usize,
    y: Vec<f64>,
    /// Covariate-major: covariate `a` of subject `s` is `x[a * S + s]`.
    x: Vec<f64>,
    y_shift: f64,
    x_shift: Vec<f64>,
    floor: f64,
}

impl Design {
    fn new(dataset: &LongitudinalDataset, subset: &TimepointSet, use_covariates: bool) -> Self {
        let s_count = dataset.n_subjects();
        let timepoints = subset
            .iter()
            .map(|n| {
                let p = effective_covariates(dataset, n, use_covariates);
                let mut y = dataset.outcome_column(n);
                let y_shift = y.iter().sum::<f64>() / s_count as f64;
                let var = y.iter().map(|v| (v - y_shift).powi(2)).sum::<f64>() / s_count as f64;
                y.iter_mut().for_each(|v| *v -= y_shift);
                let mut x = vec![0.0; s_count * p];
                for s in 0..s_count {
                    for (a, v) in covariates_for(dataset, s, n, use_covariates).iter().enumerate() {
                        x[a * s_count + s] = *v;
                    }
                }
                let x_shift: Vec<f64> = x
                    .chunks(s_count.max(1))
                    .take(p)
                    .map(|c| c.iter().sum::<f64>() / s_count as f64)
                    .collect();
                for (c, m) in x.chunks_mut(s_count.max(1)).zip(&x_shift) {
                    c.iter_mut().for_each(|v| *v -= m);
                }
                DesignColumn {
                    n,
                    p,
                    y,
                    x,
                    y_shift,
                    x_shift,
                    floor: (VARIANCE_FLOOR_FRACTION * var).max(1e-300),
                }
            })
            .collect();
        Self {
            n_subjects: s_count,
            timepoints,
        }
    }
}

/// Dot product with four independent accumulators so the adds pipeline.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn sum(a: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let c = a.chunks_exact(4);
    let tail: f64 = c.remainder().iter().sum();
    for x in c {
        for l in 0..4 {
            acc[l] += x[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// [`evaluate`] over a precomputed design.
fn evaluate_design(model: &GmmModel, design: &Design) -> Result<(f64, Posteriors)> {
    let k = model.k();
    let s_count = design.n_subjects;
    // Component-major log joint densities.
    let mut by_component = vec![0.0; k * s_count];
    let mut resid = vec![0.0; s_count];
    for (col, row) in design.timepoints.iter().zip(&model.params) {
        for (j, c) in row.iter().enumerate() {
            let slopes = &c.coefficients[1..];
            let shifted = c.coefficients[0] - col.y_shift + dot(slopes, &col.x_shift);
            let norm = -0.5 * (LN_2PI + c.variance.ln());
            let inv2v = 0.5 / c.variance;
            for (r, y) in resid.iter_mut().zip(&col.y) {
                *r = y - shifted;
            }
            for (b, xa) in slopes.iter().zip(col.x.chunks(s_count)) {
                for (r, v) in resid.iter_mut().zip(xa) {
                    *r -= b * v;
                }
            }
            for (acc, r) in by_component[j * s_count..(j + 1) * s_count].iter_mut().zip(&resid) {
                *acc += norm - r * r * inv2v;
            }
        }
    }
    let mut values = vec![0.0; s_count * k];
    for (j, w) in model.weights.iter().enumerate() {
        let log_w = w.ln();
        for (s, v) in by_component[j * s_count..(j + 1) * s_count].iter().enumerate() {
            values[s * k + j] = log_w + v;
        }
    }
    finish_posteriors(values, k)
}

/// M-step that also reports which (time point, component) variances hit the floor.
fn m_step_design(design: &Design, subset: &TimepointSet, posteriors: &Posteriors, use_covariates: bool) -> Result<(GmmModel, Vec<bool>)> {
    let s_count = design.n_subjects;
    let k = posteriors.n_components();
    if posteriors.n_rows() != s_count {
        return Err(Error::LengthMismatch {
            left: posteriors.n_rows(),
            right: s_count,
        });
    }
    if design.timepoints.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut columns = vec![0.0; k * s_count];
    for (s, row) in posteriors.rows().enumerate() {
        for (j, w) in row.iter().enumerate() {
            columns[j * s_count + s] = *w;
        }
    }
    let sizes: Vec<f64> = columns.chunks(s_count).map(sum).collect();
    let total: f64 = sizes.iter().sum();
    let weights: Vec<f64> = sizes.iter().map(|m| m / total).collect();

    let mut params = Vec::with_capacity(design.timepoints.len());
    let mut floored = Vec::with_capacity(design.timepoints.len() * k);
    let mut wy = vec![0.0; s_count];
    let mut wx = vec![0.0; s_count];
    for col in &design.timepoints {
        let (n, p) = (col.n, col.p);
        if let Some(j) = sizes.iter().position(|&m| m < (p + 2) as f64) {
            return Err(Error::DegenerateComponent {
                component: j,
                timepoint: n,
                reason: "effective size below parameter count",
            });
        }
        let xs: Vec<&[f64]> = col.x.chunks(s_count).take(p).collect();
        let mut row = Vec::with_capacity(k);
        // Layout: w, wx (p), wy, wxx (p x p), wxy (p), wyy.
        let mut stats = vec![0.0; 3 + 2 * p + p * p];
        for j in 0..k {
            let w = &columns[j * s_count..(j + 1) * s_count];
            stats.iter_mut().for_each(|v| *v = 0.0);
            stats[0] = sizes[j];
            for ((o, wi), y) in wy.iter_mut().zip(w).zip(&col.y) {
                *o = wi * y;
            }
            stats[1 + p] = sum(&wy);
            stats[2 + 2 * p + p * p] = dot(&wy, &col.y);
            for a in 0..p {
                for ((o, wi), v) in wx.iter_mut().zip(w).zip(xs[a]) {
                    *o = wi * v;
                }
                stats[1 + a] = sum(&wx);
                stats[2 + p + p * p + a] = dot(&wx, &col.y);
                for b in 0..=a {
                    stats[2 + p + a * p + b] = dot(&wx, xs[b]);
                }
            }
            let (mut coef, rss) = solve_from_moments(&stats, p).map_err(|_| Error::DegenerateComponent {
                component: j,
                timepoint: n,
                reason: "rank-deficient weighted design",
            })?;
            // Back to the original coordinates.
            coef[0] += col.y_shift - dot(&coef[1..], &col.x_shift);
            let raw = rss / sizes[j];
            floored.push(!(raw >= col.floor));
            row.push(ComponentParams {
                coefficients: coef,
                variance: raw.max(col.floor),
            });
        }
        params.push(row);
    }
    let model = GmmModel {
        weights,
        subset: subset.clone(),
        use_covariates,
        params,
    };
    Ok((model, floored))
}

/// Weighted maximum-likelihood update of weights, coefficients, and variances.
pub fn m_step(
    dataset: &LongitudinalDataset,
    subset: &TimepointSet,
    posteriors: &Posteriors,
    use_covariates: bool,
) -> Result<GmmModel> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let design = Design::new(dataset, subset, use_covariates);
    m_step_design(&design, subset, posteriors, use_covariates).map(|(m, _)| m)
}

pub fn bic_of(loglik: f64, n_params: usize, n_subjects: usize) -> f64 {
    -loglik + n_params as f64 * (n_subjects as f64).ln()
}

/// Per-row argmax; ties go to the lowest component index.
pub fn map_assign(posteriors: &Posteriors) -> Vec<usize> {
    posteriors
        .rows()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// EM from the hard partition in `init`.
pub fn fit_em(
    dataset: &LongitudinalDataset,
    subset: &TimepointSet,
    k: usize,
    init: &InitAssignment,
    config: &FitConfig,
) -> Result<FitResult> {
    if init.labels.len() != dataset.n_subjects() {
        return Err(Error::LengthMismatch {
            left: init.labels.len(),
            right: dataset.n_subjects(),
        });
    }
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let design = Design::new(dataset, subset, config.use_covariates);
    let hard = Posteriors::from_labels(&init.labels, k)?;
    let (mut model, mut prev_floor) = m_step_design(&design, subset, &hard, config.use_covariates)?;
    let (mut ll, mut post) = evaluate_design(&model, &design)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.em_max_iter {
        iterations += 1;
        let (next, floor) = m_step_design(&design, subset, &post, config.use_covariates)?;
        if let Some(idx) = floor.iter().zip(&prev_floor).position(|(a, b)| *a && *b) {
            return Err(Error::DegenerateComponent {
                component: idx % k,
                timepoint: subset.indices()[idx / k],
                reason: "variance pinned at the floor",
            });
        }
        prev_floor = floor;
        let (next_ll, next_post) = evaluate_design(&next, &design)?;
        trace.push(next_ll);
        model = next;
        post = next_post;
        let change = (next_ll - ll).abs();
        ll = next_ll;
        if change <= config.em_tol * trace[trace.len() - 2].abs() {
            converged = true;
            break;
        }
    }

    let n_params = model.n_params();
    let map_labels = map_assign(&post);
    Ok(FitResult {
        bic: bic_of(ll, n_params, dataset.n_subjects()),
        model,
        loglik: ll,
        n_params,
        posteriors: post,
        map_labels,
        n_iterations: iterations,
        converged,
        loglik_trace: trace,
    })
}

/// BIC outcome for one k inside [`select_k_scored`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    /// `None` when the fit failed.
    pub bic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Seed used for the k-means start of a (subset, k) fit.
pub fn fit_seed(master: u64, subset: &TimepointSet, k: usize) -> u64 {
    let mut parts: Vec<u64> = vec![seed::tag("select_k"), k as u64, subset.len() as u64];
    parts.extend(subset.iter().map(|n| n as u64));
    seed::child_seed(master, &parts)
}

/// k-means start plus EM at a single k.
pub fn fit_k(
    dataset: &LongitudinalDataset,
    subset: &TimepointSet,
    k: usize,
    config: &FitConfig,
    seed: u64,
) -> Result<FitResult> {
    let init = kmeans_init(dataset, subset, k, config.n_restarts, fit_seed(seed, subset, k))?;
    fit_em(dataset, subset, k, &init, config)
}

/// Fits every k in `k_range` and keeps the lowest BIC; failed fits are skipped.
pub fn select_k(
    dataset: &LongitudinalDataset,
    subset: &TimepointSet,
    k_range: KRange,
    config: &FitConfig,
    seed: u64,
) -> Result<FitResult> {
    select_k_scored(dataset, subset, k_range, config, seed).map(|(fit, _)| fit)
}

/// [`select_k`] that also returns the BIC of every k tried.
pub fn select_k_scored(
    dataset: &LongitudinalDataset,
    subset: &TimepointSet,
    k_range: KRange,
    config: &FitConfig,
    seed: u64,
) -> Result<(FitResult, Vec<KScore>)> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut best: Option<FitResult> = None;
    let mut scores = Vec::new();
    for k in k_range.iter() {
        match fit_k(dataset, subset, k, config, seed) {
            Ok(fit) => {
                scores.push(KScore {
                    k,
                    bic: Some(fit.bic),
                    failure: None,
                });
                // Ascending k, so a tie keeps the earlier (smaller) k.
                if best.as_ref().map_or(true, |b| fit.bic < b.bic - BIC_TIE_TOLERANCE) {
                    best = Some(fit);
                }
            }
            Err(e) => scores.push(KScore {
                k,
                bic: None,
                failure: Some(e.to_string()),
            }),
        }
    }
    best.map(|b| (b, scores)).ok_or(Error::AllFitsFailed {
        min: k_range.min,
        max: k_range.max,
    })
}
