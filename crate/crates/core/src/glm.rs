//! Penalized logistic regression with inference outputs.
//!
//! The fitted objective is
//!
//! ```text
//! NLL(β)/n + (l2/2)·Σ_P β_j² + l1·Σ_P |β_j|
//! ```
//!
//! over the penalized columns P. The smooth part is minimized by damped
//! Newton steps; an l1 part turns each step into a proximal Newton step
//! solved by coordinate descent.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("labels must be 0 or 1")]
    BadLabel,
    #[error("only one class present")]
    OneClassOnly,
    #[error("empty grid")]
    EmptyGrid,
}

fn check(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), GlmError> {
    if x.ncols() != beta.len() {
        return Err(GlmError::DimensionMismatch(format!("{} columns vs {} coefficients", x.ncols(), beta.len())));
    }
    if x.nrows() != y.len() {
        return Err(GlmError::DimensionMismatch(format!("{} rows vs {} labels", x.nrows(), y.len())));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(GlmError::BadLabel);
    }
    Ok(())
}

/// log(1 + e^η) without overflow.
pub fn log1pexp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn nll_unchecked(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(&e, &yi)| log1pexp(e) - yi * e).sum()
}

fn gradient_unchecked(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let eta = x * beta;
    let r = DVector::from_iterator(y.len(), eta.iter().zip(y.iter()).map(|(&e, &yi)| sigmoid(e) - yi));
    x.tr_mul(&r)
}

fn hessian_unchecked(beta: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let eta = x * beta;
    let mut wx = x.clone();
    for (i, &e) in eta.iter().enumerate() {
        let p = sigmoid(e);
        let w = p * (1.0 - p);
        wx.row_mut(i).scale_mut(w);
    }
    x.tr_mul(&wx)
}

/// Bernoulli-logit negative log-likelihood, summed over rows.
pub fn negative_log_likelihood(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64, GlmError> {
    check(beta, x, y)?;
    Ok(nll_unchecked(beta, x, y))
}

/// Xᵀ(σ(Xβ) − y).
pub fn gradient(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, GlmError> {
    check(beta, x, y)?;
    Ok(gradient_unchecked(beta, x, y))
}

/// XᵀWX with W = diag(p(1 − p)).
pub fn hessian(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>, GlmError> {
    check(beta, x, y)?;
    Ok(hessian_unchecked(beta, x))
}

pub fn predict_proba(beta: &DVector<f64>, x: &DMatrix<f64>) -> DVector<f64> {
    (x * beta).map(sigmoid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySpec {
    pub l2_weight: f64,
    pub l1_weight: f64,
    pub penalize_intercept: bool,
    pub penalize_fixed_effects: bool,
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec { l2_weight: 0.01, l1_weight: 0.0, penalize_intercept: false, penalize_fixed_effects: true }
    }
}

impl PenaltySpec {
    pub fn none() -> Self {
        PenaltySpec { l2_weight: 0.0, l1_weight: 0.0, ..Default::default() }
    }

    pub fn l2(weight: f64) -> Self {
        PenaltySpec { l2_weight: weight, ..Default::default() }
    }

    /// Per-column penalty indicator given which columns are the intercept and
    /// which are fixed-effect levels.
    pub fn mask(&self, is_intercept: &[bool], is_fixed_effect: &[bool]) -> Vec<bool> {
        is_intercept
            .iter()
            .zip(is_fixed_effect)
            .map(|(&i, &fe)| {
                if i {
                    self.penalize_intercept
                } else if fe {
                    self.penalize_fixed_effects
                } else {
                    true
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Bound on the gradient norm of the scaled objective.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-8, max_iter: 200 }
    }
}

/// A penalized logistic objective over fixed data.
pub struct Objective<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub l2: f64,
    pub l1: f64,
    pub mask: &'a [bool],
}

impl Objective<'_> {
    fn n(&self) -> f64 {
        self.x.nrows() as f64
    }

    fn smooth(&self, beta: &DVector<f64>) -> f64 {
        let pen: f64 = beta.iter().zip(self.mask).filter(|(_, &m)| m).map(|(b, _)| b * b).sum();
        nll_unchecked(beta, self.x, self.y) / self.n() + 0.5 * self.l2 * pen
    }

    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        let l1: f64 = beta.iter().zip(self.mask).filter(|(_, &m)| m).map(|(b, _)| b.abs()).sum();
        self.smooth(beta) + self.l1 * l1
    }

    fn smooth_gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut g = gradient_unchecked(beta, self.x, self.y) / self.n();
        for (j, &m) in self.mask.iter().enumerate() {
            if m {
                g[j] += self.l2 * beta[j];
            }
        }
        g
    }

    fn smooth_hessian(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let mut h = hessian_unchecked(beta, self.x) / self.n();
        for (j, &m) in self.mask.iter().enumerate() {
            if m {
                h[(j, j)] += self.l2;
            }
        }
        h
    }

    /// Minimum-norm subgradient; equals the gradient when l1 = 0.
    pub fn optimality_gap(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut g = self.smooth_gradient(beta);
        if self.l1 > 0.0 {
            for (j, &m) in self.mask.iter().enumerate() {
                if !m {
                    continue;
                }
                g[j] = if beta[j] > 0.0 {
                    g[j] + self.l1
                } else if beta[j] < 0.0 {
                    g[j] - self.l1
                } else {
                    soft_threshold(g[j], self.l1)
                };
            }
        }
        g
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Solves H d = −g, adding a small ridge if H is not numerically positive
/// definite.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let mut ridge = 0.0;
    let scale = h.diagonal().amax().max(1e-300);
    for _ in 0..20 {
        let mut hr = h.clone();
        for j in 0..hr.nrows() {
            hr[(j, j)] += ridge;
        }
        if let Some(ch) = hr.cholesky() {
            return -ch.solve(g);
        }
        ridge = if ridge == 0.0 { scale * 1e-12 } else { ridge * 10.0 };
    }
    -g.clone()
}

/// Minimizes the quadratic model gᵀd + ½dᵀHd + l1·Σ_P|β_j + d_j| by cyclic
/// coordinate descent.
fn proximal_direction(h: &DMatrix<f64>, g: &DVector<f64>, beta: &DVector<f64>, l1: f64, mask: &[bool]) -> DVector<f64> {
    let p = beta.len();
    let mut d: DVector<f64> = DVector::zeros(p);
    // Hd maintained incrementally.
    let mut hd: DVector<f64> = DVector::zeros(p);
    for _ in 0..500 {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let hjj = h[(j, j)];
            if hjj <= 0.0 {
                continue;
            }
            let grad_j = g[j] + hd[j] - hjj * d[j];
            let new = if mask[j] {
                let z = beta[j] - grad_j / hjj;
                soft_threshold(z, l1 / hjj) - beta[j]
            } else {
                -grad_j / hjj
            };
            let delta = new - d[j];
            if delta != 0.0 {
                hd += h.column(j) * delta;
                d[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < 1e-14 {
            break;
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Final value of the scaled penalized objective.
    pub objective: f64,
    /// Objective after each iteration, starting with β = 0.
    pub objective_history: Vec<f64>,
    pub gradient_norm: f64,
    pub penalty: PenaltySpec,
    pub mask: Vec<bool>,
}

impl FitResult {
    pub fn beta_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta)
    }
}

/// Fits from β = 0. `mask[j]` says whether column j is penalized.
pub fn fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    mask: &[bool],
    opts: &FitOptions,
) -> Result<FitResult, GlmError> {
    fit_from(x, y, penalty, mask, opts, DVector::zeros(x.ncols()))
}

pub fn fit_from(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    mask: &[bool],
    opts: &FitOptions,
    start: DVector<f64>,
) -> Result<FitResult, GlmError> {
    check(&start, x, y)?;
    if mask.len() != x.ncols() {
        return Err(GlmError::DimensionMismatch(format!("mask has {} entries for {} columns", mask.len(), x.ncols())));
    }
    let obj = Objective { x, y, l2: penalty.l2_weight, l1: penalty.l1_weight, mask };
    let mut beta = start;
    let mut value = obj.value(&beta);
    let mut history = vec![value];
    let mut gap = obj.optimality_gap(&beta).norm();
    let mut iterations = 0;
    while gap > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let g = obj.smooth_gradient(&beta);
        let h = obj.smooth_hessian(&beta);
        let d = if obj.l1 > 0.0 { proximal_direction(&h, &g, &beta, obj.l1, mask) } else { newton_direction(&h, &g) };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &beta + &d * step;
            let v = obj.value(&candidate);
            if v <= value {
                accepted = Some((candidate, v));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, v)) = accepted else { break };
        let stalled = candidate == beta;
        beta = candidate;
        value = v;
        history.push(value);
        gap = obj.optimality_gap(&beta).norm();
        if stalled {
            break;
        }
    }
    Ok(FitResult {
        beta: beta.iter().copied().collect(),
        converged: gap <= opts.tol,
        iterations,
        objective: value,
        objective_history: history,
        gradient_norm: gap,
        penalty: *penalty,
        mask: mask.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    /// Inverse of the penalized Hessian at the penalized estimate.
    PenalizedApproximate,
    /// Inverse Hessian of an unpenalized refit, started at the penalized estimate.
    RefitUnpenalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub se: Vec<f64>,
    pub method: SeMethod,
    /// The Hessian was singular; affected columns carry infinite SEs.
    pub singular: bool,
}

/// sqrt(diag((XᵀWX + l2·n·I_P)⁻¹)) at `beta`.
pub fn standard_errors_at(
    beta: &DVector<f64>,
    x: &DMatrix<f64>,
    l2: f64,
    mask: &[bool],
    method: SeMethod,
) -> StandardErrors {
    let n = x.nrows() as f64;
    let mut h = hessian_unchecked(beta, x);
    for (j, &m) in mask.iter().enumerate() {
        if m {
            h[(j, j)] += l2 * n;
        }
    }
    let eig = SymmetricEigen::new(h);
    let max_ev = eig.eigenvalues.amax();
    let cutoff = max_ev * 1e-12;
    let p = beta.len();
    let mut var = vec![0.0; p];
    let mut null_cols = vec![false; p];
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if ev <= cutoff || ev <= 0.0 {
            for j in 0..p {
                if v[j].abs() > 1e-6 {
                    null_cols[j] = true;
                }
            }
        } else {
            for j in 0..p {
                var[j] += v[j] * v[j] / ev;
            }
        }
    }
    let singular = null_cols.iter().any(|&c| c);
    let se = var.iter().zip(&null_cols).map(|(&v, &null)| if null { f64::INFINITY } else { v.sqrt() }).collect();
    StandardErrors { se, method, singular }
}

pub fn standard_errors(
    fit: &FitResult,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    method: SeMethod,
    opts: &FitOptions,
) -> Result<(Vec<f64>, StandardErrors), GlmError> {
    let beta = fit.beta_vector();
    check(&beta, x, y)?;
    match method {
        SeMethod::PenalizedApproximate => {
            Ok((fit.beta.clone(), standard_errors_at(&beta, x, fit.penalty.l2_weight, &fit.mask, method)))
        }
        SeMethod::RefitUnpenalized => {
            let refit = fit_from(x, y, &PenaltySpec::none(), &fit.mask, opts, beta)?;
            let b = refit.beta_vector();
            Ok((refit.beta, standard_errors_at(&b, x, 0.0, &fit.mask, method)))
        }
    }
}

/// Holm step-down adjustment. Returned values line up with the input.
pub fn holm_correction(pvalues: &[f64]) -> Vec<f64> {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let adj = ((m - rank) as f64 * pvalues[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    out
}

/// Two-sided normal p-value for a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { 1.0 } else { 0.0 };
    }
    let normal = Normal::standard();
    (2.0 * normal.sf(z.abs())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevianceReport {
    pub model_deviance: f64,
    pub null_deviance: f64,
    pub lr_statistic: f64,
    pub df: usize,
    pub lr_pvalue: f64,
}

/// Deviance of the fitted model against the intercept-only MLE.
pub fn deviance_report(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DevianceReport, GlmError> {
    let model_deviance = 2.0 * negative_log_likelihood(beta, x, y)?;
    let n = y.len() as f64;
    let k = y.sum();
    let null_deviance = if k == 0.0 || k == n {
        0.0
    } else {
        let p = k / n;
        -2.0 * (k * p.ln() + (n - k) * (1.0 - p).ln())
    };
    let df = x.ncols().saturating_sub(1);
    let lr_statistic = (null_deviance - model_deviance).max(0.0);
    let lr_pvalue =
        if df == 0 { 1.0 } else { ChiSquared::new(df as f64).map(|c| c.sf(lr_statistic)).unwrap_or(f64::NAN) };
    Ok(DevianceReport { model_deviance, null_deviance, lr_statistic, df, lr_pvalue })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedAccuracy {
    pub mean: f64,
    pub sd: f64,
    pub runs: Vec<f64>,
}

/// Accuracy at threshold 0.5 on class-balanced subsamples: each run keeps
/// the minority class and an equal-size random draw from the majority.
/// `sd` is the sample standard deviation across runs.
pub fn balanced_accuracy(
    beta: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    runs: usize,
    seed: u64,
) -> Result<BalancedAccuracy, GlmError> {
    check(beta, x, y)?;
    let probs = predict_proba(beta, x);
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1.0).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(GlmError::OneClassOnly);
    }
    let (minority, majority) = if pos.len() <= neg.len() { (&pos, &neg) } else { (&neg, &pos) };
    let correct = |i: usize| f64::from(u8::from((probs[i] >= 0.5) == (y[i] == 1.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let minority_hits: f64 = minority.iter().map(|&i| correct(i)).sum();
    let k = minority.len();
    let accs: Vec<f64> = (0..runs)
        .map(|_| {
            let drawn: f64 = sample(&mut rng, majority.len(), k).iter().map(|j| correct(majority[j])).sum();
            (minority_hits + drawn) / (2 * k) as f64
        })
        .collect();
    let mean = accs.iter().sum::<f64>() / runs as f64;
    let sd =
        if runs > 1 { (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt() } else { 0.0 };
    Ok(BalancedAccuracy { mean, sd, runs: accs })
}

/// Picks the l2 weight with the best held-out log-likelihood on a seeded
/// train/test split. Ties go to the smaller weight.
pub fn grid_search_l2(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &[f64],
    split: f64,
    seed: u64,
    mask: &[bool],
    opts: &FitOptions,
) -> Result<f64, GlmError> {
    if grid.is_empty() {
        return Err(GlmError::EmptyGrid);
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() == 1 {
        return Ok(sorted[0]);
    }
    let n = y.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * split).round().clamp(1.0, (n - 1) as f64) as usize;
    let (train, test) = idx.split_at(n_train);
    let xtr = x.select_rows(train);
    let ytr = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
    let xte = x.select_rows(test);
    let yte = DVector::from_iterator(test.len(), test.iter().map(|&i| y[i]));
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &l2 in &sorted {
        let f = fit(&xtr, &ytr, &PenaltySpec::l2(l2), mask, opts)?;
        let ll = -nll_unchecked(&f.beta_vector(), &xte, &yte);
        if ll > best.0 {
            best = (ll, l2);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Intercept and substantive predictors.
    Main,
    FixedEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    /// Holm-adjusted within the coefficient's family.
    pub p_adjusted: f64,
    pub family: Family,
}

impl Coefficient {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_adjusted < alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub penalty: PenaltySpec,
    pub se_method: SeMethod,
    pub accuracy_runs: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            penalty: PenaltySpec::default(),
            se_method: SeMethod::PenalizedApproximate,
            accuracy_runs: 10,
            seed: 0,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub n_rows: usize,
    pub n_positive: usize,
    pub coefficients: Vec<Coefficient>,
    pub se_method: SeMethod,
    pub singular_hessian: bool,
    pub correction: String,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective: f64,
    pub penalty: PenaltySpec,
    pub deviance: DevianceReport,
    /// Absent when only one class is present.
    pub accuracy: Option<BalancedAccuracy>,
}

impl ModelReport {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Fits and assembles estimates, SEs, Holm-adjusted p-values, deviance and
/// balanced accuracy. Column 0 must be the intercept.
pub fn analyze(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    is_fixed_effect: &[bool],
    cfg: &InferenceConfig,
) -> Result<ModelReport, GlmError> {
    let p = x.ncols();
    if names.len() != p || is_fixed_effect.len() != p {
        return Err(GlmError::DimensionMismatch("column metadata".into()));
    }
    let is_intercept: Vec<bool> = (0..p).map(|j| j == 0).collect();
    let mask = cfg.penalty.mask(&is_intercept, is_fixed_effect);
    let opts = FitOptions { tol: cfg.tol, max_iter: cfg.max_iter };
    let fitted = fit(x, y, &cfg.penalty, &mask, &opts)?;
    let (estimates, ses) = standard_errors(&fitted, x, y, cfg.se_method, &opts)?;
    let z: Vec<f64> =
        estimates.iter().zip(&ses.se).map(|(b, s)| if s.is_finite() && *s > 0.0 { b / s } else { 0.0 }).collect();
    let raw: Vec<f64> = z.iter().zip(&ses.se).map(|(&z, s)| if s.is_finite() { two_sided_p(z) } else { 1.0 }).collect();
    let mut adjusted = vec![1.0; p];
    for family in [false, true] {
        let members: Vec<usize> = (0..p).filter(|&j| is_fixed_effect[j] == family).collect();
        let adj = holm_correction(&members.iter().map(|&j| raw[j]).collect::<Vec<_>>());
        for (k, &j) in members.iter().enumerate() {
            adjusted[j] = adj[k];
        }
    }
    let coefficients = (0..p)
        .map(|j| Coefficient {
            name: names[j].clone(),
            estimate: estimates[j],
            se: ses.se[j],
            z: z[j],
            p_value: raw[j],
            p_adjusted: adjusted[j],
            family: if is_fixed_effect[j] { Family::FixedEffect } else { Family::Main },
        })
        .collect();
    let beta = DVector::from_column_slice(&estimates);
    let deviance = deviance_report(&beta, x, y)?;
    let accuracy = match balanced_accuracy(&beta, x, y, cfg.accuracy_runs, cfg.seed) {
        Ok(a) => Some(a),
        Err(GlmError::OneClassOnly) => None,
        Err(e) => return Err(e),
    };
    Ok(ModelReport {
        n_rows: y.len(),
        n_positive: y.iter().filter(|&&v| v == 1.0).count(),
        coefficients,
        se_method: ses.method,
        singular_hessian: ses.singular,
        correction: "holm".into(),
        converged: fitted.converged,
        iterations: fitted.iterations,
        gradient_norm: fitted.gradient_norm,
        objective: fitted.objective,
        penalty: cfg.penalty,
        deviance,
        accuracy,
    })
}
