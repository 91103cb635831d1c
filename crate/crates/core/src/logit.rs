//! Binary logistic regression fitted by damped Newton-Raphson (IRLS), with
//! Wald inference, odds ratios and McFadden's pseudo-R².

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::event_model::EncodedMatrix;
use crate::synth::sigmoid;

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitOptions {
    /// L2 penalty on the slopes (the intercept is never penalized).
    pub ridge: f64,
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the penalized gradient.
    pub tolerance: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        Self { ridge: 1e-8, max_iter: 100, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub odds_ratio: f64,
}

impl Term {
    fn new(name: String, coefficient: f64, std_error: f64) -> Self {
        let z = coefficient / std_error;
        Self { name, coefficient, std_error, z, p_value: wald_p_value(z), odds_ratio: coefficient.exp() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// A fitted logistic model. `terms[0]` is the intercept; the remaining terms
/// follow the columns of the training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLogit {
    pub terms: Vec<Term>,
    /// Inverse observed information, intercept first.
    pub covariance: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub mcfadden_r2: f64,
    pub convergence: Convergence,
    /// Set when the unpenalized information matrix was singular and the
    /// standard errors come from the ridge-penalized one.
    pub penalized_inference: bool,
}

/// Two-sided p-value of a standard-normal Wald statistic.
pub fn wald_p_value(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn design(data: &EncodedMatrix) -> DMatrix<f64> {
    let p = data.n_cols() + 1;
    DMatrix::from_fn(data.n_rows(), p, |i, j| if j == 0 { 1.0 } else { data.value(i, j - 1) })
}

fn targets(data: &EncodedMatrix) -> Vec<f64> {
    data.labels.iter().map(|&y| f64::from(u8::from(y))).collect()
}

/// Weighted log-likelihood minus `ridge/2 * |beta_slopes|^2`. `beta` has the
/// intercept first.
pub fn log_likelihood(data: &EncodedMatrix, beta: &[f64], ridge: f64) -> Result<f64> {
    check_dim(data, beta)?;
    let ll: f64 = (0..data.n_rows())
        .map(|i| {
            let eta = linear_predictor(beta, data.row(i));
            let y = f64::from(u8::from(data.labels[i]));
            data.weights[i] * (y * eta - softplus(eta))
        })
        .sum();
    Ok(ll - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>())
}

/// Gradient of [`log_likelihood`] with respect to `beta`.
pub fn gradient(data: &EncodedMatrix, beta: &[f64], ridge: f64) -> Result<Vec<f64>> {
    check_dim(data, beta)?;
    let mut g = vec![0.0; beta.len()];
    for i in 0..data.n_rows() {
        let row = data.row(i);
        let y = f64::from(u8::from(data.labels[i]));
        let r = data.weights[i] * (y - sigmoid(linear_predictor(beta, row)));
        g[0] += r;
        for (gj, x) in g[1..].iter_mut().zip(row) {
            *gj += r * x;
        }
    }
    for (gj, b) in g[1..].iter_mut().zip(&beta[1..]) {
        *gj -= ridge * b;
    }
    Ok(g)
}

fn check_dim(data: &EncodedMatrix, beta: &[f64]) -> Result<()> {
    if beta.len() != data.n_cols() + 1 {
        return Err(Error::DimensionMismatch { expected: data.n_cols() + 1, got: beta.len() });
    }
    Ok(())
}

fn linear_predictor(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

struct State {
    ll: f64,
    grad: DVector<f64>,
    info: DMatrix<f64>,
}

fn evaluate(x: &DMatrix<f64>, y: &[f64], w: &[f64], beta: &DVector<f64>, ridge: f64, need_info: bool) -> State {
    let eta = x * beta;
    let mut ll = 0.0;
    let mut resid = DVector::zeros(y.len());
    let mut curv = Vec::with_capacity(if need_info { y.len() } else { 0 });
    for i in 0..y.len() {
        let mu = sigmoid(eta[i]);
        ll += w[i] * (y[i] * eta[i] - softplus(eta[i]));
        resid[i] = w[i] * (y[i] - mu);
        if need_info {
            curv.push((w[i] * mu * (1.0 - mu)).sqrt());
        }
    }
    let slopes2: f64 = beta.rows(1, beta.len() - 1).iter().map(|b| b * b).sum();
    ll -= 0.5 * ridge * slopes2;
    let mut grad = x.tr_mul(&resid);
    for j in 1..beta.len() {
        grad[j] -= ridge * beta[j];
    }
    let info = if need_info {
        let mut scaled = x.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= curv[i];
        }
        scaled.tr_mul(&scaled)
    } else {
        DMatrix::zeros(0, 0)
    };
    State { ll, grad, info }
}

/// Cholesky factor, rejecting matrices where some pivot collapses relative to
/// its own diagonal entry (a column that is nearly a combination of others).
fn well_conditioned_cholesky(m: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let diag = m.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return None;
    }
    let c = m.cholesky()?;
    let l = c.l_dirty();
    let ok = (0..l.nrows()).all(|i| l[(i, i)] * l[(i, i)] > 1e-11 * diag[i]);
    ok.then_some(c)
}

fn with_ridge(info: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let mut m = info.clone();
    for j in 1..m.nrows() {
        m[(j, j)] += ridge;
    }
    m
}

/// Maximizes the (row-weighted, ridge-penalized) log-likelihood.
///
/// The design gets an intercept column prepended. Newton steps are halved
/// until the penalized log-likelihood increases (or, within rounding noise of
/// it, the gradient shrinks). Iteration stops when
/// the gradient max-norm drops below `options.tolerance`, after
/// `options.max_iter` iterations, or when no step improves the objective;
/// the outcome is recorded in [`FittedLogit::convergence`].
pub fn fit_logistic(data: &EncodedMatrix, options: &LogitOptions) -> Result<FittedLogit> {
    if !(options.ridge >= 0.0 && options.ridge.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {}", options.ridge)));
    }
    let positives = data.positives();
    if positives == 0 || positives == data.n_rows() {
        return Err(Error::SingleClass);
    }
    let p = data.n_cols() + 1;
    if data.n_rows() <= p {
        return Err(Error::TooFewRows { rows: data.n_rows(), params: p });
    }
    let full_one_hot = !data.drop_baseline()
        && data.groups().iter().any(|g| {
            data.columns()[g.start].level.is_some() && g.len == g.variable.levels().len()
        });
    if full_one_hot {
        return Err(Error::InvalidParameter(
            "logistic regression needs the baseline-dropped encoding".into(),
        ));
    }
    let x = design(data);
    let y = targets(data);
    let w = &data.weights;
    let ridge = options.ridge;

    let total_w: f64 = w.iter().sum();
    let pos_w: f64 = w.iter().zip(&y).map(|(wi, yi)| wi * yi).sum();
    let base = pos_w / total_w;
    let mut beta = DVector::zeros(p);
    beta[0] = (base / (1.0 - base)).ln();

    let mut state = evaluate(&x, &y, w, &beta, ridge, true);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iter {
        if state.grad.amax() < options.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let step = match well_conditioned_cholesky(with_ridge(&state.info, ridge)) {
            Some(c) => c.solve(&state.grad),
            None => return Err(Error::SingularInformation),
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let candidate = &beta + &step * t;
            let next = evaluate(&x, &y, w, &candidate, ridge, false);
            // Near the optimum the gain drops below the rounding noise of the
            // log-likelihood sum; the gradient decides there.
            let noise = 1e3 * f64::EPSILON * (1.0 + state.ll.abs());
            let flat = (next.ll - state.ll).abs() <= noise && next.grad.amax() < state.grad.amax();
            if next.ll.is_finite() && (next.ll > state.ll || flat) {
                accepted = Some(candidate);
                break;
            }
            t *= 0.5;
        }
        let Some(next_beta) = accepted else { break };
        beta = next_beta;
        state = evaluate(&x, &y, w, &beta, ridge, true);
        if ridge == 0.0 && beta.amax() > 30.0 && state.grad.amax() >= options.tolerance {
            return Err(Error::Separation);
        }
    }
    if !converged && state.grad.amax() < options.tolerance {
        converged = true;
    }
    if ridge == 0.0 && beta.amax() > 30.0 && !converged {
        return Err(Error::Separation);
    }

    // Wald inference on the unpenalized information at the estimate.
    let (cov, penalized_inference) = match well_conditioned_cholesky(state.info.clone()) {
        Some(c) => (c.inverse(), false),
        None if ridge > 0.0 => match well_conditioned_cholesky(with_ridge(&state.info, ridge)) {
            Some(c) => (c.inverse(), true),
            None => return Err(Error::SingularInformation),
        },
        None => return Err(Error::SingularInformation),
    };
    let cov = 0.5 * (&cov + cov.transpose());

    let ll = state.ll + 0.5 * ridge * beta.rows(1, p - 1).iter().map(|b| b * b).sum::<f64>();
    let null_ll: f64 = y
        .iter()
        .zip(w)
        .map(|(yi, wi)| wi * (yi * base.ln() + (1.0 - yi) * (1.0 - base).ln()))
        .sum();

    let mut names = vec![INTERCEPT.to_string()];
    names.extend(data.column_names());
    let terms = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| Term::new(name, beta[j], cov[(j, j)].max(0.0).sqrt()))
        .collect();
    Ok(FittedLogit {
        terms,
        covariance: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        log_likelihood: ll,
        null_log_likelihood: null_ll,
        mcfadden_r2: 1.0 - ll / null_ll,
        convergence: Convergence { iterations, gradient_norm: state.grad.amax(), converged },
        penalized_inference,
    })
}

impl FittedLogit {
    /// Builds a model from published estimates (coefficient and standard
    /// error per term, intercept first). The covariance is diagonal and the
    /// log-likelihoods are scaled so that `1 - ll / ll_null = mcfadden_r2`.
    pub fn from_estimates(estimates: &[(String, f64, f64)], mcfadden_r2: f64) -> Self {
        let terms: Vec<Term> =
            estimates.iter().map(|(n, b, se)| Term::new(n.clone(), *b, *se)).collect();
        let p = terms.len();
        let covariance = (0..p)
            .map(|i| (0..p).map(|j| if i == j { terms[i].std_error.powi(2) } else { 0.0 }).collect())
            .collect();
        Self {
            terms,
            covariance,
            log_likelihood: -(1.0 - mcfadden_r2),
            null_log_likelihood: -1.0,
            mcfadden_r2,
            convergence: Convergence { iterations: 0, gradient_norm: 0.0, converged: true },
            penalized_inference: false,
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    pub fn intercept(&self) -> f64 {
        self.terms[0].coefficient
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.terms[1..].iter().map(|t| t.coefficient).collect()
    }

    pub fn n_features(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// Log-odds for an encoded row (without intercept column).
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.len() });
        }
        Ok(linear_predictor(&self.coefficients(), x))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.margin(x)?))
    }

    /// Non-intercept terms with p-value below `alpha`.
    pub fn significant_terms(&self, alpha: f64) -> Vec<&Term> {
        self.terms[1..].iter().filter(|t| t.p_value < alpha).collect()
    }

    /// Aligned text table: variable, coefficient, standard error, odds ratio
    /// and two-sided Wald p-value, followed by McFadden's R².
    pub fn report_table(&self, terms: &[&Term]) -> String {
        let width = terms.iter().map(|t| t.name.len()).max().unwrap_or(8).max(12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>11}  {:>10}  {:>10}  {:>7}",
            "Variable", "Coefficient", "Std. error", "Odds ratio", "p>|z|"
        );
        for t in terms {
            let _ = writeln!(
                out,
                "{:<width$}  {:>11.3}  {:>10.3}  {:>10.3}  {:>7.3}",
                t.name, t.coefficient, t.std_error, t.odds_ratio, t.p_value
            );
        }
        let _ = writeln!(out, "{:<width$}  {:>11.3}", "McFadden R2", self.mcfadden_r2);
        out
    }

    /// Table of the intercept plus all terms significant at `alpha`.
    pub fn significance_report(&self, alpha: f64) -> String {
        let mut rows = vec![&self.terms[0]];
        rows.extend(self.significant_terms(alpha));
        self.report_table(&rows)
    }
}
