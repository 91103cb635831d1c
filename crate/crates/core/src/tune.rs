//! Bayesian hyperparameter search (Gaussian-process surrogate with expected
//! improvement) and the cross-validated average-precision objective.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::eval::average_precision;
use crate::event_model::EncodedMatrix;
use crate::imbalance::Balance;
use crate::model::{fit_model, Family, ModelParams};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Integer,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub kind: Kind,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
}

impl Dimension {
    pub fn real(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: Kind::Real, lower, upper, scale: Scale::Linear }
    }

    pub fn log(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: Kind::Real, lower, upper, scale: Scale::Log }
    }

    pub fn int(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: Kind::Integer, lower, upper, scale: Scale::Linear }
    }

    /// Maps u in [0, 1] to a value, rounding integer dimensions.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = match self.scale {
            Scale::Linear => self.lower + u * (self.upper - self.lower),
            Scale::Log => (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp(),
        };
        let v = v.clamp(self.lower, self.upper);
        match self.kind {
            Kind::Integer => v.round(),
            Kind::Real => v,
        }
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        let u = match self.scale {
            Scale::Linear => (v - self.lower) / (self.upper - self.lower),
            Scale::Log => (v.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln()),
        };
        u.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSearchSpace("no dimensions".into()));
        }
        for d in &dims {
            let ok = d.lower.is_finite()
                && d.upper.is_finite()
                && d.lower < d.upper
                && (d.scale == Scale::Linear || d.lower > 0.0);
            if !ok {
                return Err(Error::InvalidSearchSpace(format!("bad bounds for {}", d.name)));
            }
        }
        Ok(Self { dims })
    }

    /// Default boxes per family. They contain the published optima with
    /// margin on every side.
    pub fn for_family(family: Family) -> Result<Self> {
        let tree = || {
            vec![
                Dimension::int("max_depth", 2.0, 80.0),
                Dimension::int("min_samples_leaf", 1.0, 20.0),
                Dimension::int("min_samples_split", 1.0, 20.0),
            ]
        };
        let dims = match family {
            Family::Logit => vec![Dimension::log("ridge", 1e-8, 10.0)],
            Family::Dt => {
                let mut d = tree();
                d.push(Dimension::log("ccp_alpha", 1e-5, 1e-2));
                d
            }
            Family::Rf => {
                let mut d = tree();
                d.push(Dimension::int("n_estimators", 50.0, 300.0));
                d
            }
            Family::Gbdt => vec![
                Dimension::real("colsample", 0.3, 1.0),
                Dimension::log("learning_rate", 0.01, 0.5),
                Dimension::real("gamma", 0.0, 2.0),
                Dimension::int("max_depth", 2.0, 15.0),
                Dimension::real("min_child_weight", 1.0, 10.0),
            ],
        };
        Self::new(dims)
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.dims.iter().map(|d| d.name.clone()).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(u).map(|(d, &x)| d.from_unit(x)).collect()
    }

    pub fn to_unit(&self, v: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(v).map(|(d, &x)| d.to_unit(x)).collect()
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.len()
            && self.dims.iter().zip(v).all(|(d, &x)| {
                x >= d.lower && x <= d.upper && (d.kind == Kind::Real || x.fract() == 0.0)
            })
    }
}

/// Writes searched values into a copy of `base`. Names must match the
/// family's space.
pub fn apply_params(family: Family, base: &ModelParams, names: &[String], values: &[f64]) -> Result<ModelParams> {
    let mut p = *base;
    for (name, &v) in names.iter().zip(values) {
        let n = v as usize;
        match (family, name.as_str()) {
            (Family::Logit, "ridge") => p.logit.ridge = v,
            (Family::Dt, "max_depth") => p.tree.max_depth = n,
            (Family::Dt, "min_samples_leaf") => p.tree.min_samples_leaf = n,
            (Family::Dt, "min_samples_split") => p.tree.min_samples_split = n,
            (Family::Dt, "ccp_alpha") => p.tree.ccp_alpha = v,
            (Family::Rf, "max_depth") => p.forest.max_depth = n,
            (Family::Rf, "min_samples_leaf") => p.forest.min_samples_leaf = n,
            (Family::Rf, "min_samples_split") => p.forest.min_samples_split = n,
            (Family::Rf, "n_estimators") => p.forest.n_estimators = n,
            (Family::Gbdt, "colsample") => p.boost.colsample = v,
            (Family::Gbdt, "learning_rate") => p.boost.learning_rate = v,
            (Family::Gbdt, "gamma") => p.boost.gamma = v,
            (Family::Gbdt, "max_depth") => p.boost.max_depth = n,
            (Family::Gbdt, "min_child_weight") => p.boost.min_child_weight = v,
            _ => return Err(Error::InvalidSearchSpace(format!("{name} is not a {family} hyperparameter"))),
        }
    }
    Ok(p)
}

/// Objective value with optional per-fold detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub mean: f64,
    pub folds: Vec<f64>,
}

impl Score {
    pub fn single(v: f64) -> Self {
        Self { mean: v, folds: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub values: Vec<f64>,
    pub fold_scores: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub names: Vec<String>,
    pub best_values: Vec<f64>,
    pub best_objective: f64,
    pub history: Vec<Trial>,
}

impl TuneResult {
    fn from_history(names: Vec<String>, history: Vec<Trial>) -> Self {
        let mut best = 0;
        for (i, t) in history.iter().enumerate() {
            if t.objective > history[best].objective {
                best = i;
            }
        }
        Self { names, best_values: history[best].values.clone(), best_objective: history[best].objective, history }
    }

    /// Best objective among the first `n` trials.
    pub fn best_after(&self, n: usize) -> f64 {
        self.history[..n.min(self.history.len())].iter().map(|t| t.objective).fold(f64::NEG_INFINITY, f64::max)
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton points 1..=n with a random Cranley-Patterson shift per dimension.
pub fn scrambled_halton(n: usize, dim: usize, rng: &mut seed::Rng) -> Result<Vec<Vec<f64>>> {
    if dim > PRIMES.len() {
        return Err(Error::InvalidSearchSpace(format!("at most {} dimensions", PRIMES.len())));
    }
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    Ok((1..=n as u64)
        .map(|i| (0..dim).map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract()).collect())
        .collect())
}

fn matern52(r: f64, ell: f64) -> f64 {
    let s = 5f64.sqrt() * r / ell;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub const LENGTH_SCALES: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.8];
const JITTER: f64 = 1e-6;

/// GP regression on standardized targets with unit signal variance.
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    ell: f64,
    y_mean: f64,
    y_scale: f64,
}

impl GaussianProcess {
    /// Picks the length scale with the highest log marginal likelihood.
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        let y_scale = if sd > 0.0 { sd } else { 1.0 };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
        let mut best: Option<(f64, Self)> = None;
        for ell in LENGTH_SCALES {
            let k = DMatrix::from_fn(x.len(), x.len(), |i, j| {
                matern52(dist(&x[i], &x[j]), ell) + if i == j { JITTER } else { 0.0 }
            });
            let Some(chol) = k.cholesky() else { continue };
            let alpha = chol.solve(&ys);
            let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            let lml = -0.5 * ys.dot(&alpha) - 0.5 * log_det;
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, Self { x: x.to_vec(), alpha, chol, ell, y_mean, y_scale }));
            }
        }
        best.map(|(_, gp)| gp).ok_or(Error::SingularInformation)
    }

    pub fn length_scale(&self) -> f64 {
        self.ell
    }

    /// Posterior mean and standard deviation on the original scale.
    pub fn predict(&self, z: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| matern52(dist(xi, z), self.ell)));
        let mean = k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).expect("triangular solve");
        let var = (1.0 - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    if sd <= 0.0 {
        return (mean - best).max(0.0);
    }
    let z = (mean - best) / sd;
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (mean - best) * cdf + sd * pdf
}

pub const N_CANDIDATES: usize = 1024;

fn candidates(dim: usize, incumbent: &[f64], rng: &mut seed::Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(N_CANDIDATES);
    for _ in 0..N_CANDIDATES / 2 {
        out.push((0..dim).map(|_| rng.random::<f64>()).collect());
    }
    for (k, sd) in [(N_CANDIDATES / 4, 0.1), (N_CANDIDATES / 4, 0.02)] {
        let normal = Normal::new(0.0, sd).expect("positive sd");
        for _ in 0..k {
            out.push(incumbent.iter().map(|&c| (c + normal.sample(rng)).clamp(0.0, 1.0)).collect());
        }
    }
    out
}

/// Maximizes `objective` over `space` with `budget` evaluations, the first
/// `n_init` from a scrambled Halton design and the rest proposed by
/// expected improvement under a GP surrogate. Integer dimensions are rounded
/// and no parameter vector is evaluated twice.
pub fn bayes_optimize(
    space: &SearchSpace,
    n_init: usize,
    budget: usize,
    seed: u64,
    mut objective: impl FnMut(&[f64]) -> Result<Score>,
) -> Result<TuneResult> {
    if n_init < 2 || budget < n_init {
        return Err(Error::BudgetTooSmall { budget, n_init });
    }
    let mut rng = seed::substream(seed, "tune");
    let dim = space.len();
    let mut history: Vec<Trial> = Vec::with_capacity(budget);
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut evaluate = |values: Vec<f64>, history: &mut Vec<Trial>, seen: &mut Vec<Vec<f64>>| -> Result<()> {
        let score = objective(&values)?;
        seen.push(values.clone());
        history.push(Trial { values, fold_scores: score.folds, objective: score.mean });
        Ok(())
    };
    for u in scrambled_halton(n_init, dim, &mut rng)? {
        let mut values = space.from_unit(&u);
        if seen.contains(&values) {
            values = fresh_point(space, &seen, &mut rng)?;
        }
        evaluate(values, &mut history, &mut seen)?;
    }
    while history.len() < budget {
        let xs: Vec<Vec<f64>> = history.iter().map(|t| space.to_unit(&t.values)).collect();
        let ys: Vec<f64> = history.iter().map(|t| t.objective).collect();
        let gp = GaussianProcess::fit(&xs, &ys)?;
        let best_idx = (0..ys.len()).fold(0, |b, i| if ys[i] > ys[b] { i } else { b });
        let best = ys[best_idx];
        let mut scored: Vec<(f64, Vec<f64>)> = candidates(dim, &xs[best_idx], &mut rng)
            .into_iter()
            .map(|u| {
                let values = space.from_unit(&u);
                let (m, s) = gp.predict(&space.to_unit(&values));
                (expected_improvement(m, s, best), values)
            })
            .collect();
        // Stable sort keeps candidate order among equal EI.
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let next = match scored.into_iter().map(|(_, v)| v).find(|v| !seen.contains(v)) {
            Some(v) => v,
            None => fresh_point(space, &seen, &mut rng)?,
        };
        evaluate(next, &mut history, &mut seen)?;
    }
    Ok(TuneResult::from_history(space.names(), history))
}

fn fresh_point(space: &SearchSpace, seen: &[Vec<f64>], rng: &mut seed::Rng) -> Result<Vec<f64>> {
    for _ in 0..10_000 {
        let u: Vec<f64> = (0..space.len()).map(|_| rng.random::<f64>()).collect();
        let v = space.from_unit(&u);
        if !seen.contains(&v) {
            return Ok(v);
        }
    }
    Err(Error::InvalidSearchSpace("search space exhausted".into()))
}

/// Uniform random search with the same bookkeeping as [`bayes_optimize`].
pub fn random_search(
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    mut objective: impl FnMut(&[f64]) -> Result<Score>,
) -> Result<TuneResult> {
    let mut rng = seed::substream(seed, "tune");
    let mut history = Vec::with_capacity(budget);
    let mut seen = Vec::new();
    for _ in 0..budget {
        let values = fresh_point(space, &seen, &mut rng)?;
        let score = objective(&values)?;
        seen.push(values.clone());
        history.push(Trial { values, fold_scores: score.folds, objective: score.mean });
    }
    if history.is_empty() {
        return Err(Error::BudgetTooSmall { budget, n_init: 1 });
    }
    Ok(TuneResult::from_history(space.names(), history))
}

/// Stratified folds: each class is shuffled and dealt round-robin.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if k < 2 || positives < k || negatives < k {
        return Err(Error::TooFewPerClass { k, positives, negatives });
    }
    let mut rng = seed::substream(seed, "folds");
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (n, i) in idx.into_iter().enumerate() {
            folds[(n + offset) % k].push(i);
        }
        offset += positives;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Something that can be trained on one matrix and score another.
pub trait Learner {
    fn fit_predict(&self, train: &EncodedMatrix, test: &EncodedMatrix) -> Result<Vec<f64>>;
}

/// A model family with fixed hyperparameters and training-set balancing.
#[derive(Debug, Clone, Copy)]
pub struct FamilyLearner {
    pub family: Family,
    pub params: ModelParams,
    pub balance: Balance,
}

impl Learner for FamilyLearner {
    fn fit_predict(&self, train: &EncodedMatrix, test: &EncodedMatrix) -> Result<Vec<f64>> {
        let model = fit_model(self.family, &self.balance.apply(train.clone())?, &self.params)?;
        let test = if self.family.drop_baseline() { test.without_baselines()? } else { test.clone() };
        model.predict_matrix(&test)
    }
}

/// Mean minority-class average precision over stratified folds of a full
/// encoding. Balancing happens inside the learner, on training folds only.
pub fn cv_objective(learner: &impl Learner, data: &EncodedMatrix, k: usize, seed: u64) -> Result<Score> {
    let folds = stratified_kfold(&data.labels, k, seed)?;
    let mut scores = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> =
            folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v.iter().copied()).collect();
        let mut train_idx = train_idx;
        train_idx.sort_unstable();
        let test = data.select_rows(test_idx);
        let p = learner.fit_predict(&data.select_rows(&train_idx), &test)?;
        scores.push(average_precision(&test.labels, &p)?);
    }
    Ok(Score { mean: scores.iter().sum::<f64>() / k as f64, folds: scores })
}

/// Tunes one model family by cross-validated average precision.
#[allow(clippy::too_many_arguments)]
pub fn tune_family(
    family: Family,
    base: &ModelParams,
    balance: &Balance,
    data: &EncodedMatrix,
    n_init: usize,
    budget: usize,
    k: usize,
    seed: u64,
) -> Result<TuneResult> {
    let space = SearchSpace::for_family(family)?;
    let names = space.names();
    let fold_seed = seed::derive(seed, "cv");
    bayes_optimize(&space, n_init, budget, seed, |values| {
        let params = apply_params(family, base, &names, values)?;
        cv_objective(&FamilyLearner { family, params, balance: *balance }, data, k, fold_seed)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::one_hot_encode;
    use crate::synth::{generate_dataset, GeneratorConfig};
    use crate::trees::{BoostParams, ForestParams, TreeParams};
    use proptest::prelude::*;

    fn space_1d() -> SearchSpace {
        SearchSpace::new(vec![Dimension::real("x", 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn quadratic_optimum_found() {
        let r = bayes_optimize(&space_1d(), 5, 30, 1, |v| Ok(Score::single(-(v[0] - 0.37).powi(2)))).unwrap();
        assert!((r.best_values[0] - 0.37).abs() < 0.02, "{:?}", r.best_values);
        assert_eq!(r.history.len(), 30);
    }

    #[test]
    fn budget_equal_to_init_is_design_only() {
        let f = |v: &[f64]| Ok(Score::single(v[0]));
        let r = bayes_optimize(&space_1d(), 6, 6, 3, f).unwrap();
        let mut rng = seed::substream(3, "tune");
        let design = scrambled_halton(6, 1, &mut rng).unwrap();
        let best = design.iter().map(|u| u[0]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best_objective, best);
        assert!(matches!(bayes_optimize(&space_1d(), 6, 5, 3, f), Err(Error::BudgetTooSmall { .. })));
        assert!(matches!(bayes_optimize(&space_1d(), 1, 5, 3, f), Err(Error::BudgetTooSmall { .. })));
    }

    #[test]
    fn running_best_is_monotone_and_reproducible() {
        let f = |v: &[f64]| Ok(Score::single((6.0 * v[0]).sin() * v[1]));
        let space = SearchSpace::new(vec![Dimension::real("a", 0.0, 1.0), Dimension::int("b", 1.0, 5.0)]).unwrap();
        let r = bayes_optimize(&space, 4, 20, 9, f).unwrap();
        let again = bayes_optimize(&space, 4, 20, 9, f).unwrap();
        assert_eq!(r, again);
        for n in 1..20 {
            assert!(r.best_after(n + 1) >= r.best_after(n));
        }
        for t in &r.history {
            assert!(space.contains(&t.values));
        }
        for i in 0..r.history.len() {
            for j in 0..i {
                assert_ne!(r.history[i].values, r.history[j].values);
            }
        }
    }

    #[test]
    fn small_integer_space_is_exhausted_without_duplicates() {
        let space = SearchSpace::new(vec![Dimension::int("k", 1.0, 4.0)]).unwrap();
        let r = bayes_optimize(&space, 2, 4, 0, |v| Ok(Score::single(v[0]))).unwrap();
        let mut vals: Vec<f64> = r.history.iter().map(|t| t.values[0]).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, [1.0, 2.0, 3.0, 4.0]);
        assert!(bayes_optimize(&space, 2, 5, 0, |v| Ok(Score::single(v[0]))).is_err());
    }

    #[test]
    fn default_spaces_contain_published_optima() {
        let inside = |f: Family, name: &str, v: f64| {
            let s = SearchSpace::for_family(f).unwrap();
            let d = s.dims.iter().find(|d| d.name == name).unwrap();
            assert!(d.lower < v && v < d.upper, "{f} {name}");
        };
        let dt = TreeParams::default();
        inside(Family::Dt, "max_depth", dt.max_depth as f64);
        inside(Family::Dt, "min_samples_leaf", dt.min_samples_leaf as f64);
        inside(Family::Dt, "min_samples_split", dt.min_samples_split as f64);
        inside(Family::Dt, "ccp_alpha", dt.ccp_alpha);
        let rf = ForestParams::default();
        inside(Family::Rf, "max_depth", rf.max_depth as f64);
        inside(Family::Rf, "min_samples_leaf", rf.min_samples_leaf as f64);
        inside(Family::Rf, "min_samples_split", rf.min_samples_split as f64);
        inside(Family::Rf, "n_estimators", rf.n_estimators as f64);
        let gb = BoostParams::default();
        inside(Family::Gbdt, "colsample", gb.colsample);
        inside(Family::Gbdt, "learning_rate", gb.learning_rate);
        inside(Family::Gbdt, "gamma", gb.gamma);
        inside(Family::Gbdt, "max_depth", gb.max_depth as f64);
        inside(Family::Gbdt, "min_child_weight", gb.min_child_weight);
    }

    #[test]
    fn apply_params_sets_fields() {
        let names: Vec<String> = SearchSpace::for_family(Family::Gbdt).unwrap().names();
        let p = apply_params(Family::Gbdt, &ModelParams::default(), &names, &[0.5, 0.1, 1.0, 4.0, 3.0]).unwrap();
        assert_eq!(p.boost.colsample, 0.5);
        assert_eq!(p.boost.max_depth, 4);
        assert!(apply_params(Family::Dt, &ModelParams::default(), &["colsample".into()], &[0.5]).is_err());
    }

    struct Oracle;
    impl Learner for Oracle {
        fn fit_predict(&self, _: &EncodedMatrix, test: &EncodedMatrix) -> Result<Vec<f64>> {
            Ok(test.labels.iter().map(|&y| f64::from(u8::from(y))).collect())
        }
    }

    struct Constant;
    impl Learner for Constant {
        fn fit_predict(&self, _: &EncodedMatrix, test: &EncodedMatrix) -> Result<Vec<f64>> {
            Ok(vec![0.3; test.n_rows()])
        }
    }

    fn data(n: usize, seed: u64) -> EncodedMatrix {
        one_hot_encode(&generate_dataset(&GeneratorConfig::default().with_seed(seed), n).unwrap(), false).unwrap()
    }

    #[test]
    fn cv_objective_reference_learners() {
        let d = data(400, 1);
        assert_eq!(cv_objective(&Oracle, &d, 3, 5).unwrap().mean, 1.0);
        let folds = stratified_kfold(&d.labels, 3, 5).unwrap();
        let prevalence: f64 = folds
            .iter()
            .map(|f| f.iter().filter(|&&i| d.labels[i]).count() as f64 / f.len() as f64)
            .sum::<f64>()
            / 3.0;
        let s = cv_objective(&Constant, &d, 3, 5).unwrap();
        assert!((s.mean - prevalence).abs() < 1e-9);
        assert_eq!(s.folds.len(), 3);
        assert_eq!(cv_objective(&Constant, &d, 3, 5).unwrap(), s);
    }

    #[test]
    fn cv_needs_k_per_class() {
        let d = EncodedMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![true, true, false, false]).unwrap();
        assert!(matches!(cv_objective(&Oracle, &d, 3, 0), Err(Error::TooFewPerClass { .. })));
    }

    #[test]
    fn family_tuning_runs() {
        let d = data(500, 2);
        let mut base = ModelParams::default().with_seed(2);
        base.boost.n_rounds = 10;
        let r = tune_family(Family::Gbdt, &base, &Balance::Weights, &d, 3, 5, 3, 2).unwrap();
        assert_eq!(r.history.len(), 5);
        assert!(r.best_objective > 0.0 && r.best_objective <= 1.0);
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(n in 30usize..300, pos_frac in 0.1f64..0.5, k in 2usize..6, seed in any::<u64>()) {
            let labels: Vec<bool> = (0..n).map(|i| (i as f64) < n as f64 * pos_frac).collect();
            if let Ok(folds) = stratified_kfold(&labels, k, seed) {
                let mut all: Vec<usize> = folds.concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                let pos: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i]).count()).collect();
                prop_assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
            }
        }

        #[test]
        fn unit_mapping_stays_in_bounds(u in 0.0f64..=1.0) {
            for f in Family::ALL {
                let s = SearchSpace::for_family(f).unwrap();
                let v = s.from_unit(&vec![u; s.len()]);
                prop_assert!(s.contains(&v));
            }
        }
    }
}
