//! Shapley feature attributions on the model margin: brute-force exact
//! values, path-dependent tree Shapley, linear Shapley for logistic models,
//! and a bee-swarm table export.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logit::FittedLogit;
use crate::model::Model;
use crate::trees::{Node, Tree};

/// Feature limit for subset enumeration.
pub const MAX_EXACT_FEATURES: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub base_value: f64,
    pub phi: Vec<f64>,
}

impl Attribution {
    /// base + Σφ.
    pub fn total(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

/// Attributions for a set of instances, with the raw feature values kept
/// for colouring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSet {
    pub features: Vec<String>,
    pub base_value: f64,
    pub phi: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Exact Shapley values for a value function over feature subsets. The mask
/// passed to `v` marks the features in the coalition.
pub fn shap_exact_with(p: usize, v: impl Fn(&[bool]) -> f64) -> Result<Attribution> {
    if p > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures { max: MAX_EXACT_FEATURES, got: p });
    }
    let n_sets = 1usize << p;
    let mut mask = vec![false; p];
    let values: Vec<f64> = (0..n_sets)
        .map(|s| {
            for (j, m) in mask.iter_mut().enumerate() {
                *m = s >> j & 1 == 1;
            }
            v(&mask)
        })
        .collect();
    let fact = factorials(p);
    let mut phi = vec![0.0; p];
    for (j, pj) in phi.iter_mut().enumerate() {
        for s in (0..n_sets).filter(|s| s >> j & 1 == 0) {
            let size = s.count_ones() as usize;
            let w = fact[size] * fact[p - size - 1] / fact[p];
            *pj += w * (values[s | 1 << j] - values[s]);
        }
    }
    Ok(Attribution { base_value: values[0], phi })
}

/// Interventional Shapley values: v(S) is the mean of `f` over background
/// rows with the features in S set to `x`'s values.
pub fn shap_exact(f: impl Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Result<Attribution> {
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    if let Some(b) = background.iter().find(|b| b.len() != x.len()) {
        return Err(Error::DimensionMismatch { expected: x.len(), got: b.len() });
    }
    shap_exact_with(x.len(), |mask| {
        let mut z = vec![0.0; x.len()];
        let total: f64 = background
            .iter()
            .map(|b| {
                for j in 0..x.len() {
                    z[j] = if mask[j] { x[j] } else { b[j] };
                }
                f(&z)
            })
            .sum();
        total / background.len() as f64
    })
}

fn child_shares(tree: &Tree, i: usize) -> Result<(f64, f64)> {
    let Node::Split { left, right, .. } = tree.nodes[i] else { unreachable!("split node") };
    let (cl, cr) = (tree.nodes[left].cover(), tree.nodes[right].cover());
    if !(cl >= 0.0 && cr >= 0.0 && cl + cr > 0.0) {
        return Err(Error::MissingCover(i));
    }
    Ok((cl / (cl + cr), cr / (cl + cr)))
}

/// Path-dependent conditional expectation of a tree output given the
/// features in `mask` fixed to `x`: known features follow `x`, unknown ones
/// average both branches by cover.
pub fn tree_expectation(tree: &Tree, x: &[f64], mask: &[bool]) -> Result<f64> {
    fn go(tree: &Tree, x: &[f64], mask: &[bool], i: usize) -> Result<f64> {
        match tree.nodes[i] {
            Node::Leaf { value, .. } => Ok(value),
            Node::Split { feature, threshold, left, right, .. } => {
                if mask[feature] {
                    go(tree, x, mask, if x[feature] < threshold { left } else { right })
                } else {
                    let (sl, sr) = child_shares(tree, i)?;
                    Ok(sl * go(tree, x, mask, left)? + sr * go(tree, x, mask, right)?)
                }
            }
        }
    }
    go(tree, x, mask, 0)
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElement { feature, zero, one, weight: if l == 0 { 1.0 } else { 0.0 } });
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, i: usize) {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut next = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = next * (l + 1) as f64 / ((j + 1) as f64 * one);
            next = t - path[j].weight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].weight = path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    for j in i..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElement], i: usize) -> f64 {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut next = path[l].weight;
    let mut total = 0.0;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = next * (l + 1) as f64 / ((j + 1) as f64 * one);
            total += t;
            next = path[j].weight - t * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            total += path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn tree_shap_recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElement>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) -> Result<()> {
    extend_path(&mut path, zero, one, feature);
    match tree.nodes[node] {
        Node::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                phi[el.feature.expect("non-root element")] += w * (el.one - el.zero) * value;
            }
        }
        Node::Split { feature: f, threshold, left, right, .. } => {
            let (sl, sr) = child_shares(tree, node)?;
            let (hot, cold, s_hot, s_cold) =
                if x[f] < threshold { (left, right, sl, sr) } else { (right, left, sr, sl) };
            let (mut iz, mut io) = (1.0, 1.0);
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(f)) {
                iz = path[k].zero;
                io = path[k].one;
                unwind_path(&mut path, k);
            }
            tree_shap_recurse(tree, x, phi, hot, path.clone(), iz * s_hot, io, Some(f))?;
            tree_shap_recurse(tree, x, phi, cold, path, iz * s_cold, 0.0, Some(f))?;
        }
    }
    Ok(())
}

/// Path-dependent tree Shapley values for one tree. `base_value` is the
/// cover-weighted mean leaf value.
pub fn shap_single_tree(tree: &Tree, x: &[f64]) -> Result<Attribution> {
    if x.len() != tree.n_features {
        return Err(Error::DimensionMismatch { expected: tree.n_features, got: x.len() });
    }
    let mut phi = vec![0.0; x.len()];
    tree_shap_recurse(tree, x, &mut phi, 0, Vec::new(), 1.0, 1.0, None)?;
    let base_value = tree_expectation(tree, x, &vec![false; x.len()])?;
    Ok(Attribution { base_value, phi })
}

fn mean_of(parts: Vec<Attribution>, p: usize) -> Attribution {
    let n = parts.len() as f64;
    let mut out = Attribution { base_value: 0.0, phi: vec![0.0; p] };
    for a in parts {
        out.base_value += a.base_value / n;
        for (o, v) in out.phi.iter_mut().zip(a.phi) {
            *o += v / n;
        }
    }
    out
}

/// Tree Shapley values for a tree-based model on its margin scale: a single
/// tree, the mean over forest trees (every tree is grown on a resample of
/// the same size, so this is the cover-weighted mean), or the sum over
/// boosting rounds plus the initial score.
pub fn shap_tree(model: &Model, x: &[f64]) -> Result<Attribution> {
    let p = model.n_features();
    if x.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: x.len() });
    }
    match model {
        Model::Dt(m) => shap_single_tree(&m.tree, x),
        Model::Rf(m) => {
            let parts = m.trees.iter().map(|t| shap_single_tree(t, x)).collect::<Result<Vec<_>>>()?;
            Ok(mean_of(parts, p))
        }
        Model::Gbdt(m) => {
            let mut out = Attribution { base_value: m.base_score, phi: vec![0.0; p] };
            for t in &m.trees {
                let a = shap_single_tree(t, x)?;
                out.base_value += a.base_value;
                for (o, v) in out.phi.iter_mut().zip(a.phi) {
                    *o += v;
                }
            }
            Ok(out)
        }
        Model::Logit(_) => Err(Error::InvalidParameter("tree Shapley needs a tree-based model".into())),
    }
}

/// φ_j = β_j (x_j - mean_j) on the log-odds scale.
pub fn shap_linear(model: &FittedLogit, x: &[f64], means: &[f64]) -> Result<Attribution> {
    let p = model.n_features();
    for len in [x.len(), means.len()] {
        if len != p {
            return Err(Error::DimensionMismatch { expected: p, got: len });
        }
    }
    let beta = model.slopes();
    let phi = (0..p).map(|j| beta[j] * (x[j] - means[j])).collect();
    let base_value = model.intercept() + (0..p).map(|j| beta[j] * means[j]).sum::<f64>();
    Ok(Attribution { base_value, phi })
}

/// Column means used as the linear-Shapley reference point.
pub fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let p = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Attributions for every row: tree Shapley for tree models, linear Shapley
/// against `background` means for logistic regression.
pub fn explain_rows(model: &Model, features: Vec<String>, rows: &[Vec<f64>], background: &[Vec<f64>]) -> Result<AttributionSet> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let means = column_means(background);
    let attrs: Vec<Attribution> = rows
        .par_iter()
        .map(|x| match model {
            Model::Logit(m) => shap_linear(m, x, &means),
            _ => shap_tree(model, x),
        })
        .collect::<Result<_>>()?;
    let base_value = attrs[0].base_value;
    Ok(AttributionSet {
        features,
        base_value,
        phi: attrs.into_iter().map(|a| a.phi).collect(),
        values: rows.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmRow {
    pub feature: String,
    pub instance_id: usize,
    pub shap_value: f64,
    /// Feature value scaled to [0, 1] by its min and max over the explained
    /// rows; 0.5 when the feature is constant.
    pub normalized_value: f64,
}

/// Feature indices by descending mean |φ|, ties by name.
pub fn feature_order(set: &AttributionSet) -> Vec<usize> {
    let n = set.phi.len() as f64;
    let importance: Vec<f64> =
        (0..set.features.len()).map(|j| set.phi.iter().map(|r| r[j].abs()).sum::<f64>() / n).collect();
    let mut order: Vec<usize> = (0..set.features.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then_with(|| set.features[a].cmp(&set.features[b])));
    order
}

pub fn beeswarm_export(set: &AttributionSet) -> Vec<BeeswarmRow> {
    let mut out = Vec::with_capacity(set.phi.len() * set.features.len());
    for j in feature_order(set) {
        let lo = set.values.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = set.values.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        for (i, row) in set.phi.iter().enumerate() {
            let v = set.values[i][j];
            let normalized_value = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            out.push(BeeswarmRow { feature: set.features[j].clone(), instance_id: i, shap_value: row[j], normalized_value });
        }
    }
    out
}

pub fn beeswarm_csv(rows: &[BeeswarmRow]) -> String {
    let mut out = String::from("feature,instance_id,shap_value,normalized_value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.feature, r.instance_id, r.shap_value, r.normalized_value);
    }
    out
}
