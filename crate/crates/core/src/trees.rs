//! CART decision trees with Gini impurity and cost-complexity pruning,
//! random forests, and second-order gradient-boosted trees.
//!
//! All trees route `x[feature] < threshold` to the left child. Every node
//! records its cover (number of training rows reaching it), which the
//! path-dependent Shapley explainer uses.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::EncodedMatrix;
use crate::seed::{self, Rng};
use crate::synth::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize, value: f64, cover: f64 },
    Leaf { value: f64, cover: f64 },
}

impl Node {
    pub fn value(&self) -> f64 {
        match *self {
            Node::Split { value, .. } | Node::Leaf { value, .. } => value,
        }
    }

    pub fn cover(&self) -> f64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// Arena-allocated binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl Tree {
    /// Checks that children exist, come after their parent and that every
    /// non-root node has exactly one parent.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Split { feature, left, right, threshold, .. } = *n {
                if feature >= n_features || !threshold.is_finite() {
                    return Err(Error::InvalidParameter(format!("node {i} has an invalid split")));
                }
                for c in [left, right] {
                    if c <= i || c >= nodes.len() {
                        return Err(Error::InvalidParameter(format!("node {i} has invalid child {c}")));
                    }
                    parents[c] += 1;
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::InvalidParameter("nodes do not form a tree".into()));
        }
        Ok(Self { nodes, n_features })
    }

    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        let mut i = 0;
        while let Node::Split { feature, threshold, left, right, .. } = self.nodes[i] {
            i = if x[feature] < threshold { left } else { right };
        }
        Ok(i)
    }

    /// Leaf value: class-1 probability for CART, scaled leaf weight for
    /// boosting.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.nodes[self.leaf_index(x)?].value())
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub ccp_alpha: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 58, min_samples_leaf: 5, min_samples_split: 9, ccp_alpha: 0.0007 }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if !(self.ccp_alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("ccp_alpha must be >= 0, got {}", self.ccp_alpha)));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub n_estimators: usize,
    /// Columns considered per split; `None` means ceil(sqrt(p)).
    pub max_features: Option<usize>,
    /// Draw a bootstrap resample per tree. Disabling it is only useful for
    /// testing.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            max_depth: 73,
            min_samples_leaf: 2,
            min_samples_split: 2,
            n_estimators: 155,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub gamma: f64,
    pub colsample: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.2,
            max_depth: 11,
            min_child_weight: 2.0,
            gamma: 0.48,
            colsample: 0.59,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl BoostParams {
    fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.colsample > 0.0
            && self.colsample <= 1.0
            && self.lambda >= 0.0
            && self.gamma >= 0.0
            && self.min_child_weight >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid boosting parameters {self:?}")));
        }
        Ok(())
    }
}

/// Σ_c p_c (1 - p_c) over (possibly weighted) class totals.
pub fn gini(counts: &[f64]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyNode);
    }
    Ok(counts.iter().map(|c| c / total * (1.0 - c / total)).sum())
}

fn gini2(w0: f64, w1: f64) -> f64 {
    let t = w0 + w1;
    if t <= 0.0 {
        0.0
    } else {
        2.0 * (w0 / t) * (w1 / t)
    }
}

/// Rows sorted lexicographically by (values, label, weight) so fits do not
/// depend on the input row order.
fn canonical(data: &EncodedMatrix) -> EncodedMatrix {
    let mut idx: Vec<usize> = (0..data.n_rows()).collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (data.row(a), data.row(b));
        ra.iter()
            .zip(rb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(data.labels[a].cmp(&data.labels[b]))
            .then(data.weights[a].total_cmp(&data.weights[b]))
    });
    data.select_rows(&idx)
}

/// Per-row additive statistics: (a, b) are class weights for CART and
/// (gradient, hessian) for boosting.
#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    a: f64,
    b: f64,
    n: f64,
}

impl Stats {
    fn add(&mut self, o: Stats) {
        self.a += o.a;
        self.b += o.b;
        self.n += o.n;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats { a: self.a - o.a, b: self.b - o.b, n: self.n - o.n }
    }
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

/// Scans midpoints between consecutive distinct values of each feature.
/// `score(left, right)` returns `None` for inadmissible splits. Ties keep the
/// lowest feature, then the lowest threshold.
fn best_split(
    data: &EncodedMatrix,
    rows: &[usize],
    features: &[usize],
    stats: &[Stats],
    score: impl Fn(Stats, Stats) -> Option<f64>,
) -> Option<Candidate> {
    let mut total = Stats::default();
    for &r in rows {
        total.add(stats[r]);
    }
    let mut best: Option<Candidate> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| data.value(a, f).total_cmp(&data.value(b, f)).then(a.cmp(&b)));
        let mut left = Stats::default();
        for w in 0..order.len().saturating_sub(1) {
            left.add(stats[order[w]]);
            let (lo, hi) = (data.value(order[w], f), data.value(order[w + 1], f));
            if lo == hi {
                continue;
            }
            let Some(s) = score(left, total.minus(left)) else { continue };
            let better = match &best {
                None => true,
                Some(b) => s > b.score + 1e-12 * b.score.abs().max(1e-12),
            };
            if better {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold <= lo {
                    threshold = hi;
                }
                best = Some(Candidate { score: s, feature: f, threshold });
            }
        }
    }
    best
}

fn partition(data: &EncodedMatrix, rows: &[usize], feature: usize, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    rows.iter().partition(|&&r| data.value(r, feature) < threshold)
}

fn choose_features(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut f = sample(rng, n, k).into_vec();
    f.sort_unstable();
    f
}

struct CartBuilder<'a> {
    data: &'a EncodedMatrix,
    stats: Vec<Stats>,
    max_depth: usize,
    min_leaf: usize,
    min_split: usize,
    max_features: usize,
    nodes: Vec<Node>,
    // Weighted class totals per node, used by pruning.
    totals: Vec<(f64, f64)>,
}

impl CartBuilder<'_> {
    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut Rng) -> usize {
        let mut t = Stats::default();
        for &r in rows {
            t.add(self.stats[r]);
        }
        let id = self.nodes.len();
        let value = if t.a + t.b > 0.0 { t.b / (t.a + t.b) } else { 0.0 };
        self.nodes.push(Node::Leaf { value, cover: rows.len() as f64 });
        self.totals.push((t.a, t.b));
        let parent = gini2(t.a, t.b);
        if depth >= self.max_depth || rows.len() < self.min_split || parent == 0.0 {
            return id;
        }
        let features = choose_features(self.data.n_cols(), self.max_features, rng);
        let min_leaf = self.min_leaf as f64;
        let w = t.a + t.b;
        let best = best_split(self.data, rows, &features, &self.stats, |l, r| {
            if l.n < min_leaf || r.n < min_leaf {
                return None;
            }
            let child = ((l.a + l.b) * gini2(l.a, l.b) + (r.a + r.b) * gini2(r.a, r.b)) / w;
            let decrease = parent - child;
            (decrease > 1e-15).then_some(decrease)
        });
        let Some(best) = best else { return id };
        let (lrows, rrows) = partition(self.data, rows, best.feature, best.threshold);
        let left = self.grow(&lrows, depth + 1, rng);
        let right = self.grow(&rrows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            value,
            cover: rows.len() as f64,
        };
        id
    }
}

fn fit_cart(
    data: &EncodedMatrix,
    rows: &[usize],
    max_depth: usize,
    min_leaf: usize,
    min_split: usize,
    max_features: usize,
    rng: &mut Rng,
) -> (Tree, Vec<(f64, f64)>) {
    let stats = (0..data.n_rows())
        .map(|i| {
            let w = data.weights[i];
            if data.labels[i] {
                Stats { a: 0.0, b: w, n: 1.0 }
            } else {
                Stats { a: w, b: 0.0, n: 1.0 }
            }
        })
        .collect();
    let mut b = CartBuilder {
        data,
        stats,
        max_depth,
        min_leaf,
        min_split,
        max_features,
        nodes: Vec::new(),
        totals: Vec::new(),
    };
    b.grow(rows, 0, rng);
    (Tree { nodes: b.nodes, n_features: data.n_cols() }, b.totals)
}

/// Minimal cost-complexity pruning by weakest link. A subtree is collapsed
/// while its per-leaf impurity gain g(t) = (R(t) - R(T_t)) / (|T_t| - 1) is
/// below `alpha`, where R(t) is the node's Gini times its weight share.
pub fn prune(tree: &Tree, totals: &[(f64, f64)], alpha: f64) -> Tree {
    let root_w = totals[0].0 + totals[0].1;
    let risk: Vec<f64> = totals.iter().map(|&(a, b)| (a + b) / root_w * gini2(a, b)).collect();
    let mut collapsed = vec![false; tree.nodes.len()];
    loop {
        let live = live_nodes(tree, &collapsed);
        // (subtree risk, leaves) bottom-up; children have larger ids.
        let mut sub = vec![(0.0, 0usize); tree.nodes.len()];
        let mut weakest: Option<(f64, usize)> = None;
        for &i in live.iter().rev() {
            match tree.nodes[i] {
                Node::Split { left, right, .. } if !collapsed[i] => {
                    let (rl, nl) = sub[left];
                    let (rr, nr) = sub[right];
                    sub[i] = (rl + rr, nl + nr);
                    let g = (risk[i] - sub[i].0) / (sub[i].1 - 1) as f64;
                    if weakest.is_none_or(|(wg, _)| g < wg) {
                        weakest = Some((g, i));
                    }
                }
                _ => sub[i] = (risk[i], 1),
            }
        }
        match weakest {
            Some((g, i)) if g < alpha => collapsed[i] = true,
            _ => break,
        }
    }
    compact(tree, &collapsed)
}

/// Node ids reachable from the root without descending into collapsed
/// nodes, in increasing order.
fn live_nodes(tree: &Tree, collapsed: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        out.push(i);
        if let Node::Split { left, right, .. } = tree.nodes[i] {
            if !collapsed[i] {
                stack.push(left);
                stack.push(right);
            }
        }
    }
    out.sort_unstable();
    out
}

fn compact(tree: &Tree, collapsed: &[bool]) -> Tree {
    fn copy(tree: &Tree, collapsed: &[bool], i: usize, out: &mut Vec<Node>) -> usize {
        let id = out.len();
        match tree.nodes[i] {
            Node::Split { feature, threshold, left, right, value, cover } if !collapsed[i] => {
                out.push(Node::Leaf { value, cover });
                let l = copy(tree, collapsed, left, out);
                let r = copy(tree, collapsed, right, out);
                out[id] = Node::Split { feature, threshold, left: l, right: r, value, cover };
            }
            ref n => out.push(Node::Leaf { value: n.value(), cover: n.cover() }),
        }
        id
    }
    let mut out = Vec::new();
    copy(tree, collapsed, 0, &mut out);
    Tree { nodes: out, n_features: tree.n_features }
}

/// Single CART classifier; leaves hold the weighted class-1 proportion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub tree: Tree,
    pub params: TreeParams,
}

impl DecisionTree {
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.tree.predict(x)
    }
}

pub fn fit_tree(data: &EncodedMatrix, params: &TreeParams) -> Result<DecisionTree> {
    params.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let data = canonical(data);
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let mut rng = seed::rng(0);
    let (tree, totals) = fit_cart(
        &data,
        &rows,
        params.max_depth,
        params.min_samples_leaf,
        params.min_samples_split,
        data.n_cols(),
        &mut rng,
    );
    let tree = if params.ccp_alpha > 0.0 { prune(&tree, &totals, params.ccp_alpha) } else { tree };
    Ok(DecisionTree { tree, params: *params })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub params: ForestParams,
    /// Misclassification rate at 0.5 over rows with at least one
    /// out-of-bag tree; `None` without bootstrap.
    pub oob_error: Option<f64>,
}

impl Forest {
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        if self.trees.is_empty() {
            return Ok(0.0);
        }
        let mut s = 0.0;
        for t in &self.trees {
            s += t.predict(x)?;
        }
        Ok(s / self.trees.len() as f64)
    }
}

pub fn fit_forest(data: &EncodedMatrix, params: &ForestParams) -> Result<Forest> {
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if params.min_samples_leaf == 0 || params.n_estimators == 0 || params.max_features == Some(0) {
        return Err(Error::InvalidParameter(format!("invalid forest parameters {params:?}")));
    }
    let data = canonical(data);
    let n = data.n_rows();
    let p = data.n_cols();
    let max_features = params.max_features.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize).min(p);
    let base = seed::derive(params.seed, "forest");
    let fitted: Vec<(Tree, Vec<usize>)> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive_index(base, t as u64));
            let rows: Vec<usize> = if params.bootstrap {
                let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            let (tree, _) = fit_cart(
                &data,
                &rows,
                params.max_depth,
                params.min_samples_leaf,
                params.min_samples_split,
                max_features,
                &mut rng,
            );
            (tree, rows)
        })
        .collect();

    let oob_error = params.bootstrap.then(|| {
        let mut sum = vec![0.0; n];
        let mut cnt = vec![0usize; n];
        for (tree, rows) in &fitted {
            let mut inbag = vec![false; n];
            for &r in rows {
                inbag[r] = true;
            }
            for i in (0..n).filter(|&i| !inbag[i]) {
                sum[i] += tree.predict(data.row(i)).expect("matching width");
                cnt[i] += 1;
            }
        }
        let scored: Vec<usize> = (0..n).filter(|&i| cnt[i] > 0).collect();
        let wrong = scored.iter().filter(|&&i| (sum[i] / cnt[i] as f64 >= 0.5) != data.labels[i]).count();
        if scored.is_empty() {
            f64::NAN
        } else {
            wrong as f64 / scored.len() as f64
        }
    });
    let oob_error = oob_error.filter(|e| e.is_finite());
    Ok(Forest { trees: fitted.into_iter().map(|(t, _)| t).collect(), n_features: p, params: *params, oob_error })
}

/// Weighted logistic loss gradient and hessian with respect to the margin.
pub fn logloss_grad_hess(label: bool, margin: f64, weight: f64) -> (f64, f64) {
    let p = sigmoid(margin);
    let y = f64::from(u8::from(label));
    (weight * (p - y), weight * p * (1.0 - p))
}

/// Σ w_i * logloss(y_i, sigmoid(margin_i)).
pub fn weighted_log_loss(labels: &[bool], weights: &[f64], margins: &[f64]) -> f64 {
    labels
        .iter()
        .zip(weights)
        .zip(margins)
        .map(|((&y, &w), &f)| {
            let sp = if f > 0.0 { f + (-f).exp().ln_1p() } else { f.exp().ln_1p() };
            w * (sp - if y { f } else { 0.0 })
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    /// Initial margin: log-odds of the weighted base rate.
    pub base_score: f64,
    /// Regression trees whose leaves already include the learning rate.
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub params: BoostParams,
    /// Weighted training log-loss after each round (index 0 = initial).
    pub train_loss: Vec<f64>,
}

impl BoostedEnsemble {
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        let mut f = self.base_score;
        for t in &self.trees {
            f += t.predict(x)?;
        }
        Ok(f)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.margin(x)?))
    }
}

struct BoostBuilder<'a> {
    data: &'a EncodedMatrix,
    stats: Vec<Stats>,
    params: &'a BoostParams,
    nodes: Vec<Node>,
}

impl BoostBuilder<'_> {
    fn weight(&self, s: Stats) -> f64 {
        let d = s.b + self.params.lambda;
        if d > 0.0 {
            -s.a / d
        } else {
            0.0
        }
    }

    fn grow(&mut self, rows: &[usize], features: &[usize], depth: usize) -> usize {
        let mut t = Stats::default();
        for &r in rows {
            t.add(self.stats[r]);
        }
        let id = self.nodes.len();
        let value = self.params.learning_rate * self.weight(t);
        self.nodes.push(Node::Leaf { value, cover: rows.len() as f64 });
        if depth >= self.params.max_depth || rows.len() < 2 {
            return id;
        }
        let (lambda, gamma, mcw) = (self.params.lambda, self.params.gamma, self.params.min_child_weight);
        let term = |s: Stats| {
            let d = s.b + lambda;
            if d > 0.0 {
                s.a * s.a / d
            } else {
                0.0
            }
        };
        let best = best_split(self.data, rows, features, &self.stats, |l, r| {
            if l.b < mcw || r.b < mcw {
                return None;
            }
            let mut both = l;
            both.add(r);
            let gain = 0.5 * (term(l) + term(r) - term(both)) - gamma;
            (gain > 0.0).then_some(gain)
        });
        let Some(best) = best else { return id };
        let (lrows, rrows) = partition(self.data, rows, best.feature, best.threshold);
        let left = self.grow(&lrows, features, depth + 1);
        let right = self.grow(&rrows, features, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            value,
            cover: rows.len() as f64,
        };
        id
    }
}

pub fn fit_gbdt(data: &EncodedMatrix, params: &BoostParams) -> Result<BoostedEnsemble> {
    params.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let data = canonical(data);
    let positives = data.positives();
    if positives == 0 || positives == data.n_rows() {
        return Err(Error::SingleClass);
    }
    let n = data.n_rows();
    let p = data.n_cols();
    let total: f64 = data.weights.iter().sum();
    let pos: f64 = (0..n).filter(|&i| data.labels[i]).map(|i| data.weights[i]).sum();
    let base = pos / total;
    let base_score = (base / (1.0 - base)).ln();
    let mut margins = vec![base_score; n];
    let mut train_loss = vec![weighted_log_loss(&data.labels, &data.weights, &margins)];
    let k = ((params.colsample * p as f64).floor() as usize).clamp(1, p.max(1));
    let mut rng = seed::substream(params.seed, "boost");
    let rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let stats = (0..n)
            .map(|i| {
                let (g, h) = logloss_grad_hess(data.labels[i], margins[i], data.weights[i]);
                Stats { a: g, b: h, n: 1.0 }
            })
            .collect();
        let features = choose_features(p, k, &mut rng);
        let mut b = BoostBuilder { data: &data, stats, params, nodes: Vec::new() };
        b.grow(&rows, &features, 0);
        let tree = Tree { nodes: b.nodes, n_features: p };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += tree.predict(data.row(i))?;
        }
        train_loss.push(weighted_log_loss(&data.labels, &data.weights, &margins));
        trees.push(tree);
    }
    Ok(BoostedEnsemble { base_score, trees, n_features: p, params: *params, train_loss })
}
