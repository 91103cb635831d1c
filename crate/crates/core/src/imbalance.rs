//! Class-imbalance handling: inverse-frequency class weights and SMOTE-NC
//! oversampling for mixed nominal/continuous data.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{EncodedMatrix, RowOrigin};
use crate::seed;

/// Class weights `w_c = N / (2 n_c)`, so both classes carry equal total mass
/// and the mean weight is 1.
pub fn class_weights(labels: &[bool]) -> Result<(f64, f64)> {
    let n1 = labels.iter().filter(|&&y| y).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    let n = labels.len() as f64;
    Ok((n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)))
}

/// Replaces row weights with class weights.
pub fn apply_class_weights(mut data: EncodedMatrix) -> Result<EncodedMatrix> {
    let (w0, w1) = class_weights(&data.labels)?;
    data.weights = data.labels.iter().map(|&y| if y { w1 } else { w0 }).collect();
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteParams {
    pub k_neighbors: usize,
    /// Minority/majority count ratio after augmentation.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self { k_neighbors: 5, target_ratio: 1.0, seed: 0 }
    }
}

/// Training-set rebalancing strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Balance {
    None,
    Weights,
    Smote(SmoteParams),
}

impl Balance {
    pub fn name(&self) -> &'static str {
        match self {
            Balance::None => "none",
            Balance::Weights => "weights",
            Balance::Smote(_) => "smote",
        }
    }

    pub fn apply(&self, data: EncodedMatrix) -> Result<EncodedMatrix> {
        match self {
            Balance::None => Ok(data),
            Balance::Weights => apply_class_weights(data),
            Balance::Smote(params) => smote_nc(&data, params),
        }
    }
}

/// Number of rows SMOTE appends: enough to lift the minority count to
/// `floor(target_ratio * majority)`.
pub fn synthetic_count(minority: usize, majority: usize, target_ratio: f64) -> usize {
    let target = (target_ratio * majority as f64 + 1e-9).floor() as usize;
    target.saturating_sub(minority)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// SMOTE-NC oversampling on a full (baseline-kept) encoding.
///
/// Distances combine squared standardized differences of continuous columns
/// with a `med^2` penalty for every nominal variable that differs, where
/// `med` is the median minority-class standard deviation of the continuous
/// columns. Each synthetic row interpolates the continuous columns between a
/// random minority row and one of its k nearest minority neighbours, and
/// takes every nominal variable's most frequent value among the k neighbours
/// (ties go to the seed row's value, then to the nearer neighbour).
pub fn smote_nc(data: &EncodedMatrix, params: &SmoteParams) -> Result<EncodedMatrix> {
    if data.drop_baseline() {
        return Err(Error::InvalidParameter("SMOTE-NC needs the full one-hot encoding".into()));
    }
    if !(params.target_ratio > 0.0 && params.target_ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target ratio must lie in (0, 1], got {}",
            params.target_ratio
        )));
    }
    if params.k_neighbors == 0 {
        return Err(Error::InvalidParameter("k_neighbors must be at least 1".into()));
    }
    let groups = data.groups();
    let continuous: Vec<usize> = data
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_continuous())
        .map(|(j, _)| j)
        .collect();
    if continuous.is_empty() {
        return Err(Error::InvalidParameter("SMOTE-NC needs at least one continuous column".into()));
    }
    let nominal: Vec<_> =
        groups.iter().filter(|g| data.columns()[g.start].level.is_some()).copied().collect();

    let positives = data.positives();
    let negatives = data.n_rows() - positives;
    let minority_label = positives <= negatives;
    let (n_min, n_maj) = if minority_label { (positives, negatives) } else { (negatives, positives) };
    let minority: Vec<usize> = (0..data.n_rows()).filter(|&i| data.labels[i] == minority_label).collect();
    let k = params.k_neighbors;
    if n_min <= k {
        return Err(Error::TooFewMinority { have: n_min, k });
    }

    let stds: Vec<f64> = continuous
        .iter()
        .map(|&j| {
            let vals: Vec<f64> = minority.iter().map(|&i| data.value(i, j)).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            var.sqrt()
        })
        .collect();
    let med = median(stds.clone());
    let penalty = med * med;
    let scale: Vec<f64> = stds.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect();

    let distance = |a: usize, b: usize| -> f64 {
        let (ra, rb) = (data.row(a), data.row(b));
        let cont: f64 = continuous
            .iter()
            .zip(&scale)
            .map(|(&j, s)| ((ra[j] - rb[j]) / s).powi(2))
            .sum();
        let mismatches = nominal.iter().filter(|g| ra[g.range()] != rb[g.range()]).count();
        cont + penalty * mismatches as f64
    };

    // Lazily computed neighbour lists, indexed by position in `minority`.
    let mut neighbors: Vec<Option<Vec<usize>>> = vec![None; n_min];
    let mut knn = |pos: usize| -> Vec<usize> {
        if let Some(nb) = &neighbors[pos] {
            return nb.clone();
        }
        let a = minority[pos];
        let mut cand: Vec<(f64, usize)> =
            minority.iter().filter(|&&b| b != a).map(|&b| (distance(a, b), b)).collect();
        cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let nb: Vec<usize> = cand.into_iter().take(k).map(|(_, b)| b).collect();
        neighbors[pos] = Some(nb.clone());
        nb
    };

    let n_new = synthetic_count(n_min, n_maj, params.target_ratio);
    let mut out = data.clone();
    let mut rng = seed::substream(params.seed, "smote");
    let mut row = vec![0.0; data.n_cols()];
    for _ in 0..n_new {
        let pos = rng.random_range(0..n_min);
        let seed_row = minority[pos];
        let nb = knn(pos);
        let partner = nb[rng.random_range(0..nb.len())];
        let u: f64 = rng.random();
        let (rs, rp) = (data.row(seed_row), data.row(partner));
        for &j in &continuous {
            row[j] = rs[j] + u * (rp[j] - rs[j]);
        }
        for g in &nominal {
            let r = g.range();
            let mut best: Option<(&[f64], usize)> = None;
            for &n in &nb {
                let cand = &data.row(n)[r.clone()];
                let count = nb.iter().filter(|&&m| data.row(m)[r.clone()] == *cand).count();
                best = match best {
                    None => Some((cand, count)),
                    Some((b, c)) if count > c || (count == c && cand == &rs[r.clone()] && b != &rs[r.clone()]) => {
                        Some((cand, count))
                    }
                    keep => keep,
                };
            }
            let (value, _) = best.expect("k >= 1");
            row[r].copy_from_slice(value);
        }
        out.push_row(&row, minority_label, 1.0, RowOrigin::Synthetic { seed: seed_row, neighbor: partner });
    }
    Ok(out)
}
