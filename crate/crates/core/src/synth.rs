//! Seeded generator of synthetic critical-event datasets.
//!
//! Categorical covariates follow per-level marginals (defaults: the combined
//! VRU sample of 1470 events), PET follows a truncated two-component normal
//! mixture on (0, 3), speeds follow gamma distributions, and labels are
//! Bernoulli draws from a ground-truth logistic model over the
//! baseline-dropped encoding. Covariates are independent of each other,
//! except that VRU movement and location are drawn conditionally on VRU type
//! so pedestrians always move on the crosswalk and never occupy the travel
//! lane while the overall marginals still match the configuration.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{
    sample_event, Column, CriticalEvent, EncodedMatrix, VruLocation, VruMovement, VruType, Variable,
};
use crate::seed::{self, Rng};

/// Positive rate of the source sample: 89 confirmed conflicts in 1470 events.
pub const DEFAULT_BASE_RATE: f64 = 89.0 / 1470.0;

/// Monte-Carlo sample size used to calibrate the intercept.
pub const CALIBRATION_ROWS: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PetMixture {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub sds: [f64; 2],
}

impl Default for PetMixture {
    fn default() -> Self {
        Self { weights: [0.45, 0.55], means: [1.0, 2.3], sds: [0.4, 0.4] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn with_mean(shape: f64, mean: f64) -> Self {
        Self { shape, scale: mean / shape }
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub a: String,
    pub b: String,
    pub coefficient: f64,
}

/// Logistic model generating the labels. Coefficients are keyed by encoded
/// column name (`pet`, `vru_signal.red`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
}

impl Default for GroundTruth {
    /// Coefficients estimated on the imbalanced combined VRU sample.
    fn default() -> Self {
        let coefficients = [
            ("veh_movement.through", -1.132),
            ("vru_signal.red", 1.185),
            ("proximity.low", -1.277),
            ("pet", -1.042),
            ("vru_conflict_speed", 0.163),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self { intercept: -1.793, coefficients, interactions: Vec::new() }
    }
}

/// Ground truth resolved against the encoding, ready for evaluation.
#[derive(Debug, Clone)]
pub struct ResolvedTruth {
    terms: Vec<(Column, f64)>,
    interactions: Vec<(Column, Column, f64)>,
}

fn resolve_column(name: &str) -> Result<Column> {
    EncodedMatrix::schema_columns(false)
        .into_iter()
        .chain(EncodedMatrix::schema_columns(true))
        .find(|c| c.name() == name)
        .or_else(|| {
            // Baseline levels of binary variables, e.g. `proximity.high`.
            let (var, level) = name.split_once('.')?;
            let var = Variable::from_name(var)?;
            let l = var.levels().iter().position(|x| *x == level)?;
            Some(Column::indicator(var, l))
        })
        .ok_or_else(|| Error::InvalidConfig(format!("unknown ground-truth column {name:?}")))
}

fn column_value(c: &Column, e: &CriticalEvent) -> f64 {
    match c.level {
        None => e.continuous(c.variable).expect("continuous"),
        Some(l) => f64::from(u8::from(e.level(c.variable) == Some(l))),
    }
}

impl GroundTruth {
    pub fn resolve(&self) -> Result<ResolvedTruth> {
        let terms = self
            .coefficients
            .iter()
            .map(|(k, &v)| Ok((resolve_column(k)?, v)))
            .collect::<Result<Vec<_>>>()?;
        let interactions = self
            .interactions
            .iter()
            .map(|t| Ok((resolve_column(&t.a)?, resolve_column(&t.b)?, t.coefficient)))
            .collect::<Result<Vec<_>>>()?;
        if self.coefficients.values().chain(self.interactions.iter().map(|t| &t.coefficient)).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite ground-truth coefficient".into()));
        }
        Ok(ResolvedTruth { terms, interactions })
    }
}

impl ResolvedTruth {
    /// Linear predictor without the intercept.
    pub fn margin(&self, e: &CriticalEvent) -> f64 {
        let linear: f64 = self.terms.iter().map(|(c, b)| b * column_value(c, e)).sum();
        let inter: f64 = self
            .interactions
            .iter()
            .map(|(a, b, coef)| coef * column_value(a, e) * column_value(b, e))
            .sum();
        linear + inter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Variable name to (level name to probability).
    pub categorical_marginals: BTreeMap<String, BTreeMap<String, f64>>,
    pub pet_mixture: PetMixture,
    /// Continuous speed field name to gamma parameters.
    pub speed_params: BTreeMap<String, GammaParams>,
    pub ground_truth: GroundTruth,
    /// When set, the intercept is recalibrated so the expected positive rate
    /// equals this value.
    pub base_rate: Option<f64>,
    pub seed: u64,
}

fn table(rows: &[(&str, f64)]) -> BTreeMap<String, f64> {
    let total: f64 = rows.iter().map(|r| r.1).sum();
    rows.iter().map(|&(k, v)| (k.to_string(), v / total)).collect()
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        let mut put = |v: Variable, rows: &[(&str, f64)]| {
            m.insert(v.name().to_string(), table(rows));
        };
        put(Variable::Proximity, &[("low", 50.0), ("high", 50.0)]);
        put(Variable::VruType, &[("pedestrian", 80.13), ("bicycle", 19.87)]);
        put(
            Variable::VehicleType,
            &[("bicycle", 1.22), ("bus", 7.96), ("car", 90.34), ("motorcycle", 0.48)],
        );
        put(
            Variable::ArrivedFirst,
            &[("bicycle", 7.69), ("pedestrian", 25.65), ("bus", 4.56), ("car", 61.90), ("motorcycle", 0.20)],
        );
        put(
            Variable::VruLocation,
            &[("crosswalk", 70.20), ("curb", 18.71), ("sidewalk", 0.54), ("travel_lane", 10.54)],
        );
        put(Variable::VehMovement, &[("through", 32.93), ("left_turn", 27.62), ("right_turn", 39.46)]);
        put(Variable::Nearside, &[("true", 64.15), ("false", 35.85)]);
        put(
            Variable::VruMovement,
            &[("crosswalk", 90.34), ("through", 5.37), ("left_turn", 2.59), ("right_turn", 1.70)],
        );
        put(Variable::VehSignal, &[("green", 94.90), ("red", 5.10)]);
        put(Variable::VruSignal, &[("green", 38.98), ("red", 61.02)]);
        put(
            Variable::Weather,
            &[("clear", 50.75), ("sunny", 32.79), ("precipitation", 4.08), ("overcast", 12.38)],
        );
        put(
            Variable::Lighting,
            &[
                ("daylight", 83.81),
                ("twilight", 1.97),
                ("dark_no_streetlights", 0.61),
                ("dark_with_streetlights", 8.91),
                ("evening", 4.69),
            ],
        );
        let speed_params = [
            (Variable::VehMedianSpeed, 13.3),
            (Variable::VehConflictSpeed, 14.4),
            (Variable::VruMedianSpeed, 4.6),
            (Variable::VruConflictSpeed, 5.3),
        ]
        .into_iter()
        .map(|(v, mean)| (v.name().to_string(), GammaParams::with_mean(4.0, mean)))
        .collect();
        Self {
            categorical_marginals: m,
            pet_mixture: PetMixture::default(),
            speed_params,
            ground_truth: GroundTruth::default(),
            base_rate: Some(DEFAULT_BASE_RATE),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_base_rate(mut self, base_rate: Option<f64>) -> Self {
        self.base_rate = base_rate;
        self
    }

    /// Probability vector for `var`, indexed like `var.levels()`.
    pub fn marginal(&self, var: Variable) -> Result<Vec<f64>> {
        let table = self
            .categorical_marginals
            .get(var.name())
            .ok_or_else(|| Error::InvalidConfig(format!("no marginals for {var}")))?;
        if let Some(k) = table.keys().find(|k| !var.levels().contains(&k.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown level {k:?} for {var}")));
        }
        let probs: Vec<f64> =
            var.levels().iter().map(|l| table.get(*l).copied().unwrap_or(0.0)).collect();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(format!("negative or non-finite probability for {var}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("marginals for {var} sum to {total}")));
        }
        Ok(probs)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.categorical_marginals.keys().find(|k| {
            Variable::from_name(k).is_none_or(|v| v.is_continuous())
        }) {
            return Err(Error::InvalidConfig(format!("marginals given for unknown variable {k:?}")));
        }
        for var in Variable::CATEGORICAL {
            self.marginal(var)?;
        }
        let mix = &self.pet_mixture;
        if mix.weights.iter().any(|w| !(*w >= 0.0)) || (mix.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("PET mixture weights must be non-negative and sum to 1".into()));
        }
        if mix.sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) || mix.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("PET mixture needs finite means and positive sds".into()));
        }
        for var in &Variable::CONTINUOUS[1..] {
            let g = self
                .speed_params
                .get(var.name())
                .ok_or_else(|| Error::InvalidConfig(format!("no gamma parameters for {var}")))?;
            if !(g.shape > 0.0 && g.scale > 0.0 && g.shape.is_finite() && g.scale.is_finite()) {
                return Err(Error::InvalidConfig(format!("gamma parameters for {var} must be positive")));
            }
        }
        if let Some(k) = self.speed_params.keys().find(|k| {
            Variable::from_name(k).is_none_or(|v| !v.is_continuous() || v == Variable::Pet)
        }) {
            return Err(Error::InvalidConfig(format!("speed parameters for unknown field {k:?}")));
        }
        if let Some(r) = self.base_rate {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidConfig(format!("base rate must lie in (0, 1), got {r}")));
            }
        }
        self.ground_truth.resolve()?;
        Ok(())
    }
}

/// Inverse-CDF draw from a discrete distribution.
fn draw_level(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn normalized(mut p: Vec<f64>) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

/// Conditional distributions (pedestrian, bicycle) whose mixture reproduces
/// `marginal`, given the pedestrian-only restriction `ped`.
fn split_by_vru(marginal: &[f64], ped: Vec<f64>, p_ped: f64) -> (Vec<f64>, Vec<f64>) {
    let p_bike = 1.0 - p_ped;
    if p_bike <= 0.0 {
        return (ped.clone(), ped);
    }
    let bike: Vec<f64> =
        marginal.iter().zip(&ped).map(|(m, q)| ((m - p_ped * q) / p_bike).max(0.0)).collect();
    (ped, normalized(bike))
}

/// Samples event covariates (no label) from a validated configuration.
pub struct CovariateSampler {
    marginals: Vec<(Variable, Vec<f64>)>,
    movement: (Vec<f64>, Vec<f64>),
    location: (Vec<f64>, Vec<f64>),
    mixture: [Normal<f64>; 2],
    mix_weight: f64,
    speeds: Vec<(Variable, Gamma<f64>)>,
}

impl CovariateSampler {
    pub fn new(config: &GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let marginals = Variable::CATEGORICAL
            .iter()
            .map(|&v| Ok((v, config.marginal(v)?)))
            .collect::<Result<Vec<_>>>()?;
        let p_ped = config.marginal(Variable::VruType)?[VruType::Pedestrian.index()];

        let movement_m = config.marginal(Variable::VruMovement)?;
        let mut ped_movement = vec![0.0; movement_m.len()];
        ped_movement[VruMovement::Crosswalk.index()] = 1.0;
        let movement = split_by_vru(&movement_m, ped_movement, p_ped);

        let location_m = config.marginal(Variable::VruLocation)?;
        let mut ped_location = location_m.clone();
        ped_location[VruLocation::TravelLane.index()] = 0.0;
        let ped_location = if ped_location.iter().sum::<f64>() > 0.0 {
            normalized(ped_location)
        } else {
            let mut p = vec![0.0; location_m.len()];
            p[VruLocation::Crosswalk.index()] = 1.0;
            p
        };
        let location = split_by_vru(&location_m, ped_location, p_ped);

        let mix = &config.pet_mixture;
        let normal = |i: usize| {
            Normal::new(mix.means[i], mix.sds[i]).map_err(|e| Error::InvalidConfig(e.to_string()))
        };
        let speeds = Variable::CONTINUOUS[1..]
            .iter()
            .map(|&v| {
                let g = config.speed_params[v.name()];
                let dist = Gamma::new(g.shape, g.scale).map_err(|e| Error::InvalidConfig(e.to_string()))?;
                Ok((v, dist))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            marginals,
            movement,
            location,
            mixture: [normal(0)?, normal(1)?],
            mix_weight: mix.weights[0],
            speeds,
        })
    }

    fn pet(&self, rng: &mut Rng) -> f64 {
        loop {
            let component = usize::from(rng.random::<f64>() >= self.mix_weight);
            let x = self.mixture[component].sample(rng);
            if x > 0.0 && x < crate::event_model::CRITICAL_PET {
                return x;
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> CriticalEvent {
        let mut e = sample_event();
        e.label = None;
        for (var, probs) in &self.marginals {
            let level = draw_level(probs, rng);
            e.set_level(*var, level);
        }
        let ped = e.vru_type == VruType::Pedestrian;
        let pick = |pair: &(Vec<f64>, Vec<f64>)| if ped { pair.0.clone() } else { pair.1.clone() };
        e.set_level(Variable::VruMovement, draw_level(&pick(&self.movement), rng));
        e.set_level(Variable::VruLocation, draw_level(&pick(&self.location), rng));
        e.pet = self.pet(rng);
        for (var, dist) in &self.speeds {
            e.set_continuous(*var, dist.sample(rng));
        }
        e
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let ez = z.exp();
        ez / (1.0 + ez)
    }
}

pub const INTERCEPT_BRACKET: (f64, f64) = (-15.0, 15.0);

/// Intercept at which the mean model probability over margins equals
/// `base_rate`, by bisection over [-15, 15].
pub fn calibrate_intercept_from_margins(margins: &[f64], base_rate: f64) -> Result<f64> {
    if !(base_rate > 0.0 && base_rate < 1.0) {
        return Err(Error::InvalidParameter(format!("base rate must lie in (0, 1), got {base_rate}")));
    }
    if margins.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rate = |b0: f64| margins.iter().map(|m| sigmoid(b0 + m)).sum::<f64>() / margins.len() as f64;
    let (mut lo, mut hi) = INTERCEPT_BRACKET;
    if rate(lo) > base_rate || rate(hi) < base_rate {
        return Err(Error::NoRoot { lo, hi, base_rate });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < base_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibrates the intercept over `CALIBRATION_ROWS` covariate draws.
pub fn calibrate_intercept<F>(truth: &GroundTruth, mut sampler: F, base_rate: f64, seed: u64) -> Result<f64>
where
    F: FnMut(&mut Rng) -> CriticalEvent,
{
    let resolved = truth.resolve()?;
    let mut rng = seed::substream(seed, "calibrate");
    let margins: Vec<f64> = (0..CALIBRATION_ROWS).map(|_| resolved.margin(&sampler(&mut rng))).collect();
    calibrate_intercept_from_margins(&margins, base_rate)
}

/// Intercept actually used by the generator for this configuration.
pub fn effective_intercept(config: &GeneratorConfig) -> Result<f64> {
    match config.base_rate {
        None => Ok(config.ground_truth.intercept),
        Some(rate) => {
            let sampler = CovariateSampler::new(config)?;
            calibrate_intercept(&config.ground_truth, |rng| sampler.sample(rng), rate, config.seed)
        }
    }
}

/// Generates `n` labeled events, deterministically for `config.seed`.
pub fn generate_dataset(config: &GeneratorConfig, n: usize) -> Result<Vec<CriticalEvent>> {
    let sampler = CovariateSampler::new(config)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let truth = config.ground_truth.resolve()?;
    let intercept = effective_intercept(config)?;
    let mut cov_rng = seed::substream(config.seed, "covariates");
    let mut label_rng = seed::substream(config.seed, "labels");
    Ok((0..n)
        .map(|_| {
            let mut e = sampler.sample(&mut cov_rng);
            let p = sigmoid(intercept + truth.margin(&e));
            e.label = Some(label_rng.random::<f64>() < p);
            e
        })
        .collect())
}
