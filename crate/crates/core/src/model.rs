//! Uniform interface over the four model families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{one_hot_encode, CriticalEvent, EncodedMatrix};
use crate::imbalance::Balance;
use crate::logit::{fit_logistic, FittedLogit, LogitOptions};
use crate::trees::{
    fit_forest, fit_gbdt, fit_tree, BoostParams, BoostedEnsemble, DecisionTree, Forest, ForestParams, TreeParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logit,
    Dt,
    Rf,
    Gbdt,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Logit, Family::Dt, Family::Rf, Family::Gbdt];

    pub fn name(self) -> &'static str {
        match self {
            Family::Logit => "logit",
            Family::Dt => "dt",
            Family::Rf => "rf",
            Family::Gbdt => "gbdt",
        }
    }

    /// Logistic regression needs reference levels dropped; trees use every
    /// indicator.
    pub fn drop_baseline(self) -> bool {
        self == Family::Logit
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub logit: LogitOptions,
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub boost: BoostParams,
}

impl ModelParams {
    /// Seeds the stochastic learners.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.forest.seed = seed;
        self.boost.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Logit(FittedLogit),
    Dt(DecisionTree),
    Rf(Forest),
    Gbdt(BoostedEnsemble),
}

impl Model {
    pub fn family(&self) -> Family {
        match self {
            Model::Logit(_) => Family::Logit,
            Model::Dt(_) => Family::Dt,
            Model::Rf(_) => Family::Rf,
            Model::Gbdt(_) => Family::Gbdt,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Logit(m) => m.n_features(),
            Model::Dt(m) => m.tree.n_features,
            Model::Rf(m) => m.n_features,
            Model::Gbdt(m) => m.n_features,
        }
    }

    /// The scale attributions are additive on: log-odds for logistic
    /// regression and boosting, probability for a tree or a forest.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Logit(m) => m.margin(x),
            Model::Dt(m) => m.predict_proba(x),
            Model::Rf(m) => m.predict_proba(x),
            Model::Gbdt(m) => m.margin(x),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Logit(m) => m.predict_proba(x),
            Model::Dt(m) => m.predict_proba(x),
            Model::Rf(m) => m.predict_proba(x),
            Model::Gbdt(m) => m.predict_proba(x),
        }
    }

    pub fn predict_matrix(&self, data: &EncodedMatrix) -> Result<Vec<f64>> {
        if data.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: data.n_cols() });
        }
        data.rows().map(|r| self.predict_proba(r)).collect()
    }

    /// Encodes events with the layout this model was trained on.
    pub fn encode(&self, events: &[CriticalEvent]) -> Result<EncodedMatrix> {
        one_hot_encode(events, self.family().drop_baseline())
    }

    pub fn predict_events(&self, events: &[CriticalEvent]) -> Result<Vec<f64>> {
        self.predict_matrix(&self.encode(events)?)
    }
}

/// Fits a model on an encoded training matrix. A full encoding is reduced
/// to the baseline-dropped layout for logistic regression.
pub fn fit_model(family: Family, train: &EncodedMatrix, params: &ModelParams) -> Result<Model> {
    Ok(match family {
        Family::Logit => {
            let data = train.without_baselines()?;
            Model::Logit(fit_logistic(&data, &params.logit)?)
        }
        Family::Dt => Model::Dt(fit_tree(train, &params.tree)?),
        Family::Rf => Model::Rf(fit_forest(train, &params.forest)?),
        Family::Gbdt => Model::Gbdt(fit_gbdt(train, &params.boost)?),
    })
}

/// Encodes, rebalances and fits.
pub fn fit_events(family: Family, events: &[CriticalEvent], balance: &Balance, params: &ModelParams) -> Result<Model> {
    let data = balance.apply(one_hot_encode(events, false)?)?;
    fit_model(family, &data, params)
}
