//! Classification of low-PET critical events at signalized intersections as
//! confirmed vehicle/VRU conflicts.
//!
//! The crate covers the full modeling pipeline: the event schema and
//! encodings ([`event_model`]), a calibrated synthetic generator
//! ([`synth`]), imbalance handling ([`imbalance`]), logistic regression
//! ([`logit`]), CART / random forest / gradient boosting ([`trees`]),
//! threshold-aware evaluation ([`eval`]), Bayesian hyperparameter search
//! ([`tune`]) and Shapley attributions ([`explain`]).

pub mod error;
pub mod eval;
pub mod explain;
pub mod event_model;
pub mod imbalance;
pub mod logit;
pub mod model;
pub mod seed;
pub mod synth;
pub mod trees;
pub mod tune;

pub use error::{Error, Result};
