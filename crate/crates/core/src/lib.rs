//! Mamdani fuzzy inference and a goalkeeper quality scoring model built on it.
//!
//! - [`fuzzy`]: membership functions, fuzzy sets, set operators, linguistic variables
//! - [`inference`]: rule bases and the fuzzify/fire/implicate/aggregate/defuzzify pipeline
//! - [`gk`]: goalkeeper attributes, calibration, generated rule base, scoring and ranking
//! - [`ruledsl`]: the `.frb` rule-base text format
//! - [`report`]: the JSON evaluation report shared by the CLI and the service
//! - [`store`] and [`service`]: candidate persistence and the HTTP API

pub mod fuzzy;
pub mod gk;
pub mod inference;
pub mod report;
pub mod ruledsl;
pub mod service;
pub mod store;

pub use fuzzy::{FuzzySet, LinguisticVariable, PiecewiseLinearMF, TConorm, TNorm, Universe};
pub use gk::{
    classify_level, default_calibration, explain, generate_gk_rulebase, rank_candidates, score_gk, Attribute,
    AttributeValue, GKCalibration, GKProfile, GkModel, QualityLevel, RankedCandidate, ScoredCandidate,
};
pub use inference::{EvaluationTrace, InferenceConfig, Input, Rule, RuleBase};
pub use ruledsl::{format_rulebase, parse_rulebase};
