//! Mamdani inference over crisp inputs: fuzzify, fire, implicate, aggregate,
//! defuzzify.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::fuzzy::{FuzzyError, FuzzySet, LinguisticVariable, TNorm, DEFAULT_GRID_POINTS};

/// Inputs this close outside a universe are clamped onto it.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Degrees within this distance of the maximum count as maximal for mean-of-max.
const MAX_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("variable `{0}` is declared more than once")]
    DuplicateVariable(String),
    #[error("rule {rule}: unknown variable `{variable}`")]
    UnknownVariable { rule: usize, variable: String },
    #[error("rule {rule}: variable `{variable}` has no term `{term}`")]
    UnknownTerm { rule: usize, variable: String, term: String },
    #[error("rule {rule}: consequent variable `{variable}` is not the output variable")]
    ConsequentNotOutput { rule: usize, variable: String },
    #[error("rule {rule}: antecedent variable `{variable}` is not an input variable")]
    AntecedentNotInput { rule: usize, variable: String },
    #[error("rule antecedent must not be empty")]
    EmptyAntecedent,
    #[error("variable `{0}` appears twice in one antecedent")]
    DuplicateAntecedent(String),
    #[error("rule base has no rules")]
    NoRules,
    #[error("rule base has no input variables")]
    NoInputs,
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("input `{variable}` = {value} is outside [{lo}, {hi}]")]
    InputOutOfRange { variable: String, value: f64, lo: f64, hi: f64 },
    #[error("input `{0}` is not a finite number")]
    NonFiniteInput(String),
    #[error("variable `{variable}` has no term `{label}`")]
    UnknownLabel { variable: String, label: String },
    #[error("no degrees supplied for variable `{0}`")]
    MissingDegrees(String),
    #[error("inputs do not match the rule base (missing: [{}], unexpected: [{}])", .missing.join(", "), .unexpected.join(", "))]
    InputMismatch { missing: Vec<String>, unexpected: Vec<String> },
    #[error("cannot aggregate an empty list of output sets")]
    EmptyAggregation,
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// How a rule's output set is limited by its firing strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Implication {
    /// `min(strength, μ)`
    #[default]
    Clip,
    /// `strength · μ`
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Defuzzifier {
    #[default]
    Centroid,
    MeanOfMax,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownChoice {
    kind: &'static str,
    value: String,
}

macro_rules! named_choice {
    ($ty:ty, $kind:literal, { $($variant:path => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($variant => $name),+
                }
            }
        }

        impl FromStr for $ty {
            type Err = UnknownChoice;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.replace('-', "_").as_str() {
                    $($name => Ok($variant),)+
                    _ => Err(UnknownChoice { kind: $kind, value: s.to_string() }),
                }
            }
        }
    };
}

named_choice!(Implication, "implication", { Implication::Clip => "clip", Implication::Scale => "scale" });
named_choice!(Aggregation, "aggregation", { Aggregation::Max => "max" });
named_choice!(Defuzzifier, "defuzzifier", { Defuzzifier::Centroid => "centroid", Defuzzifier::MeanOfMax => "mean_of_max" });

impl FromStr for TNorm {
    type Err = UnknownChoice;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" => Ok(TNorm::Min),
            "product" => Ok(TNorm::Product),
            _ => Err(UnknownChoice { kind: "and-norm", value: s.to_string() }),
        }
    }
}

/// Operator choices for the inference engine. Defaults give max–min
/// composition with centroid defuzzification on a 1001-point grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceConfig {
    pub and_norm: TNorm,
    pub implication: Implication,
    pub aggregation: Aggregation,
    pub defuzzifier: Defuzzifier,
    pub grid_points: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            and_norm: TNorm::Min,
            implication: Implication::Clip,
            aggregation: Aggregation::Max,
            defuzzifier: Defuzzifier::Centroid,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// `IF x1 is A1 AND ... AND xm is Am THEN y is B`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    antecedent: Vec<(String, String)>,
    consequent: (String, String),
}

impl Rule {
    pub fn new(
        antecedent: Vec<(String, String)>,
        consequent: (String, String),
    ) -> Result<Self, InferenceError> {
        if antecedent.is_empty() {
            return Err(InferenceError::EmptyAntecedent);
        }
        for (i, (var, _)) in antecedent.iter().enumerate() {
            if antecedent[..i].iter().any(|(v, _)| v == var) {
                return Err(InferenceError::DuplicateAntecedent(var.clone()));
            }
        }
        Ok(Rule { antecedent, consequent })
    }

    pub fn antecedent(&self) -> &[(String, String)] {
        &self.antecedent
    }

    pub fn consequent(&self) -> (&str, &str) {
        (&self.consequent.0, &self.consequent.1)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        for (i, (var, term)) in self.antecedent.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{var} is {term}")?;
        }
        write!(f, " THEN {} is {}", self.consequent.0, self.consequent.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ResolvedRule {
    antecedent: Vec<(usize, usize)>,
    consequent: usize,
}

/// Input variables, one output variable, and the rules tying them together.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    inputs: Vec<LinguisticVariable>,
    output: LinguisticVariable,
    rules: Vec<Rule>,
    config: InferenceConfig,
    resolved: Vec<ResolvedRule>,
}

impl RuleBase {
    /// Validates names and resolves every rule. Every universe is set to
    /// `config.grid_points`.
    pub fn new(
        inputs: Vec<LinguisticVariable>,
        output: LinguisticVariable,
        rules: Vec<Rule>,
        config: InferenceConfig,
    ) -> Result<Self, InferenceError> {
        if config.grid_points < 2 {
            return Err(InferenceError::GridTooSmall(config.grid_points));
        }
        if inputs.is_empty() {
            return Err(InferenceError::NoInputs);
        }
        if rules.is_empty() {
            return Err(InferenceError::NoRules);
        }
        let mut seen: Vec<&str> = Vec::new();
        for name in inputs.iter().map(|v| v.name()).chain(std::iter::once(output.name())) {
            if seen.contains(&name) {
                return Err(InferenceError::DuplicateVariable(name.to_string()));
            }
            seen.push(name);
        }
        let inputs = inputs
            .iter()
            .map(|v| v.materialized().regrid(config.grid_points))
            .collect::<Result<Vec<_>, _>>()?;
        let output = output.materialized().regrid(config.grid_points)?;

        let resolved = rules
            .iter()
            .enumerate()
            .map(|(idx, rule)| resolve(idx, rule, &inputs, &output))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RuleBase { inputs, output, rules, config, resolved })
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        &self.inputs
    }

    pub fn output(&self) -> &LinguisticVariable {
        &self.output
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn config(&self) -> &InferenceConfig {
        &self.config
    }

    pub fn input(&self, name: &str) -> Option<&LinguisticVariable> {
        self.inputs.iter().find(|v| v.name() == name)
    }

    /// Same rule base under different operator choices.
    pub fn with_config(&self, config: InferenceConfig) -> Result<Self, InferenceError> {
        Self::new(self.inputs.clone(), self.output.clone(), self.rules.clone(), config)
    }

    /// Consequent set of rule `index`.
    pub fn consequent_set(&self, index: usize) -> &FuzzySet {
        &self.output.terms()[self.resolved[index].consequent]
    }

    /// Runs the full pipeline on crisp (or label) inputs.
    pub fn evaluate(&self, inputs: &BTreeMap<String, Input>) -> Result<EvaluationTrace, InferenceError> {
        let missing: Vec<String> = self
            .inputs
            .iter()
            .filter(|v| !inputs.contains_key(v.name()))
            .map(|v| v.name().to_string())
            .collect();
        let unexpected: Vec<String> =
            inputs.keys().filter(|k| self.input(k).is_none()).cloned().collect();
        if !missing.is_empty() || !unexpected.is_empty() {
            return Err(InferenceError::InputMismatch { missing, unexpected });
        }

        let fuzzified = self
            .inputs
            .iter()
            .map(|var| {
                let degrees = match &inputs[var.name()] {
                    Input::Crisp(x) => fuzzify_singleton(var, *x)?,
                    Input::Label(label) => fuzzify_label(var, label)?,
                };
                Ok((var.name().to_string(), degrees))
            })
            .collect::<Result<Vec<_>, InferenceError>>()?;

        let norm = self.config.and_norm;
        let mut term_strength = vec![None::<f64>; self.output.terms().len()];
        let per_rule = self
            .resolved
            .iter()
            .enumerate()
            .map(|(rule, r)| {
                let strength = r
                    .antecedent
                    .iter()
                    .map(|&(v, t)| fuzzified[v].1.degrees[t].1)
                    .reduce(|a, b| norm.apply(a, b))
                    .unwrap_or(0.0);
                let slot = &mut term_strength[r.consequent];
                *slot = Some(slot.map_or(strength, |s| s.max(strength)));
                RuleFiring { rule, strength }
            })
            .collect();

        // Clip and scale are monotone in the strength, so implicating each
        // consequent term once at its strongest firing gives the same max
        // envelope as implicating every rule separately.
        let implicated: Vec<FuzzySet> = term_strength
            .iter()
            .zip(self.output.terms())
            .filter_map(|(s, term)| s.map(|s| implicate(term, s, self.config.implication)))
            .collect();
        let aggregated = aggregate(&implicated)?.with_label(self.output.name());
        let defuzz = defuzzify(&aggregated, self.config.defuzzifier);

        Ok(EvaluationTrace {
            fuzzified,
            per_rule,
            aggregated_output: aggregated,
            crisp_output: defuzz.value,
            degenerate: defuzz.degenerate,
        })
    }

    /// Convenience wrapper for all-numeric inputs.
    pub fn evaluate_crisp(&self, inputs: &[(&str, f64)]) -> Result<EvaluationTrace, InferenceError> {
        let map = inputs.iter().map(|&(k, v)| (k.to_string(), Input::Crisp(v))).collect();
        self.evaluate(&map)
    }
}

fn resolve(
    idx: usize,
    rule: &Rule,
    inputs: &[LinguisticVariable],
    output: &LinguisticVariable,
) -> Result<ResolvedRule, InferenceError> {
    let antecedent = rule
        .antecedent
        .iter()
        .map(|(var, term)| {
            let v = match inputs.iter().position(|v| v.name() == var) {
                Some(v) => v,
                None if output.name() == var => {
                    return Err(InferenceError::AntecedentNotInput { rule: idx, variable: var.clone() })
                }
                None => return Err(InferenceError::UnknownVariable { rule: idx, variable: var.clone() }),
            };
            let t = inputs[v].term_index(term).ok_or_else(|| InferenceError::UnknownTerm {
                rule: idx,
                variable: var.clone(),
                term: term.clone(),
            })?;
            Ok((v, t))
        })
        .collect::<Result<_, _>>()?;
    let (out_var, out_term) = &rule.consequent;
    if out_var != output.name() {
        if inputs.iter().any(|v| v.name() == out_var) {
            return Err(InferenceError::ConsequentNotOutput { rule: idx, variable: out_var.clone() });
        }
        return Err(InferenceError::UnknownVariable { rule: idx, variable: out_var.clone() });
    }
    let consequent = output.term_index(out_term).ok_or_else(|| InferenceError::UnknownTerm {
        rule: idx,
        variable: out_var.clone(),
        term: out_term.clone(),
    })?;
    Ok(ResolvedRule { antecedent, consequent })
}

/// A crisp reading, or a term label standing for full membership in that term.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Crisp(f64),
    Label(String),
}

impl From<f64> for Input {
    fn from(x: f64) -> Self {
        Input::Crisp(x)
    }
}

/// Degree of membership per term label, in term declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "BTreeMap<String, f64>")]
pub struct TermDegrees {
    degrees: Vec<(String, f64)>,
}

impl From<TermDegrees> for BTreeMap<String, f64> {
    fn from(t: TermDegrees) -> Self {
        t.degrees.into_iter().collect()
    }
}

impl TermDegrees {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.degrees.iter().find(|(l, _)| l == label).map(|&(_, d)| d)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.degrees.iter().map(|(l, d)| (l.as_str(), *d))
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }
}

/// Singleton fuzzification of a crisp value.
pub fn fuzzify_singleton(variable: &LinguisticVariable, x: f64) -> Result<TermDegrees, InferenceError> {
    if !x.is_finite() {
        return Err(InferenceError::NonFiniteInput(variable.name().to_string()));
    }
    let u = variable.universe();
    let x = if u.contains(x) {
        x
    } else if x >= u.lo() - CLAMP_TOLERANCE && x <= u.hi() + CLAMP_TOLERANCE {
        x.clamp(u.lo(), u.hi())
    } else {
        return Err(InferenceError::InputOutOfRange {
            variable: variable.name().to_string(),
            value: x,
            lo: u.lo(),
            hi: u.hi(),
        });
    };
    Ok(TermDegrees {
        degrees: variable.terms().iter().map(|t| (t.label().to_string(), t.degree(x))).collect(),
    })
}

/// Full membership in `label`, zero in every other term.
pub fn fuzzify_label(variable: &LinguisticVariable, label: &str) -> Result<TermDegrees, InferenceError> {
    if variable.term(label).is_none() {
        return Err(InferenceError::UnknownLabel {
            variable: variable.name().to_string(),
            label: label.to_string(),
        });
    }
    Ok(TermDegrees {
        degrees: variable
            .terms()
            .iter()
            .map(|t| (t.label().to_string(), if t.label() == label { 1.0 } else { 0.0 }))
            .collect(),
    })
}

/// Degree to which the antecedent of `rule` holds.
pub fn firing_strength(
    rule: &Rule,
    fuzzified: &BTreeMap<String, TermDegrees>,
    and_norm: TNorm,
) -> Result<f64, InferenceError> {
    let mut acc: Option<f64> = None;
    for (var, term) in &rule.antecedent {
        let degrees = fuzzified.get(var).ok_or_else(|| InferenceError::MissingDegrees(var.clone()))?;
        let d = degrees.get(term).ok_or_else(|| InferenceError::UnknownLabel {
            variable: var.clone(),
            label: term.clone(),
        })?;
        acc = Some(acc.map_or(d, |a| and_norm.apply(a, d)));
    }
    Ok(acc.unwrap_or(0.0))
}

/// Output set of one rule, sampled on the consequent's universe grid.
pub fn implicate(consequent: &FuzzySet, strength: f64, implication: Implication) -> FuzzySet {
    debug_assert!((0.0..=1.0).contains(&strength), "strength {strength} outside [0, 1]");
    let s = strength.clamp(0.0, 1.0);
    let u = *consequent.universe();
    let degrees = u
        .grid()
        .map(|x| {
            let mu = consequent.degree(x);
            match implication {
                Implication::Clip => s.min(mu),
                Implication::Scale => s * mu,
            }
        })
        .collect();
    FuzzySet::from_grid(consequent.label(), u, degrees).expect("grid sampling preserves invariants")
}

/// Pointwise max of rule outputs on the shared grid.
pub fn aggregate(outputs: &[FuzzySet]) -> Result<FuzzySet, InferenceError> {
    let (first, rest) = outputs.split_first().ok_or(InferenceError::EmptyAggregation)?;
    let u = *first.universe();
    if rest.iter().any(|s| s.universe() != &u) {
        return Err(FuzzyError::UniverseMismatch.into());
    }
    let mut degrees = first.samples();
    for set in rest {
        for (acc, x) in degrees.iter_mut().zip(u.grid()) {
            *acc = acc.max(set.degree(x));
        }
    }
    Ok(FuzzySet::from_grid(first.label(), u, degrees)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defuzzification {
    pub value: f64,
    /// The set was empty; `value` is the universe midpoint.
    pub degenerate: bool,
}

/// Collapses a fuzzy set to a crisp value.
///
/// The centroid is the exact center of area of the piecewise-linear
/// membership function over the universe. Mean-of-max averages the grid
/// points at the maximum degree.
pub fn defuzzify(set: &FuzzySet, method: Defuzzifier) -> Defuzzification {
    let u = set.universe();
    let degenerate = Defuzzification { value: u.midpoint(), degenerate: true };
    match method {
        Defuzzifier::Centroid => {
            let (area, moment) = area_and_moment(set);
            if area <= 0.0 {
                return degenerate;
            }
            Defuzzification { value: (moment / area).clamp(u.lo(), u.hi()), degenerate: false }
        }
        Defuzzifier::MeanOfMax => {
            let samples = set.samples();
            let peak = samples.iter().copied().fold(0.0, f64::max);
            if peak <= 0.0 {
                return degenerate;
            }
            let (sum, n) = u
                .grid()
                .zip(&samples)
                .filter(|(_, &d)| d >= peak - MAX_TIE_TOLERANCE)
                .fold((0.0, 0usize), |(s, n), (x, _)| (s + x, n + 1));
            Defuzzification { value: sum / n as f64, degenerate: false }
        }
    }
}

/// `∫μ` and `∫xμ` over the universe, integrating each linear piece exactly.
fn area_and_moment(set: &FuzzySet) -> (f64, f64) {
    let u = set.universe();
    let mut pts = Vec::with_capacity(set.breakpoints().len() + 2);
    pts.push((u.lo(), set.degree(u.lo())));
    pts.extend(set.breakpoints().into_iter().filter(|&(x, _)| x > u.lo() && x < u.hi()));
    pts.push((u.hi(), set.degree(u.hi())));

    let mut area = 0.0;
    let mut moment = 0.0;
    for w in pts.windows(2) {
        let ((x0, m0), (x1, m1)) = (w[0], w[1]);
        let h = x1 - x0;
        area += 0.5 * h * (m0 + m1);
        moment += h / 6.0 * (x0 * (2.0 * m0 + m1) + x1 * (m0 + 2.0 * m1));
    }
    (area, moment)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleFiring {
    pub rule: usize,
    pub strength: f64,
}

/// Every intermediate of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationTrace {
    /// Per input variable, in declaration order.
    pub fuzzified: Vec<(String, TermDegrees)>,
    /// One entry per rule, in rule order.
    pub per_rule: Vec<RuleFiring>,
    pub aggregated_output: FuzzySet,
    pub crisp_output: f64,
    /// No rule fired; `crisp_output` is the universe midpoint.
    pub degenerate: bool,
}

impl EvaluationTrace {
    /// Implicated output set of one rule.
    pub fn rule_output(&self, rulebase: &RuleBase, index: usize) -> FuzzySet {
        implicate(rulebase.consequent_set(index), self.per_rule[index].strength, rulebase.config().implication)
    }

    /// Rules sorted by descending strength; equal strengths keep rule order.
    pub fn strongest(&self, k: usize) -> Vec<RuleFiring> {
        let mut sorted = self.per_rule.clone();
        sorted.sort_by(|a, b| b.strength.total_cmp(&a.strength));
        sorted.truncate(k);
        sorted
    }

    pub fn degrees(&self, variable: &str) -> Option<&TermDegrees> {
        self.fuzzified.iter().find(|(n, _)| n == variable).map(|(_, d)| d)
    }
}
