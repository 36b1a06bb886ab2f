//! Goalkeeper quality model: eight equally weighted attributes, a generated
//! 256-rule base, scoring, classification and ranking.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{FuzzySet, LinguisticVariable, PiecewiseLinearMF, TNorm, Universe};
use crate::inference::{EvaluationTrace, Implication, InferenceConfig, InferenceError, Input, Rule, RuleBase};

pub const RATING_RANGE: (f64, f64) = (0.0, 10.0);
pub const HEIGHT_RANGE: (f64, f64) = (100.0, 220.0);
pub const SCORE_RANGE: (f64, f64) = (0.0, 100.0);
pub const OUTPUT_VARIABLE: &str = "quality";

/// The eight goalkeeper characteristics, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    ExitFromGoal,
    Flexibility,
    OverheadDominance,
    EstablishingConnection,
    Courage,
    Leadership,
    PersonBattles,
    Height,
}

impl Attribute {
    pub const ALL: [Attribute; 8] = [
        Attribute::ExitFromGoal,
        Attribute::Flexibility,
        Attribute::OverheadDominance,
        Attribute::EstablishingConnection,
        Attribute::Courage,
        Attribute::Leadership,
        Attribute::PersonBattles,
        Attribute::Height,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Field name in profile JSON and CSV.
    pub fn field(self) -> &'static str {
        match self {
            Attribute::ExitFromGoal => "exit_from_goal",
            Attribute::Flexibility => "flexibility",
            Attribute::OverheadDominance => "overhead_dominance",
            Attribute::EstablishingConnection => "establishing_connection",
            Attribute::Courage => "courage",
            Attribute::Leadership => "leadership",
            Attribute::PersonBattles => "person_battles",
            Attribute::Height => "height_cm",
        }
    }

    /// Name of the linguistic variable in the rule base.
    pub fn variable(self) -> &'static str {
        match self {
            Attribute::Height => "height",
            other => other.field(),
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Attribute::ExitFromGoal => "Exit from the goal",
            Attribute::Flexibility => "Flexibility",
            Attribute::OverheadDominance => "Overhead dominance",
            Attribute::EstablishingConnection => "Establishing connection",
            Attribute::Courage => "Courage",
            Attribute::Leadership => "Leadership",
            Attribute::PersonBattles => "Person to person battles",
            Attribute::Height => "Height of GK",
        }
    }

    pub fn from_variable(name: &str) -> Option<Attribute> {
        Attribute::ALL.into_iter().find(|a| a.variable() == name)
    }

    pub fn from_field(name: &str) -> Option<Attribute> {
        Attribute::ALL.into_iter().find(|a| a.field() == name)
    }

    pub fn favorable(self) -> &'static str {
        match self {
            Attribute::Height => "tall",
            _ => "good",
        }
    }

    pub fn unfavorable(self) -> &'static str {
        match self {
            Attribute::Height => "short",
            _ => "bad",
        }
    }

    pub fn range(self) -> (f64, f64) {
        match self {
            Attribute::Height => HEIGHT_RANGE,
            _ => RATING_RANGE,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// A number, or one of the attribute's two term labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Number(f64),
    Label(String),
}

impl AttributeValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttributeValue::Number(x) => Some(*x),
            AttributeValue::Label(_) => None,
        }
    }

    /// Parses user text: a number if it looks like one, a label otherwise.
    pub fn parse(s: &str) -> AttributeValue {
        let s = s.trim();
        match s.parse::<f64>() {
            Ok(x) => AttributeValue::Number(x),
            Err(_) => AttributeValue::Label(s.to_string()),
        }
    }
}

impl From<f64> for AttributeValue {
    fn from(x: f64) -> Self {
        AttributeValue::Number(x)
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Number(x) => write!(f, "{x}"),
            AttributeValue::Label(l) => f.write_str(l),
        }
    }
}

/// Seven 0–10 ratings and a height in centimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GKProfile {
    pub exit_from_goal: AttributeValue,
    pub flexibility: AttributeValue,
    pub overhead_dominance: AttributeValue,
    pub establishing_connection: AttributeValue,
    pub courage: AttributeValue,
    pub leadership: AttributeValue,
    pub person_battles: AttributeValue,
    pub height_cm: AttributeValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("invalid profile: {}", .errors.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; "))]
pub struct ProfileError {
    pub errors: Vec<FieldError>,
}

impl GKProfile {
    /// Ratings in canonical order followed by height.
    pub fn from_numbers(ratings: [f64; 7], height_cm: f64) -> Self {
        let r = ratings.map(AttributeValue::Number);
        GKProfile {
            exit_from_goal: r[0].clone(),
            flexibility: r[1].clone(),
            overhead_dominance: r[2].clone(),
            establishing_connection: r[3].clone(),
            courage: r[4].clone(),
            leadership: r[5].clone(),
            person_battles: r[6].clone(),
            height_cm: AttributeValue::Number(height_cm),
        }
    }

    pub fn get(&self, attr: Attribute) -> &AttributeValue {
        match attr {
            Attribute::ExitFromGoal => &self.exit_from_goal,
            Attribute::Flexibility => &self.flexibility,
            Attribute::OverheadDominance => &self.overhead_dominance,
            Attribute::EstablishingConnection => &self.establishing_connection,
            Attribute::Courage => &self.courage,
            Attribute::Leadership => &self.leadership,
            Attribute::PersonBattles => &self.person_battles,
            Attribute::Height => &self.height_cm,
        }
    }

    pub fn get_mut(&mut self, attr: Attribute) -> &mut AttributeValue {
        match attr {
            Attribute::ExitFromGoal => &mut self.exit_from_goal,
            Attribute::Flexibility => &mut self.flexibility,
            Attribute::OverheadDominance => &mut self.overhead_dominance,
            Attribute::EstablishingConnection => &mut self.establishing_connection,
            Attribute::Courage => &mut self.courage,
            Attribute::Leadership => &mut self.leadership,
            Attribute::PersonBattles => &mut self.person_battles,
            Attribute::Height => &mut self.height_cm,
        }
    }

    pub fn with(mut self, attr: Attribute, value: impl Into<AttributeValue>) -> Self {
        *self.get_mut(attr) = value.into();
        self
    }

    /// Checks ranges and labels, normalizing label case.
    pub fn validate(&self) -> Result<GKProfile, ProfileError> {
        let mut out = self.clone();
        let mut errors = Vec::new();
        for attr in Attribute::ALL {
            let (lo, hi) = attr.range();
            match self.get(attr) {
                AttributeValue::Number(x) if !x.is_finite() => errors.push(FieldError {
                    field: attr.field().into(),
                    message: "must be a finite number".into(),
                }),
                AttributeValue::Number(x) if *x < lo || *x > hi => errors.push(FieldError {
                    field: attr.field().into(),
                    message: format!("{x} is outside [{lo}, {hi}]"),
                }),
                AttributeValue::Number(_) => {}
                AttributeValue::Label(l) => {
                    let norm = l.trim().to_ascii_lowercase();
                    if norm == attr.favorable() || norm == attr.unfavorable() {
                        *out.get_mut(attr) = AttributeValue::Label(norm);
                    } else {
                        errors.push(FieldError {
                            field: attr.field().into(),
                            message: format!(
                                "expected a number in [{lo}, {hi}] or \"{}\"/\"{}\", got \"{l}\"",
                                attr.favorable(),
                                attr.unfavorable()
                            ),
                        });
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(ProfileError { errors })
        }
    }

    /// Inference inputs keyed by rule-base variable name.
    pub fn inputs(&self) -> BTreeMap<String, Input> {
        Attribute::ALL
            .into_iter()
            .map(|a| {
                let input = match self.get(a) {
                    AttributeValue::Number(x) => Input::Crisp(*x),
                    AttributeValue::Label(l) => Input::Label(l.clone()),
                };
                (a.variable().to_string(), input)
            })
            .collect()
    }

    /// Profile whose every favorable degree `d` becomes `1 - d` under the
    /// calibration's ramps. Labels swap to the opposite term.
    pub fn mirrored(&self, calibration: &GKCalibration) -> GKProfile {
        let mut out = self.clone();
        for attr in Attribute::ALL {
            let ramp = calibration.ramp(attr);
            let (lo, hi) = attr.range();
            *out.get_mut(attr) = match self.get(attr) {
                AttributeValue::Number(x) => AttributeValue::Number((ramp.low + ramp.high - x).clamp(lo, hi)),
                AttributeValue::Label(l) if l == attr.favorable() => AttributeValue::Label(attr.unfavorable().into()),
                AttributeValue::Label(_) => AttributeValue::Label(attr.favorable().into()),
            };
        }
        out
    }
}

/// Output levels, worst to best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLevel {
    Awful,
    RelativelyAwful,
    Bad,
    RelativelyBad,
    Ordinary,
    RelativelyGood,
    Good,
    AlmostExcellent,
    Excellent,
}

impl QualityLevel {
    pub const ALL: [QualityLevel; 9] = [
        QualityLevel::Awful,
        QualityLevel::RelativelyAwful,
        QualityLevel::Bad,
        QualityLevel::RelativelyBad,
        QualityLevel::Ordinary,
        QualityLevel::RelativelyGood,
        QualityLevel::Good,
        QualityLevel::AlmostExcellent,
        QualityLevel::Excellent,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(n: usize) -> Option<QualityLevel> {
        QualityLevel::ALL.get(n).copied()
    }

    /// Term label in the rule base.
    pub fn label(self) -> &'static str {
        match self {
            QualityLevel::Awful => "awful",
            QualityLevel::RelativelyAwful => "relatively_awful",
            QualityLevel::Bad => "bad",
            QualityLevel::RelativelyBad => "relatively_bad",
            QualityLevel::Ordinary => "ordinary",
            QualityLevel::RelativelyGood => "relatively_good",
            QualityLevel::Good => "good",
            QualityLevel::AlmostExcellent => "almost_excellent",
            QualityLevel::Excellent => "excellent",
        }
    }

    pub fn from_label(label: &str) -> Option<QualityLevel> {
        QualityLevel::ALL.into_iter().find(|l| l.label() == label)
    }

    pub fn name(self) -> &'static str {
        match self {
            QualityLevel::Awful => "Awful",
            QualityLevel::RelativelyAwful => "Relatively awful",
            QualityLevel::Bad => "Bad",
            QualityLevel::RelativelyBad => "Relatively bad",
            QualityLevel::Ordinary => "Ordinary",
            QualityLevel::RelativelyGood => "Relatively good",
            QualityLevel::Good => "Good",
            QualityLevel::AlmostExcellent => "Almost excellent",
            QualityLevel::Excellent => "Excellent",
        }
    }
}

impl fmt::Display for QualityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Favorable-term ramp: degree 0 at `low`, 1 at `high`. The unfavorable
/// term is its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ramp {
    pub low: f64,
    pub high: f64,
}

impl Ramp {
    pub fn crossover(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    pub fn span(&self) -> f64 {
        self.high - self.low
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("{attribute} ramp [{low}, {high}] must be increasing and inside [{lo}, {hi}]")]
    BadRamp { attribute: Attribute, low: f64, high: f64, lo: f64, hi: f64 },
    #[error("need exactly 9 output centers, got {0}")]
    CenterCount(usize),
    #[error("output centers must be strictly increasing inside [0, 100]")]
    BadCenters,
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
}

/// Membership shapes and operator choices for the goalkeeper model.
#[derive(Debug, Clone, PartialEq)]
pub struct GKCalibration {
    ramps: [Ramp; 8],
    centers: [f64; 9],
    inference: InferenceConfig,
}

impl Default for GKCalibration {
    fn default() -> Self {
        default_calibration()
    }
}

/// Ratings ramp over the full 0–10 scale, height from 165 to 195 cm, and nine
/// triangular output terms peaking every 12.5 points.
///
/// Rules fire with the product t-norm and scale their consequents. With min
/// and clip instead, raising a single attribute can lower the score by up to
/// about two points, because a low consequent term gains height while an even
/// lower one loses it.
pub fn default_calibration() -> GKCalibration {
    let rating = Ramp { low: 0.0, high: 10.0 };
    let mut ramps = [rating; 8];
    ramps[Attribute::Height.index()] = Ramp { low: 165.0, high: 195.0 };
    GKCalibration {
        ramps,
        centers: std::array::from_fn(|k| 12.5 * k as f64),
        inference: InferenceConfig {
            and_norm: TNorm::Product,
            implication: Implication::Scale,
            ..InferenceConfig::default()
        },
    }
}

impl GKCalibration {
    pub fn ramp(&self, attr: Attribute) -> Ramp {
        self.ramps[attr.index()]
    }

    pub fn centers(&self) -> &[f64; 9] {
        &self.centers
    }

    pub fn inference(&self) -> &InferenceConfig {
        &self.inference
    }

    pub fn with_ramp(mut self, attr: Attribute, low: f64, high: f64) -> Result<Self, CalibrationError> {
        let (lo, hi) = attr.range();
        if !(low.is_finite() && high.is_finite() && lo <= low && low < high && high <= hi) {
            return Err(CalibrationError::BadRamp { attribute: attr, low, high, lo, hi });
        }
        self.ramps[attr.index()] = Ramp { low, high };
        Ok(self)
    }

    /// Applies one ramp to all seven rating attributes.
    pub fn with_rating_ramp(self, low: f64, high: f64) -> Result<Self, CalibrationError> {
        Attribute::ALL
            .into_iter()
            .filter(|a| *a != Attribute::Height)
            .try_fold(self, |cal, a| cal.with_ramp(a, low, high))
    }

    pub fn with_centers(mut self, centers: &[f64]) -> Result<Self, CalibrationError> {
        let centers: [f64; 9] = centers.try_into().map_err(|_| CalibrationError::CenterCount(centers.len()))?;
        let (lo, hi) = SCORE_RANGE;
        let inside = centers.iter().all(|c| c.is_finite() && (lo..=hi).contains(c));
        if !inside || centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CalibrationError::BadCenters);
        }
        self.centers = centers;
        Ok(self)
    }

    pub fn with_inference(mut self, config: InferenceConfig) -> Result<Self, CalibrationError> {
        if config.grid_points < 2 {
            return Err(CalibrationError::GridTooSmall(config.grid_points));
        }
        self.inference = config;
        Ok(self)
    }

    /// Linguistic variable for one attribute: unfavorable term first.
    pub fn input_variable(&self, attr: Attribute) -> LinguisticVariable {
        let (lo, hi) = attr.range();
        let u = Universe::with_grid(lo, hi, self.inference.grid_points).expect("attribute ranges are valid");
        let Ramp { low, high } = self.ramp(attr);
        let down = PiecewiseLinearMF::ramp(low, 1.0, high, 0.0).expect("validated ramp");
        let up = PiecewiseLinearMF::ramp(low, 0.0, high, 1.0).expect("validated ramp");
        LinguisticVariable::new(
            attr.variable(),
            u,
            vec![
                FuzzySet::new(attr.unfavorable(), u, down).expect("ramp inside universe"),
                FuzzySet::new(attr.favorable(), u, up).expect("ramp inside universe"),
            ],
        )
        .expect("two distinct terms")
    }

    /// Nine output terms. Each peaks at its center and falls to zero at the
    /// neighbouring centers; the outer terms stay flat out to the edges.
    pub fn output_variable(&self) -> LinguisticVariable {
        let (lo, hi) = SCORE_RANGE;
        let u = Universe::with_grid(lo, hi, self.inference.grid_points).expect("score range is valid");
        let c = &self.centers;
        let terms = QualityLevel::ALL
            .into_iter()
            .map(|level| {
                let k = level.ordinal();
                let mut pts = Vec::with_capacity(4);
                if k == 0 {
                    if c[0] > lo {
                        pts.push((lo, 1.0));
                    }
                } else {
                    pts.push((c[k - 1], 0.0));
                }
                pts.push((c[k], 1.0));
                if k == 8 {
                    if c[8] < hi {
                        pts.push((hi, 1.0));
                    }
                } else {
                    pts.push((c[k + 1], 0.0));
                }
                let mf = PiecewiseLinearMF::new(pts).expect("centers strictly increasing");
                FuzzySet::new(level.label(), u, mf).expect("centers inside the score range")
            })
            .collect();
        LinguisticVariable::new(OUTPUT_VARIABLE, u, terms).expect("distinct level labels")
    }
}

/// One rule per combination of the eight binary terms. The consequent level
/// is the number of favorable terms in the antecedent.
pub fn generate_gk_rulebase(calibration: &GKCalibration) -> RuleBase {
    let inputs: Vec<_> = Attribute::ALL.iter().map(|&a| calibration.input_variable(a)).collect();
    let rules = (0u32..1 << Attribute::ALL.len())
        .map(|mask| {
            let antecedent: Vec<_> = Attribute::ALL
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let term = if mask & (1 << i) == 0 { a.favorable() } else { a.unfavorable() };
                    (a.variable().to_string(), term.to_string())
                })
                .collect();
            let favorable = Attribute::ALL.len() - mask.count_ones() as usize;
            let level = QualityLevel::from_ordinal(favorable).expect("at most 8 favorable terms");
            Rule::new(antecedent, (OUTPUT_VARIABLE.to_string(), level.label().to_string()))
                .expect("distinct antecedent variables")
        })
        .collect();
    RuleBase::new(inputs, calibration.output_variable(), rules, calibration.inference)
        .expect("generated rule base resolves")
}

/// Output term with the largest membership at `score`; ties go to the higher level.
pub fn classify_level(score: f64, calibration: &GKCalibration) -> QualityLevel {
    let output = calibration.output_variable();
    let mut best = (QualityLevel::Awful, f64::NEG_INFINITY);
    for (level, term) in QualityLevel::ALL.into_iter().zip(output.terms()) {
        let d = term.degree(score);
        if d >= best.1 {
            best = (level, d);
        }
    }
    best.0
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("cannot rank an empty list of candidates")]
    NoCandidates,
    #[error("rule base is not a goalkeeper model: {0}")]
    Incompatible(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub profile: GKProfile,
    pub score: f64,
    pub level: QualityLevel,
    pub trace: EvaluationTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    pub id: String,
    /// 1-based; tied candidates share a rank.
    pub rank: usize,
    pub tied: bool,
    pub candidate: ScoredCandidate,
}

/// Calibration plus the rule base it scores with.
#[derive(Debug, Clone)]
pub struct GkModel {
    calibration: GKCalibration,
    rulebase: RuleBase,
}

impl Default for GkModel {
    fn default() -> Self {
        GkModel::new(default_calibration())
    }
}

impl GkModel {
    pub fn new(calibration: GKCalibration) -> Self {
        let rulebase = generate_gk_rulebase(&calibration);
        GkModel { calibration, rulebase }
    }

    /// Uses an externally supplied rule base. It must have exactly the eight
    /// attribute variables as inputs.
    pub fn with_rulebase(calibration: GKCalibration, rulebase: RuleBase) -> Result<Self, ScoreError> {
        check_compatible(&rulebase)?;
        Ok(GkModel { calibration, rulebase })
    }

    pub fn calibration(&self) -> &GKCalibration {
        &self.calibration
    }

    pub fn rulebase(&self) -> &RuleBase {
        &self.rulebase
    }

    pub fn score(&self, profile: &GKProfile) -> Result<ScoredCandidate, ScoreError> {
        score_gk(profile, &self.rulebase, &self.calibration)
    }

    pub fn rank(&self, profiles: Vec<(String, GKProfile)>) -> Result<Vec<RankedCandidate>, ScoreError> {
        rank_candidates(profiles, &self.rulebase, &self.calibration)
    }

    pub fn classify(&self, score: f64) -> QualityLevel {
        classify_level(score, &self.calibration)
    }
}

pub fn check_compatible(rulebase: &RuleBase) -> Result<(), ScoreError> {
    let mut names: Vec<&str> = rulebase.inputs().iter().map(|v| v.name()).collect();
    names.sort_unstable();
    let mut want: Vec<&str> = Attribute::ALL.iter().map(|a| a.variable()).collect();
    want.sort_unstable();
    if names != want {
        return Err(ScoreError::Incompatible(format!(
            "input variables must be {}, found {}",
            want.join(", "),
            names.join(", ")
        )));
    }
    for attr in Attribute::ALL {
        let var = rulebase.input(attr.variable()).expect("names checked");
        let (lo, hi) = attr.range();
        let u = var.universe();
        if u.lo() > lo || u.hi() < hi {
            return Err(ScoreError::Incompatible(format!(
                "`{}` universe [{}, {}] must cover [{lo}, {hi}]",
                attr.variable(),
                u.lo(),
                u.hi()
            )));
        }
        for label in [attr.favorable(), attr.unfavorable()] {
            if var.term(label).is_none() {
                return Err(ScoreError::Incompatible(format!("`{}` needs a `{label}` term", attr.variable())));
            }
        }
    }
    let out = rulebase.output().universe();
    if out.lo() < SCORE_RANGE.0 || out.hi() > SCORE_RANGE.1 {
        return Err(ScoreError::Incompatible(format!(
            "output universe [{}, {}] must lie within [0, 100]",
            out.lo(),
            out.hi()
        )));
    }
    Ok(())
}

pub fn score_gk(
    profile: &GKProfile,
    rulebase: &RuleBase,
    calibration: &GKCalibration,
) -> Result<ScoredCandidate, ScoreError> {
    let profile = profile.validate()?;
    let trace = rulebase.evaluate(&profile.inputs())?;
    let score = trace.crisp_output;
    Ok(ScoredCandidate { profile, score, level: classify_level(score, calibration), trace })
}

/// Scores every profile and sorts by descending score. Exact ties keep input
/// order and are flagged.
pub fn rank_candidates(
    profiles: Vec<(String, GKProfile)>,
    rulebase: &RuleBase,
    calibration: &GKCalibration,
) -> Result<Vec<RankedCandidate>, ScoreError> {
    if profiles.is_empty() {
        return Err(ScoreError::NoCandidates);
    }
    let scored = profiles
        .into_iter()
        .map(|(id, p)| Ok((id, score_gk(&p, rulebase, calibration)?)))
        .collect::<Result<Vec<_>, ScoreError>>()?;
    Ok(rank_scored(scored))
}

/// Ranks already-scored candidates.
pub fn rank_scored(scored: Vec<(String, ScoredCandidate)>) -> Vec<RankedCandidate> {
    let scores: Vec<f64> = scored.iter().map(|(_, c)| c.score).collect();
    let order = rank_order(&scores);
    let mut slots: Vec<Option<(String, ScoredCandidate)>> = scored.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|p| {
            let (id, candidate) = slots[p.index].take().expect("each index once");
            RankedCandidate { id, rank: p.rank, tied: p.tied, candidate }
        })
        .collect()
}

/// One entry of a ranking over plain scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    /// Index into the input.
    pub index: usize,
    /// 1-based; equal scores share a rank.
    pub rank: usize,
    pub tied: bool,
}

/// Indices sorted by descending score. The sort is stable, so exact ties
/// keep input order.
pub fn rank_order(scores: &[f64]) -> Vec<Placement> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let sorted: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let mut rank = 0;
    idx.iter()
        .enumerate()
        .map(|(pos, &index)| {
            if pos == 0 || sorted[pos - 1] != sorted[pos] {
                rank = pos + 1;
            }
            let tied = (pos > 0 && sorted[pos - 1] == sorted[pos]) || sorted.get(pos + 1) == Some(&sorted[pos]);
            Placement { index, rank, tied }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedRule {
    pub index: usize,
    pub strength: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDegrees {
    pub attribute: String,
    pub degrees: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub rules: Vec<ExplainedRule>,
    pub degrees: Vec<AttributeDegrees>,
}

/// IF-THEN sentence using attribute and level display names where known.
pub fn rule_sentence(rule: &Rule) -> String {
    let clauses: Vec<String> = rule
        .antecedent()
        .iter()
        .map(|(var, term)| match Attribute::from_variable(var) {
            Some(a) => format!("{} is {term}", a.display_name()),
            None => format!("{var} is {term}"),
        })
        .collect();
    let (out_var, out_term) = rule.consequent();
    let then = match QualityLevel::from_label(out_term) {
        Some(level) if out_var == OUTPUT_VARIABLE => format!("GK is {}", level.name()),
        _ => format!("{out_var} is {out_term}"),
    };
    format!("IF {} THEN {then}", clauses.join(" AND "))
}

/// The `top_k` strongest rules and the per-attribute term degrees.
pub fn explain(candidate: &ScoredCandidate, rulebase: &RuleBase, top_k: usize) -> Explanation {
    let top_k = top_k.max(1);
    let rules = candidate
        .trace
        .strongest(top_k)
        .into_iter()
        .map(|f| ExplainedRule {
            index: f.rule,
            strength: f.strength,
            text: rule_sentence(&rulebase.rules()[f.rule]),
        })
        .collect();
    let degrees = candidate
        .trace
        .fuzzified
        .iter()
        .map(|(var, d)| AttributeDegrees {
            attribute: Attribute::from_variable(var).map_or(var.clone(), |a| a.field().to_string()),
            degrees: d.iter().map(|(l, x)| (l.to_string(), x)).collect(),
        })
        .collect();
    Explanation { rules, degrees }
}

impl fmt::Display for Explanation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Strongest rules:")?;
        for r in &self.rules {
            writeln!(f, "  [{:>3}] {:.4}  {}", r.index, r.strength, r.text)?;
        }
        writeln!(f, "Attribute degrees:")?;
        for a in &self.degrees {
            let terms: Vec<String> = a.degrees.iter().map(|(l, d)| format!("{l}={d:.4}")).collect();
            writeln!(f, "  {:<24} {}", a.attribute, terms.join(" "))?;
        }
        Ok(())
    }
}

/// The three goalkeepers compared in the original study, with their published totals.
pub fn reference_profiles() -> [(&'static str, GKProfile, f64); 3] {
    [
        ("GK1", GKProfile::from_numbers([7.0, 4.0, 7.0, 8.0, 7.0, 9.0, 4.0], 187.0), 66.1),
        ("GK2", GKProfile::from_numbers([6.0, 7.0, 5.0, 8.0, 8.0, 9.0, 3.0], 198.0), 67.9),
        ("GK3", GKProfile::from_numbers([6.0, 5.0, 7.0, 9.0, 7.0, 9.0, 6.0], 195.0), 70.7),
    ]
}
