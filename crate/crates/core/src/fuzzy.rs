//! Fuzzy sets over bounded real universes.
//!
//! Membership functions are piecewise linear with flat extrapolation past the
//! outer breakpoints. Set-level operators (union, intersection) work on the
//! universe grid and return grid-sampled sets.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid resolution used when none is given.
pub const DEFAULT_GRID_POINTS: usize = 1001;

const DEGREE_SCALE: f64 = (1u64 << 53) as f64;

/// Rounds a degree in [0, 1] to the nearest multiple of 2^-53.
///
/// On that lattice `1 - d` is exact, so complement, min and max compose
/// without rounding and De Morgan's laws hold bit for bit.
pub fn quantize_degree(d: f64) -> f64 {
    (d * DEGREE_SCALE).round() / DEGREE_SCALE
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("invalid universe: lo ({lo}) must be below hi ({hi})")]
    EmptyUniverse { lo: f64, hi: f64 },
    #[error("universe bounds must be finite")]
    NonFiniteUniverse,
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("membership function needs at least 2 breakpoints, got {0}")]
    TooFewBreakpoints(usize),
    #[error("breakpoint x values must be strictly increasing ({prev} then {next})")]
    NonIncreasingBreakpoint { prev: f64, next: f64 },
    #[error("degree {0} is outside [0, 1]")]
    DegreeOutOfRange(f64),
    #[error("breakpoint x must be finite")]
    NonFiniteBreakpoint,
    #[error("breakpoint x = {x} lies outside the universe [{lo}, {hi}]")]
    BreakpointOutsideUniverse { x: f64, lo: f64, hi: f64 },
    #[error("fuzzy sets are defined over different universes")]
    UniverseMismatch,
    #[error("expected {expected} grid samples, got {got}")]
    SampleCount { expected: usize, got: usize },
}

/// Closed interval of the real line plus the resolution used to discretize it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UniverseRepr", into = "UniverseRepr")]
pub struct Universe {
    lo: f64,
    hi: f64,
    grid_points: usize,
}

#[derive(Serialize, Deserialize)]
struct UniverseRepr {
    lo: f64,
    hi: f64,
    grid_points: usize,
}

impl TryFrom<UniverseRepr> for Universe {
    type Error = FuzzyError;

    fn try_from(r: UniverseRepr) -> Result<Self, Self::Error> {
        Universe::with_grid(r.lo, r.hi, r.grid_points)
    }
}

impl From<Universe> for UniverseRepr {
    fn from(u: Universe) -> Self {
        UniverseRepr { lo: u.lo, hi: u.hi, grid_points: u.grid_points }
    }
}

impl Universe {
    pub fn new(lo: f64, hi: f64) -> Result<Self, FuzzyError> {
        Self::with_grid(lo, hi, DEFAULT_GRID_POINTS)
    }

    pub fn with_grid(lo: f64, hi: f64, grid_points: usize) -> Result<Self, FuzzyError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(FuzzyError::NonFiniteUniverse);
        }
        if lo >= hi {
            return Err(FuzzyError::EmptyUniverse { lo, hi });
        }
        if grid_points < 2 {
            return Err(FuzzyError::GridTooSmall(grid_points));
        }
        Ok(Universe { lo, hi, grid_points })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Same bounds, different resolution.
    pub fn regrid(&self, grid_points: usize) -> Result<Self, FuzzyError> {
        Self::with_grid(self.lo, self.hi, grid_points)
    }

    /// The `i`-th grid point. The last point is exactly `hi`.
    pub fn point(&self, i: usize) -> f64 {
        let last = self.grid_points - 1;
        if i >= last {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * (i as f64) / (last as f64)
    }

    pub fn grid(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.grid_points).map(move |i| self.point(i))
    }
}

/// Membership function given by breakpoints `(x, degree)` with linear
/// interpolation between them and flat extrapolation outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseLinearMF {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseLinearMF {
    type Error = FuzzyError;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        PiecewiseLinearMF::new(points)
    }
}

impl From<PiecewiseLinearMF> for Vec<(f64, f64)> {
    fn from(mf: PiecewiseLinearMF) -> Self {
        mf.points
    }
}

impl PiecewiseLinearMF {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, FuzzyError> {
        if points.len() < 2 {
            return Err(FuzzyError::TooFewBreakpoints(points.len()));
        }
        for &(x, d) in &points {
            if !x.is_finite() {
                return Err(FuzzyError::NonFiniteBreakpoint);
            }
            if !(0.0..=1.0).contains(&d) {
                return Err(FuzzyError::DegreeOutOfRange(d));
            }
        }
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(FuzzyError::NonIncreasingBreakpoint { prev: w[0].0, next: w[1].0 });
            }
        }
        Ok(PiecewiseLinearMF { points })
    }

    /// Two-point ramp from `(x0, d0)` to `(x1, d1)`.
    pub fn ramp(x0: f64, d0: f64, x1: f64, d1: f64) -> Result<Self, FuzzyError> {
        Self::new(vec![(x0, d0), (x1, d1)])
    }

    pub fn triangle(left: f64, peak: f64, right: f64) -> Result<Self, FuzzyError> {
        Self::new(vec![(left, 0.0), (peak, 1.0), (right, 0.0)])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Degree of membership at `x`.
    pub fn membership(&self, x: f64) -> f64 {
        let pts = &self.points;
        let idx = pts.partition_point(|p| p.0 <= x);
        if idx == 0 {
            return pts[0].1;
        }
        if idx == pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (x0, d0) = pts[idx - 1];
        if x == x0 {
            return d0;
        }
        let (x1, d1) = pts[idx];
        let t = (x - x0) / (x1 - x0);
        (d0 + t * (d1 - d0)).clamp(0.0, 1.0)
    }

    /// Largest absolute slope over all segments.
    pub fn max_slope(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }

    /// True when every degree is exactly 0 or 1 (a crisp characteristic function).
    pub fn is_crisp(&self) -> bool {
        self.points.iter().all(|&(_, d)| d == 0.0 || d == 1.0)
    }
}

/// Free function form of [`PiecewiseLinearMF::membership`].
pub fn membership(mf: &PiecewiseLinearMF, x: f64) -> f64 {
    mf.membership(x)
}

/// A labelled fuzzy set on a universe.
///
/// Complementing a set flips a flag instead of rewriting degrees, so that
/// complementing twice gives back the original set bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySet {
    label: String,
    universe: Universe,
    mf: PiecewiseLinearMF,
    complemented: bool,
}

impl FuzzySet {
    pub fn new(
        label: impl Into<String>,
        universe: Universe,
        mf: PiecewiseLinearMF,
    ) -> Result<Self, FuzzyError> {
        for &(x, _) in mf.breakpoints() {
            if !universe.contains(x) {
                return Err(FuzzyError::BreakpointOutsideUniverse {
                    x,
                    lo: universe.lo(),
                    hi: universe.hi(),
                });
            }
        }
        let mf = PiecewiseLinearMF { points: mf.points.into_iter().map(|(x, d)| (x, quantize_degree(d))).collect() };
        Ok(FuzzySet { label: label.into(), universe, mf, complemented: false })
    }

    /// Set whose breakpoints are exactly the universe grid.
    pub fn from_grid(
        label: impl Into<String>,
        universe: Universe,
        degrees: Vec<f64>,
    ) -> Result<Self, FuzzyError> {
        if degrees.len() != universe.grid_points() {
            return Err(FuzzyError::SampleCount {
                expected: universe.grid_points(),
                got: degrees.len(),
            });
        }
        let points = universe.grid().zip(degrees.into_iter().map(quantize_degree)).collect();
        Ok(FuzzySet {
            label: label.into(),
            universe,
            mf: PiecewiseLinearMF::new(points)?,
            complemented: false,
        })
    }

    pub fn constant(label: impl Into<String>, universe: Universe, degree: f64) -> Result<Self, FuzzyError> {
        let mf = PiecewiseLinearMF::ramp(universe.lo(), degree, universe.hi(), degree)?;
        Self::new(label, universe, mf)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn is_complemented(&self) -> bool {
        self.complemented
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn degree(&self, x: f64) -> f64 {
        let d = quantize_degree(self.mf.membership(x));
        if self.complemented {
            1.0 - d
        } else {
            d
        }
    }

    /// Degrees at every grid point of the universe.
    pub fn samples(&self) -> Vec<f64> {
        self.universe.grid().map(|x| self.degree(x)).collect()
    }

    /// Effective breakpoints, complement applied.
    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        self.mf
            .breakpoints()
            .iter()
            .map(|&(x, d)| (x, if self.complemented { 1.0 - d } else { d }))
            .collect()
    }

    /// Membership function with any pending complement written into the degrees.
    pub fn membership_function(&self) -> PiecewiseLinearMF {
        if self.complemented {
            PiecewiseLinearMF { points: self.breakpoints() }
        } else {
            self.mf.clone()
        }
    }

    /// Equivalent set with no pending complement.
    pub fn materialized(&self) -> FuzzySet {
        FuzzySet {
            label: self.label.clone(),
            universe: self.universe,
            mf: self.membership_function(),
            complemented: false,
        }
    }

    /// Same set sampled onto another grid resolution of the same bounds.
    pub fn regrid(&self, grid_points: usize) -> Result<FuzzySet, FuzzyError> {
        Ok(FuzzySet { universe: self.universe.regrid(grid_points)?, ..self.clone() })
    }

    /// Closed interval outside of which the degree is zero, clipped to the universe.
    /// `None` for the empty set.
    pub fn support(&self) -> Option<(f64, f64)> {
        let pts = self.breakpoints();
        let first = pts.iter().position(|p| p.1 > 0.0)?;
        let last = pts.iter().rposition(|p| p.1 > 0.0)?;
        let lo = if first == 0 { self.universe.lo() } else { pts[first - 1].0 };
        let hi = if last == pts.len() - 1 { self.universe.hi() } else { pts[last + 1].0 };
        Some((lo, hi))
    }

    pub fn height(&self) -> f64 {
        self.breakpoints().iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Fuzzy AND.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TNorm {
    #[default]
    Min,
    Product,
}

impl TNorm {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            TNorm::Min => a.min(b),
            TNorm::Product => a * b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TNorm::Min => "min",
            TNorm::Product => "product",
        }
    }
}

/// Fuzzy OR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TConorm {
    #[default]
    Max,
    AlgebraicSum,
}

impl TConorm {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            TConorm::Max => a.max(b),
            TConorm::AlgebraicSum => a + b - a * b,
        }
    }
}

impl fmt::Display for TNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn pointwise(
    a: &FuzzySet,
    b: &FuzzySet,
    label: String,
    op: impl Fn(f64, f64) -> f64,
) -> Result<FuzzySet, FuzzyError> {
    if a.universe != b.universe {
        return Err(FuzzyError::UniverseMismatch);
    }
    let degrees = a
        .universe
        .grid()
        .map(|x| op(a.degree(x), b.degree(x)).clamp(0.0, 1.0))
        .collect();
    FuzzySet::from_grid(label, a.universe, degrees)
}

pub fn set_union(a: &FuzzySet, b: &FuzzySet, conorm: TConorm) -> Result<FuzzySet, FuzzyError> {
    pointwise(a, b, format!("{} or {}", a.label, b.label), |x, y| conorm.apply(x, y))
}

pub fn set_intersection(a: &FuzzySet, b: &FuzzySet, norm: TNorm) -> Result<FuzzySet, FuzzyError> {
    pointwise(a, b, format!("{} and {}", a.label, b.label), |x, y| norm.apply(x, y))
}

pub fn set_complement(a: &FuzzySet) -> FuzzySet {
    FuzzySet { complemented: !a.complemented, ..a.clone() }
}

/// Named universe with its term set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticVariable {
    name: String,
    universe: Universe,
    terms: Vec<FuzzySet>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariableError {
    #[error("variable name must not be empty")]
    EmptyName,
    #[error("variable `{0}` has no terms")]
    NoTerms(String),
    #[error("variable `{0}` has a term with an empty label")]
    EmptyTermLabel(String),
    #[error("variable `{variable}` declares term `{term}` twice")]
    DuplicateTerm { variable: String, term: String },
    #[error("term `{term}` of variable `{variable}` is defined over a different universe")]
    ForeignUniverse { variable: String, term: String },
}

impl LinguisticVariable {
    pub fn new(
        name: impl Into<String>,
        universe: Universe,
        terms: Vec<FuzzySet>,
    ) -> Result<Self, VariableError> {
        let name = name.into();
        if name.is_empty() {
            return Err(VariableError::EmptyName);
        }
        if terms.is_empty() {
            return Err(VariableError::NoTerms(name));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.label().is_empty() {
                return Err(VariableError::EmptyTermLabel(name));
            }
            if t.universe() != &universe {
                return Err(VariableError::ForeignUniverse { variable: name, term: t.label().into() });
            }
            if terms[..i].iter().any(|o| o.label() == t.label()) {
                return Err(VariableError::DuplicateTerm { variable: name, term: t.label().into() });
            }
        }
        Ok(LinguisticVariable { name, universe, terms })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn terms(&self) -> &[FuzzySet] {
        &self.terms
    }

    pub fn term(&self, label: &str) -> Option<&FuzzySet> {
        self.terms.iter().find(|t| t.label() == label)
    }

    pub fn term_index(&self, label: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.label() == label)
    }

    /// Same variable with pending complements written into the term degrees.
    pub fn materialized(&self) -> Self {
        LinguisticVariable {
            name: self.name.clone(),
            universe: self.universe,
            terms: self.terms.iter().map(FuzzySet::materialized).collect(),
        }
    }

    /// Same variable with every term resampled at a new grid resolution.
    pub fn regrid(&self, grid_points: usize) -> Result<Self, FuzzyError> {
        let terms = self.terms.iter().map(|t| t.regrid(grid_points)).collect::<Result<_, _>>()?;
        Ok(LinguisticVariable { name: self.name.clone(), universe: self.universe.regrid(grid_points)?, terms })
    }
}
