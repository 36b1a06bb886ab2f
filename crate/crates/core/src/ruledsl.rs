//! Text format for rule bases (`.frb`).
//!
//! ```text
//! # comment
//! var height range 100 220 {
//!   term short points (165,1) (195,0);
//!   term tall points (165,0) (195,1);
//! }
//! output quality range 0 100 { term low points (0,1) (100,0); term high points (0,0) (100,1) }
//! rule: if height is tall then quality is high
//! ```
//!
//! An optional `config { and_norm min; implication clip; aggregation max;
//! defuzzifier centroid; grid_points 1001 }` statement selects operators.
//! Names that are not plain identifiers may be written as double-quoted strings.

use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::fuzzy::{FuzzyError, FuzzySet, LinguisticVariable, PiecewiseLinearMF, TNorm, Universe};
use crate::inference::{Aggregation, Defuzzifier, Implication, InferenceConfig, InferenceError, Rule, RuleBase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum DiagnosticCode {
    #[serde(rename = "E001")]
    Syntax,
    #[serde(rename = "E002")]
    InvalidNumber,
    #[serde(rename = "E003")]
    UnknownVariable,
    #[serde(rename = "E004")]
    UnknownTerm,
    #[serde(rename = "E005")]
    DuplicateVariable,
    #[serde(rename = "E006")]
    DuplicateAntecedentVariable,
    #[serde(rename = "E007")]
    NonIncreasingBreakpoint,
    #[serde(rename = "E008")]
    DegreeOutOfRange,
    #[serde(rename = "E009")]
    MissingOutput,
    #[serde(rename = "E010")]
    NoRules,
    #[serde(rename = "E011")]
    DuplicateTerm,
    #[serde(rename = "E012")]
    InvalidRange,
    #[serde(rename = "E013")]
    BreakpointOutsideRange,
    #[serde(rename = "E014")]
    TooFewPoints,
    #[serde(rename = "E015")]
    DuplicateOutput,
    #[serde(rename = "E016")]
    WrongVariableRole,
    #[serde(rename = "E017")]
    EmptyTermSet,
    #[serde(rename = "E018")]
    InvalidConfig,
    #[serde(rename = "E019")]
    InvalidUtf8,
    #[serde(rename = "E020")]
    NoInputs,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::Syntax => "E001",
            DiagnosticCode::InvalidNumber => "E002",
            DiagnosticCode::UnknownVariable => "E003",
            DiagnosticCode::UnknownTerm => "E004",
            DiagnosticCode::DuplicateVariable => "E005",
            DiagnosticCode::DuplicateAntecedentVariable => "E006",
            DiagnosticCode::NonIncreasingBreakpoint => "E007",
            DiagnosticCode::DegreeOutOfRange => "E008",
            DiagnosticCode::MissingOutput => "E009",
            DiagnosticCode::NoRules => "E010",
            DiagnosticCode::DuplicateTerm => "E011",
            DiagnosticCode::InvalidRange => "E012",
            DiagnosticCode::BreakpointOutsideRange => "E013",
            DiagnosticCode::TooFewPoints => "E014",
            DiagnosticCode::DuplicateOutput => "E015",
            DiagnosticCode::WrongVariableRole => "E016",
            DiagnosticCode::EmptyTermSet => "E017",
            DiagnosticCode::InvalidConfig => "E018",
            DiagnosticCode::InvalidUtf8 => "E019",
            DiagnosticCode::NoInputs => "E020",
        }
    }
}

/// 1-based line and column (columns count characters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl Diagnostic {
    fn new(code: DiagnosticCode, pos: Position, message: impl Into<String>) -> Self {
        Diagnostic { code, line: pos.line, column: pos.column, message: message.into() }
    }

    pub fn position(&self) -> Position {
        Position { line: self.line, column: self.column }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {} {}", self.line, self.column, self.code.as_str(), self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{}", .diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    fn one(d: Diagnostic) -> Self {
        ParseError { diagnostics: vec![d] }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Number(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Number(x) => format!("number {x}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Position,
}

fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Position { line, column: col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semi),
            ':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(tok) = single {
            advance(&mut i, &mut line, &mut col, c);
            tokens.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            tokens.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || ((c == '-' || c == '+' || c == '.')
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || (*n == '.' && c != '.')));
        if starts_number {
            let start = i;
            advance(&mut i, &mut line, &mut col, c);
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    advance(&mut i, &mut line, &mut col, d);
                } else {
                    break;
                }
            }
            let s: String = chars[start..i].iter().collect();
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => tokens.push(Token { tok: Tok::Number(x), pos }),
                _ => return Err(Diagnostic::new(DiagnosticCode::InvalidNumber, pos, format!("invalid number `{s}`"))),
            }
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(Diagnostic::new(DiagnosticCode::Syntax, pos, "unterminated string"));
                    }
                    Some('"') => {
                        advance(&mut i, &mut line, &mut col, '"');
                        break;
                    }
                    Some('\\') => {
                        advance(&mut i, &mut line, &mut col, '\\');
                        match chars.get(i) {
                            Some(&e @ ('"' | '\\')) => {
                                s.push(e);
                                advance(&mut i, &mut line, &mut col, e);
                            }
                            _ => {
                                let p = Position { line, column: col };
                                return Err(Diagnostic::new(DiagnosticCode::Syntax, p, "invalid escape in string"));
                            }
                        }
                    }
                    Some(&o) => {
                        s.push(o);
                        advance(&mut i, &mut line, &mut col, o);
                    }
                }
            }
            tokens.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        return Err(Diagnostic::new(DiagnosticCode::Syntax, pos, format!("unexpected character {c:?}")));
    }
    tokens.push(Token { tok: Tok::Eof, pos: Position { line, column: col } });
    Ok(tokens)
}

#[derive(Debug, Clone)]
struct Name {
    text: String,
    pos: Position,
}

#[derive(Debug)]
struct TermDecl {
    label: Name,
    points: Vec<(f64, f64, Position)>,
}

#[derive(Debug)]
struct VarDecl {
    is_output: bool,
    name: Name,
    pos: Position,
    range: (f64, f64, Position),
    terms: Vec<TermDecl>,
}

#[derive(Debug)]
struct RuleDecl {
    pos: Position,
    antecedent: Vec<(Name, Name)>,
    consequent: (Name, Name),
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        let t = self.peek();
        Err(Diagnostic::new(DiagnosticCode::Syntax, t.pos, format!("expected {wanted}, found {}", t.tok.describe())))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> PResult<Position> {
        if self.at_keyword(kw) {
            Ok(self.next().pos)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn punct(&mut self, tok: Tok) -> PResult<Position> {
        if self.peek().tok == tok {
            Ok(self.next().pos)
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if self.peek().tok == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn name(&mut self, what: &str) -> PResult<Name> {
        match &self.peek().tok {
            Tok::Ident(s) | Tok::Str(s) => {
                let text = s.clone();
                let pos = self.next().pos;
                Ok(Name { text, pos })
            }
            _ => self.unexpected(what),
        }
    }

    fn number(&mut self) -> PResult<(f64, Position)> {
        match self.peek().tok {
            Tok::Number(x) => Ok((x, self.next().pos)),
            _ => self.unexpected("a number"),
        }
    }

    fn var_decl(&mut self, is_output: bool) -> PResult<VarDecl> {
        let pos = self.next().pos;
        let name = self.name("a variable name")?;
        self.keyword("range")?;
        let (lo, range_pos) = self.number()?;
        let (hi, _) = self.number()?;
        self.punct(Tok::LBrace)?;
        let mut terms = Vec::new();
        loop {
            if self.eat(Tok::RBrace) {
                break;
            }
            if self.eat(Tok::Semi) {
                continue;
            }
            self.keyword("term")?;
            let label = self.name("a term label")?;
            self.keyword("points")?;
            let mut points = Vec::new();
            while self.peek().tok == Tok::LParen {
                let p = self.next().pos;
                let (x, _) = self.number()?;
                self.punct(Tok::Comma)?;
                let (d, _) = self.number()?;
                self.punct(Tok::RParen)?;
                points.push((x, d, p));
            }
            if points.is_empty() {
                return self.unexpected("`(`");
            }
            terms.push(TermDecl { label, points });
            if !matches!(self.peek().tok, Tok::Semi | Tok::RBrace) {
                return self.unexpected("`;` or `}`");
            }
        }
        Ok(VarDecl { is_output, name, pos, range: (lo, hi, range_pos), terms })
    }

    fn rule_decl(&mut self) -> PResult<RuleDecl> {
        let pos = self.next().pos;
        self.punct(Tok::Colon)?;
        self.keyword("if")?;
        let mut antecedent = Vec::new();
        loop {
            let var = self.name("a variable name")?;
            self.keyword("is")?;
            let term = self.name("a term label")?;
            antecedent.push((var, term));
            if self.at_keyword("and") {
                self.next();
            } else if self.at_keyword("then") {
                self.next();
                break;
            } else {
                return self.unexpected("`and` or `then`");
            }
        }
        let var = self.name("the output variable name")?;
        self.keyword("is")?;
        let term = self.name("a term label")?;
        self.eat(Tok::Semi);
        Ok(RuleDecl { pos, antecedent, consequent: (var, term) })
    }

    fn config(&mut self, config: &mut InferenceConfig, diags: &mut Vec<Diagnostic>) -> PResult<()> {
        self.next();
        self.punct(Tok::LBrace)?;
        loop {
            if self.eat(Tok::RBrace) {
                return Ok(());
            }
            if self.eat(Tok::Semi) {
                continue;
            }
            let key = self.name("a config key")?;
            let bad = |msg: String| Diagnostic::new(DiagnosticCode::InvalidConfig, key.pos, msg);
            if key.text == "grid_points" {
                let (n, _) = self.number()?;
                if n.fract() != 0.0 || !(2.0..=1e7).contains(&n) {
                    diags.push(bad(format!("grid_points must be an integer in [2, 10000000], got {n}")));
                } else {
                    config.grid_points = n as usize;
                }
                continue;
            }
            let value = self.name("a config value")?;
            let v = value.text.as_str();
            let result = match key.text.as_str() {
                "and_norm" => v.parse::<TNorm>().map(|x| config.and_norm = x).map_err(|e| e.to_string()),
                "implication" => v.parse::<Implication>().map(|x| config.implication = x).map_err(|e| e.to_string()),
                "aggregation" => v.parse::<Aggregation>().map(|x| config.aggregation = x).map_err(|e| e.to_string()),
                "defuzzifier" => v.parse::<Defuzzifier>().map(|x| config.defuzzifier = x).map_err(|e| e.to_string()),
                other => Err(format!("unknown config key `{other}`")),
            };
            if let Err(msg) = result {
                diags.push(bad(msg));
            }
        }
    }
}

/// Location of one top-level declaration in the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeclarationSpan {
    pub kind: DeclarationKind,
    pub name: String,
    pub position: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclarationKind {
    Config,
    Variable,
    Output,
    Rule,
}

/// Parsed source with per-declaration positions.
#[derive(Debug, Clone)]
pub struct RuleBaseDocument {
    pub source: String,
    pub rulebase: RuleBase,
    pub spans: Vec<DeclarationSpan>,
}

pub fn parse_rulebase(text: &str) -> Result<RuleBase, ParseError> {
    parse_document(text).map(|d| d.rulebase)
}

/// Accepts raw bytes; invalid UTF-8 becomes a diagnostic.
pub fn parse_rulebase_bytes(bytes: &[u8]) -> Result<RuleBase, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_rulebase(text),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = 1 + prefix.iter().filter(|&&b| b == b'\n').count();
            let last_line = prefix.rsplit(|&b| b == b'\n').next().unwrap_or(prefix);
            let column = 1 + String::from_utf8_lossy(last_line).chars().count();
            Err(ParseError::one(Diagnostic::new(
                DiagnosticCode::InvalidUtf8,
                Position { line, column },
                "input is not valid UTF-8",
            )))
        }
    }
}

pub fn parse_document(text: &str) -> Result<RuleBaseDocument, ParseError> {
    let tokens = lex(text).map_err(ParseError::one)?;
    let mut p = Parser { tokens, at: 0 };
    let mut config = InferenceConfig::default();
    let mut diags = Vec::new();
    let mut vars: Vec<VarDecl> = Vec::new();
    let mut rules: Vec<RuleDecl> = Vec::new();
    let mut spans = Vec::new();

    loop {
        let t = p.peek().clone();
        match &t.tok {
            Tok::Eof => break,
            Tok::Semi => {
                p.next();
            }
            Tok::Ident(k) if k.eq_ignore_ascii_case("var") || k.eq_ignore_ascii_case("output") => {
                let is_output = k.eq_ignore_ascii_case("output");
                let decl = p.var_decl(is_output).map_err(ParseError::one)?;
                spans.push(DeclarationSpan {
                    kind: if is_output { DeclarationKind::Output } else { DeclarationKind::Variable },
                    name: decl.name.text.clone(),
                    position: decl.pos,
                });
                vars.push(decl);
            }
            Tok::Ident(k) if k.eq_ignore_ascii_case("rule") => {
                let decl = p.rule_decl().map_err(ParseError::one)?;
                spans.push(DeclarationSpan {
                    kind: DeclarationKind::Rule,
                    name: format!("rule {}", rules.len()),
                    position: decl.pos,
                });
                rules.push(decl);
            }
            Tok::Ident(k) if k.eq_ignore_ascii_case("config") => {
                p.config(&mut config, &mut diags).map_err(ParseError::one)?;
                spans.push(DeclarationSpan { kind: DeclarationKind::Config, name: "config".into(), position: t.pos });
            }
            _ => return Err(ParseError::one(p.unexpected::<()>("`var`, `output`, `rule:` or `config`").unwrap_err())),
        }
    }
    let eof = p.peek().pos;

    let rulebase = build(&vars, &rules, config, eof, &mut diags);
    if !diags.is_empty() {
        diags.sort_by(|a, b| (a.line, a.column, a.code).cmp(&(b.line, b.column, b.code)));
        return Err(ParseError { diagnostics: diags });
    }
    let rulebase = rulebase.expect("no diagnostics implies a rule base");
    Ok(RuleBaseDocument { source: text.to_string(), rulebase, spans })
}

fn build(
    vars: &[VarDecl],
    rules: &[RuleDecl],
    config: InferenceConfig,
    eof: Position,
    diags: &mut Vec<Diagnostic>,
) -> Option<RuleBase> {
    use DiagnosticCode as C;
    let start = diags.len();

    let mut built: Vec<Option<LinguisticVariable>> = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].iter().any(|o| o.name.text == v.name.text) {
            diags.push(Diagnostic::new(
                C::DuplicateVariable,
                v.name.pos,
                format!("variable `{}` is already declared", v.name.text),
            ));
        }
        if v.is_output && vars[..i].iter().any(|o| o.is_output) {
            diags.push(Diagnostic::new(C::DuplicateOutput, v.pos, "only one output variable may be declared"));
        }
        built.push(build_variable(v, config.grid_points, diags));
    }

    let output_idx = vars.iter().position(|v| v.is_output);
    if output_idx.is_none() {
        diags.push(Diagnostic::new(C::MissingOutput, eof, "no `output` declaration"));
    }
    if !vars.iter().any(|v| !v.is_output) {
        diags.push(Diagnostic::new(C::NoInputs, eof, "no input `var` declarations"));
    }
    if rules.is_empty() {
        diags.push(Diagnostic::new(C::NoRules, eof, "no rules"));
    }

    let lookup = |name: &str| vars.iter().position(|v| v.name.text == name);
    let mut model_rules = Vec::new();
    for r in rules {
        let check = |var: &Name, term: &Name, want_output: bool, diags: &mut Vec<Diagnostic>| {
            let Some(idx) = lookup(&var.text) else {
                diags.push(Diagnostic::new(C::UnknownVariable, var.pos, format!("unknown variable `{}`", var.text)));
                return;
            };
            if vars[idx].is_output != want_output {
                let msg = if want_output {
                    format!("`{}` is not the output variable", var.text)
                } else {
                    format!("output variable `{}` cannot appear in an antecedent", var.text)
                };
                diags.push(Diagnostic::new(C::WrongVariableRole, var.pos, msg));
                return;
            }
            if !vars[idx].terms.iter().any(|t| t.label.text == term.text) {
                diags.push(Diagnostic::new(
                    C::UnknownTerm,
                    term.pos,
                    format!("variable `{}` has no term `{}`", var.text, term.text),
                ));
            }
        };
        for (i, (var, term)) in r.antecedent.iter().enumerate() {
            if r.antecedent[..i].iter().any(|(v, _)| v.text == var.text) {
                diags.push(Diagnostic::new(
                    C::DuplicateAntecedentVariable,
                    var.pos,
                    format!("variable `{}` appears twice in this rule", var.text),
                ));
            }
            check(var, term, false, diags);
        }
        check(&r.consequent.0, &r.consequent.1, true, diags);
        let ante = r.antecedent.iter().map(|(v, t)| (v.text.clone(), t.text.clone())).collect();
        if let Ok(rule) = Rule::new(ante, (r.consequent.0.text.clone(), r.consequent.1.text.clone())) {
            model_rules.push(rule);
        }
    }

    if diags.len() > start {
        return None;
    }
    let built: Vec<LinguisticVariable> = built.into_iter().map(|v| v.expect("checked")).collect();
    let output_idx = output_idx.expect("checked");
    let output = built[output_idx].clone();
    let inputs = built.into_iter().enumerate().filter(|(i, _)| *i != output_idx).map(|(_, v)| v).collect();
    match RuleBase::new(inputs, output, model_rules, config) {
        Ok(rb) => Some(rb),
        Err(e) => {
            // Everything RuleBase::new checks is diagnosed above.
            diags.push(Diagnostic::new(C::Syntax, eof, e.to_string()));
            None
        }
    }
}

fn build_variable(v: &VarDecl, grid_points: usize, diags: &mut Vec<Diagnostic>) -> Option<LinguisticVariable> {
    use DiagnosticCode as C;
    let start = diags.len();
    let (lo, hi, range_pos) = v.range;
    let universe = match Universe::with_grid(lo, hi, grid_points) {
        Ok(u) => Some(u),
        Err(_) => {
            diags.push(Diagnostic::new(
                C::InvalidRange,
                range_pos,
                format!("range {lo} {hi} of `{}` is empty", v.name.text),
            ));
            None
        }
    };
    if v.terms.is_empty() {
        diags.push(Diagnostic::new(C::EmptyTermSet, v.name.pos, format!("variable `{}` has no terms", v.name.text)));
    }
    let mut terms = Vec::new();
    for (i, t) in v.terms.iter().enumerate() {
        if v.terms[..i].iter().any(|o| o.label.text == t.label.text) {
            diags.push(Diagnostic::new(
                C::DuplicateTerm,
                t.label.pos,
                format!("term `{}` is already declared for `{}`", t.label.text, v.name.text),
            ));
        }
        if t.label.text.is_empty() {
            diags.push(Diagnostic::new(C::Syntax, t.label.pos, "term label must not be empty"));
        }
        if t.points.len() < 2 {
            diags.push(Diagnostic::new(
                C::TooFewPoints,
                t.label.pos,
                format!("term `{}` needs at least 2 points", t.label.text),
            ));
        }
        for (j, &(x, d, pos)) in t.points.iter().enumerate() {
            if j > 0 && x <= t.points[j - 1].0 {
                diags.push(Diagnostic::new(
                    C::NonIncreasingBreakpoint,
                    pos,
                    format!("breakpoint x = {x} does not increase over {}", t.points[j - 1].0),
                ));
            }
            if !(0.0..=1.0).contains(&d) {
                diags.push(Diagnostic::new(C::DegreeOutOfRange, pos, format!("degree {d} is outside [0, 1]")));
            }
            if universe.is_some_and(|u| !u.contains(x)) {
                diags.push(Diagnostic::new(
                    C::BreakpointOutsideRange,
                    pos,
                    format!("breakpoint x = {x} is outside the range {lo} {hi}"),
                ));
            }
        }
        if diags.len() == start {
            let u = universe.expect("checked");
            let mf = PiecewiseLinearMF::new(t.points.iter().map(|&(x, d, _)| (x, d)).collect());
            match mf.and_then(|mf| FuzzySet::new(t.label.text.clone(), u, mf)) {
                Ok(set) => terms.push(set),
                Err(e) => diags.push(fuzzy_diag(e, t.label.pos)),
            }
        }
    }
    if diags.len() > start {
        return None;
    }
    if v.name.text.is_empty() {
        diags.push(Diagnostic::new(C::Syntax, v.name.pos, "variable name must not be empty"));
        return None;
    }
    LinguisticVariable::new(v.name.text.clone(), universe.expect("checked"), terms).ok()
}

fn fuzzy_diag(e: FuzzyError, pos: Position) -> Diagnostic {
    let code = match e {
        FuzzyError::TooFewBreakpoints(_) => DiagnosticCode::TooFewPoints,
        FuzzyError::NonIncreasingBreakpoint { .. } => DiagnosticCode::NonIncreasingBreakpoint,
        FuzzyError::DegreeOutOfRange(_) => DiagnosticCode::DegreeOutOfRange,
        FuzzyError::BreakpointOutsideUniverse { .. } => DiagnosticCode::BreakpointOutsideRange,
        _ => DiagnosticCode::Syntax,
    };
    Diagnostic::new(code, pos, e.to_string())
}

const KEYWORDS: [&str; 13] =
    ["var", "output", "range", "term", "points", "rule", "if", "is", "and", "then", "config", "grid_points", "or"];

fn name(s: &str) -> String {
    let plain = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s));
    if plain {
        s.to_string()
    } else {
        format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

fn write_variable(out: &mut String, keyword: &str, v: &LinguisticVariable) {
    let u = v.universe();
    let _ = writeln!(out, "{keyword} {} range {} {} {{", name(v.name()), u.lo(), u.hi());
    for t in v.terms() {
        let _ = write!(out, "  term {} points", name(t.label()));
        for (x, d) in t.breakpoints() {
            let _ = write!(out, " ({x},{d})");
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
}

/// Canonical text: config (only when not default), inputs and output in
/// declaration order, then one `rule:` line per rule.
pub fn format_rulebase(rulebase: &RuleBase) -> String {
    let mut out = String::new();
    let cfg = rulebase.config();
    let def = InferenceConfig::default();
    if *cfg != def {
        let _ = writeln!(
            out,
            "config {{ and_norm {}; implication {}; aggregation {}; defuzzifier {}; grid_points {} }}\n",
            cfg.and_norm.name(),
            cfg.implication.name(),
            cfg.aggregation.name(),
            cfg.defuzzifier.name(),
            cfg.grid_points
        );
    }
    for v in rulebase.inputs() {
        write_variable(&mut out, "var", v);
    }
    write_variable(&mut out, "output", rulebase.output());
    out.push('\n');
    for r in rulebase.rules() {
        let clauses: Vec<String> =
            r.antecedent().iter().map(|(v, t)| format!("{} is {}", name(v), name(t))).collect();
        let (ov, ot) = r.consequent();
        let _ = writeln!(out, "rule: if {} then {} is {}", clauses.join(" and "), name(ov), name(ot));
    }
    out
}

impl From<InferenceError> for ParseError {
    fn from(e: InferenceError) -> Self {
        ParseError::one(Diagnostic::new(DiagnosticCode::Syntax, Position { line: 1, column: 1 }, e.to_string()))
    }
}
