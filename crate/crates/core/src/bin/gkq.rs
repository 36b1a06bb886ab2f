use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use gkq::fuzzy::TNorm;
use gkq::gk::{
    default_calibration, explain, generate_gk_rulebase, rank_order, Attribute, AttributeValue, GKCalibration,
    GKProfile, GkModel, QualityLevel,
};
use gkq::inference::{Defuzzifier, Implication, InferenceConfig};
use gkq::report::{round1, EvaluationReport};
use gkq::ruledsl::{format_rulebase, parse_rulebase_bytes};
use gkq::service::{self, ServiceConfig, DEFAULT_PORT, DEFAULT_STORE};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gkq", version, about = "Fuzzy goalkeeper quality scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one goalkeeper from a JSON profile file or attribute flags
    Score(ScoreArgs),
    /// Rank the goalkeepers in a CSV file
    Compare(CompareArgs),
    /// Write the generated rule base in .frb format
    GenRules(GenRulesArgs),
    /// Run the HTTP scoring service
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Args, Clone, Default)]
struct CalibrationArgs {
    /// Rating ramp as LOW,HIGH (favorable degree 0 at LOW, 1 at HIGH)
    #[arg(long, value_name = "LOW,HIGH", value_parser = parse_pair)]
    rating_ramp: Option<(f64, f64)>,
    /// Height ramp in cm as LOW,HIGH
    #[arg(long, value_name = "LOW,HIGH", value_parser = parse_pair)]
    height_ramp: Option<(f64, f64)>,
    /// Points in each universe grid
    #[arg(long)]
    grid_points: Option<usize>,
    /// AND operator: min or product
    #[arg(long)]
    and_norm: Option<TNorm>,
    /// Implication: clip or scale
    #[arg(long)]
    implication: Option<Implication>,
    /// Defuzzifier: centroid or mean_of_max
    #[arg(long)]
    defuzzifier: Option<Defuzzifier>,
    /// Use this .frb rule base instead of the generated one
    #[arg(long, value_name = "FILE")]
    rules: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// JSON profile; attribute flags override its fields
    profile: Option<PathBuf>,
    /// Exit from goal, 0-10 or good/bad
    #[arg(long = "exit", value_name = "VALUE")]
    exit_from_goal: Option<String>,
    /// Flexibility, 0-10 or good/bad
    #[arg(long = "flex", value_name = "VALUE")]
    flexibility: Option<String>,
    /// Overhead dominance, 0-10 or good/bad
    #[arg(long = "overhead", value_name = "VALUE")]
    overhead_dominance: Option<String>,
    /// Establishing connection, 0-10 or good/bad
    #[arg(long = "connect", value_name = "VALUE")]
    establishing_connection: Option<String>,
    /// Courage, 0-10 or good/bad
    #[arg(long, value_name = "VALUE")]
    courage: Option<String>,
    /// Leadership, 0-10 or good/bad
    #[arg(long = "lead", value_name = "VALUE")]
    leadership: Option<String>,
    /// Person-to-person battles, 0-10 or good/bad
    #[arg(long = "battles", value_name = "VALUE")]
    person_battles: Option<String>,
    /// Height in cm, or tall/short
    #[arg(long = "height", value_name = "VALUE")]
    height_cm: Option<String>,
    /// Print the strongest rules and the attribute degrees
    #[arg(long)]
    explain: bool,
    /// Rules shown by --explain in table output
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(flatten)]
    calibration: CalibrationArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// CSV with a `name` column and one column per profile field
    csv: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(flatten)]
    calibration: CalibrationArgs,
}

#[derive(Args)]
struct GenRulesArgs {
    /// Output file; standard output when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print the number of rules per quality level
    #[arg(long)]
    summary: bool,
    #[command(flatten)]
    calibration: CalibrationArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "GKQ_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Candidate store file
    #[arg(long, env = "GKQ_STORE", default_value = DEFAULT_STORE)]
    store: PathBuf,
    /// Allowed CORS origins, comma separated; any origin when unset
    #[arg(long, env = "GKQ_CORS_ORIGIN")]
    cors_origin: Option<String>,
    #[command(flatten)]
    calibration: CalibrationArgs,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LOW,HIGH, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// A failure with its exit code: 1 for environment errors, 2 for invalid input.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn env(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

impl CalibrationArgs {
    fn calibration(&self) -> CliResult<GKCalibration> {
        let mut cal = default_calibration();
        if let Some((lo, hi)) = self.rating_ramp {
            cal = cal.with_rating_ramp(lo, hi).map_err(|e| Failure::invalid(e.to_string()))?;
        }
        if let Some((lo, hi)) = self.height_ramp {
            cal = cal.with_ramp(Attribute::Height, lo, hi).map_err(|e| Failure::invalid(e.to_string()))?;
        }
        let config = self.apply(*cal.inference());
        cal.with_inference(config).map_err(|e| Failure::invalid(e.to_string()))
    }

    fn apply(&self, mut config: InferenceConfig) -> InferenceConfig {
        if let Some(n) = self.grid_points {
            config.grid_points = n;
        }
        if let Some(t) = self.and_norm {
            config.and_norm = t;
        }
        if let Some(i) = self.implication {
            config.implication = i;
        }
        if let Some(d) = self.defuzzifier {
            config.defuzzifier = d;
        }
        config
    }

    fn model(&self) -> CliResult<GkModel> {
        let cal = self.calibration()?;
        let Some(path) = &self.rules else { return Ok(GkModel::new(cal)) };
        let bytes = read(path)?;
        let rb = parse_rulebase_bytes(&bytes)
            .map_err(|e| Failure::invalid(format!("{}:\n{e}", path.display())))?;
        let rb = rb.with_config(self.apply(*rb.config())).map_err(|e| Failure::invalid(e.to_string()))?;
        GkModel::with_rulebase(cal, rb).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::env(format!("cannot read {}: {e}", path.display())))
}

fn emit(text: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::env(format!("stdout: {e}")))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn score(args: ScoreArgs) -> CliResult {
    let flags = [
        (Attribute::ExitFromGoal, &args.exit_from_goal, "--exit"),
        (Attribute::Flexibility, &args.flexibility, "--flex"),
        (Attribute::OverheadDominance, &args.overhead_dominance, "--overhead"),
        (Attribute::EstablishingConnection, &args.establishing_connection, "--connect"),
        (Attribute::Courage, &args.courage, "--courage"),
        (Attribute::Leadership, &args.leadership, "--lead"),
        (Attribute::PersonBattles, &args.person_battles, "--battles"),
        (Attribute::Height, &args.height_cm, "--height"),
    ];
    let mut profile = match &args.profile {
        Some(path) => {
            let bytes = read(path)?;
            serde_json::from_slice::<GKProfile>(&bytes)
                .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?
        }
        None => {
            let missing: Vec<&str> = flags.iter().filter(|(_, v, _)| v.is_none()).map(|(_, _, f)| *f).collect();
            if !missing.is_empty() {
                let mut cmd = Cli::command();
                cmd.build();
                cmd.find_subcommand_mut("score")
                    .expect("score subcommand")
                    .clone()
                    .error(
                        ErrorKind::MissingRequiredArgument,
                        format!("missing {} (or pass a profile file)", missing.join(", ")),
                    )
                    .exit();
            }
            GKProfile::from_numbers([0.0; 7], 0.0)
        }
    };
    for (attr, value, _) in flags {
        if let Some(v) = value {
            *profile.get_mut(attr) = AttributeValue::parse(v);
        }
    }

    let model = args.calibration.model()?;
    let scored = model.score(&profile).map_err(|e| Failure::invalid(e.to_string()))?;
    match args.format {
        Format::Json => emit(&EvaluationReport::new(&scored, model.rulebase()).to_json()),
        Format::Csv => emit(&format!(
            "score,score_exact,level,level_name,degenerate\n{:.1},{},{},{},{}\n",
            round1(scored.score),
            scored.score,
            scored.level.label(),
            scored.level.name(),
            scored.trace.degenerate
        )),
        Format::Table => {
            let mut out = format!("Score: {:.1}\nLevel: {}\n", round1(scored.score), scored.level);
            if scored.trace.degenerate {
                out.push_str("Note: no rule fired; score is the output midpoint\n");
            }
            if args.explain {
                out.push('\n');
                write!(out, "{}", explain(&scored, model.rulebase(), args.top)).expect("string write");
            }
            emit(&out)
        }
    }
}

#[derive(Serialize)]
struct CompareRow<'a> {
    rank: usize,
    tied: bool,
    name: &'a str,
    score: f64,
    score_exact: f64,
    level: QualityLevel,
}

fn compare(args: CompareArgs) -> CliResult {
    let bytes = read(&args.csv)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(|e| Failure::invalid(format!("{}: {e}", args.csv.display())))?.clone();
    let column = |want: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(want));
    let name_col = column("name");
    let mut cols = Vec::new();
    let mut missing = Vec::new();
    for attr in Attribute::ALL {
        match column(attr.field()) {
            Some(c) => cols.push((attr, c)),
            None => missing.push(attr.field()),
        }
    }
    if name_col.is_none() {
        missing.insert(0, "name");
    }
    if !missing.is_empty() {
        return Err(Failure::invalid(format!("{}: missing column(s): {}", args.csv.display(), missing.join(", "))));
    }
    let name_col = name_col.expect("checked");

    let model = args.calibration.model()?;
    let mut names = Vec::new();
    let mut scored = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(format!("row {line}: {e}"));
                continue;
            }
        };
        let name = row.get(name_col).unwrap_or("").to_string();
        let mut profile = GKProfile::from_numbers([0.0; 7], 0.0);
        for &(attr, c) in &cols {
            *profile.get_mut(attr) = AttributeValue::parse(row.get(c).unwrap_or(""));
        }
        match profile.validate() {
            Ok(p) => match model.score(&p) {
                Ok(s) => {
                    names.push(name);
                    scored.push(s);
                }
                Err(e) => diagnostics.push(format!("row {line} ({name}): {e}")),
            },
            Err(e) => {
                for f in e.errors {
                    diagnostics.push(format!("row {line} ({name}): {}: {}", f.field, f.message));
                }
            }
        }
    }
    if !diagnostics.is_empty() {
        return Err(Failure::invalid(diagnostics.join("\n")));
    }
    if scored.is_empty() {
        return Err(Failure::invalid(format!("{}: no candidates", args.csv.display())));
    }

    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    let rows: Vec<CompareRow> = rank_order(&scores)
        .into_iter()
        .map(|p| CompareRow {
            rank: p.rank,
            tied: p.tied,
            name: &names[p.index],
            score: round1(scored[p.index].score),
            score_exact: scored[p.index].score,
            level: scored[p.index].level,
        })
        .collect();
    let out = match args.format {
        Format::Json => serde_json::to_string(&rows).expect("rows serialize") + "\n",
        Format::Csv => {
            let mut out = String::from("rank,name,score,score_exact,level,tied\n");
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{:.1},{},{},{}",
                    r.rank,
                    csv_field(r.name),
                    r.score,
                    r.score_exact,
                    r.level.label(),
                    r.tied
                )
                .expect("string write");
            }
            out
        }
        Format::Table => {
            let width = rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(0).max(4);
            let mut lines = vec![format!("{:<5} {:<width$}  {:>5}  {:<16}", "Rank", "Name", "Score", "Level")];
            for r in &rows {
                let rank = if r.tied { format!("{}=", r.rank) } else { r.rank.to_string() };
                let tie = if r.tied { "(tie)" } else { "" };
                lines.push(format!("{rank:<5} {:<width$}  {:>5.1}  {:<16} {tie}", r.name, r.score, r.level.name()));
            }
            lines.iter().map(|l| l.trim_end().to_string() + "\n").collect()
        }
    };
    emit(&out)
}

fn gen_rules(args: GenRulesArgs) -> CliResult {
    let cal = args.calibration.calibration()?;
    let rb = generate_gk_rulebase(&cal);
    let text = format_rulebase(&rb);
    match &args.output {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| Failure::env(format!("cannot write {}: {e}", path.display())))?,
        None if !args.summary => emit(&text)?,
        None => {}
    }
    if args.summary {
        let mut out = String::new();
        for level in QualityLevel::ALL.into_iter().rev() {
            let n = rb.rules().iter().filter(|r| r.consequent().1 == level.label()).count();
            writeln!(out, "{} {n}", level.name()).expect("string write");
        }
        writeln!(out, "{} rules", rb.rules().len()).expect("string write");
        emit(&out)?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> CliResult {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let config = ServiceConfig {
        port: args.port,
        store: args.store,
        rules: args.calibration.rules.clone().or_else(|| std::env::var_os("GKQ_RULES").map(PathBuf::from)),
        cors_origin: args.cors_origin,
        calibration: Some(args.calibration.calibration()?),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::env(format!("tokio runtime: {e}")))?;
    runtime
        .block_on(service::serve(config))
        .map_err(|e| Failure { code: e.exit_code() as u8, message: e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(a) => score(a),
        Command::Compare(a) => compare(a),
        Command::GenRules(a) => gen_rules(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
