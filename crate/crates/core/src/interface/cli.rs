//! Command-line front end.
//!
//! Exit codes: 0 success, 1 aggregate score below `--min-score`, 2 usage or
//! invalid input, 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{service, BatchScoreRequest, Engine, GroupBounds, RolloutInput, Settings};
use crate::dataset::{Dataset, DatasetError};
use crate::findings::{catalog, Category};
use crate::reliability::parse_type_report;
use crate::reward::{Correctness, RewardBreakdown, TestExecutor, UnavailablePolicy};
use crate::runner::{RunnerCommand, RunnerPool};
use crate::scoring::QualityReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BELOW_THRESHOLD: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "codequal", version, about = "Python code-quality analysis and reward scoring")]
struct Cli {
    /// TOML settings file with [analyzer], [reward] and [runner] sections.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Unavailable {
    Zero,
    Renormalize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze Python files and directories and print a quality report.
    Analyze {
        #[arg(required = true, value_name = "PATH")]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Exit with status 1 when the aggregate score is below this.
        #[arg(long, default_value_t = 0.0, value_name = "SCORE")]
        min_score: f64,
        /// External type-checker output to merge into the report.
        #[arg(long, value_name = "FILE")]
        type_report: Option<PathBuf>,
    },
    /// List the rule catalog.
    Rules {
        #[arg(long)]
        category: Option<Category>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Score model completions against a problem dataset.
    Reward {
        /// Problems, one JSON record per line.
        #[arg(long, value_name = "FILE")]
        problems: PathBuf,
        /// Completions, one JSON object per line:
        /// {"rollout_id", "problem_id", "completion", optional "group"}.
        #[arg(long, value_name = "FILE")]
        completions: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Test-runner command line (overrides the environment and config).
        #[arg(long, value_name = "COMMAND")]
        runner: Option<String>,
        /// How to treat correctness when tests cannot be run.
        #[arg(long, value_enum)]
        unavailable: Option<Unavailable>,
    },
    /// Run the HTTP scoring service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8787")]
        bind: String,
        /// Problems available to score requests by id.
        #[arg(long, value_name = "FILE")]
        problems: Option<PathBuf>,
    },
}

/// A line of the completions file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompletionRow {
    rollout_id: String,
    problem_id: String,
    completion: String,
    #[serde(default)]
    group: Option<String>,
}

#[derive(Debug, Serialize)]
struct RewardRow<'a> {
    rollout_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    problem_id: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    breakdown: Option<&'a RewardBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    advantage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct RewardSummary {
    rollouts: usize,
    scored: usize,
    errors: usize,
    correctness_unavailable: usize,
    mean_r_total: Option<f64>,
    config_fingerprint: String,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self { code: EXIT_USAGE, message: message.to_string() }
    }

    fn io(message: impl ToString) -> Self {
        Self { code: EXIT_IO, message: message.to_string() }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => Failure::io(e),
            _ => Failure::usage(e),
        }
    }
}

/// Entry point for the binary.
pub fn main() -> std::process::ExitCode {
    let code = run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::ExitCode::from(code as u8)
}

/// Runs the CLI with explicit arguments and output streams.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_settings(path: Option<&PathBuf>) -> Result<Settings, Failure> {
    match path {
        None => Ok(Settings::default()),
        Some(p) => Settings::load(p).map_err(|e| match e {
            crate::scoring::ConfigError::Io { .. } => Failure::io(e),
            _ => Failure::usage(e),
        }),
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let settings = load_settings(cli.config.as_ref())?;
    let io = |e: std::io::Error| Failure::io(e);
    match cli.command {
        Command::Analyze { paths, format, min_score, type_report } => {
            if !(0.0..=1.0).contains(&min_score) {
                return Err(Failure::usage("--min-score must be between 0 and 1"));
            }
            let mut analyzer = crate::scoring::Analyzer::new(settings.analyzer).map_err(Failure::usage)?;
            if let Some(path) = type_report {
                let text = std::fs::read_to_string(&path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
                let report = parse_type_report(&text);
                if !report.skipped.is_empty() {
                    let _ = writeln!(err, "warning: {} unrecognized line(s) in {}", report.skipped.len(), path.display());
                }
                analyzer = analyzer.with_external_findings(report.entries.iter().map(|e| e.to_finding()).collect());
            }
            let report = analyzer.analyze_path(&paths);
            match format {
                Format::Json => writeln!(out, "{}", report.to_json()).map_err(io)?,
                Format::Text => write_report_text(&report, out).map_err(io)?,
            }
            for w in &report.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            for e in &report.errors {
                let _ = writeln!(err, "error: {}: {}", e.path, e.message);
            }
            Ok(if !report.errors.is_empty() {
                EXIT_IO
            } else if report.aggregate_score < min_score {
                EXIT_BELOW_THRESHOLD
            } else {
                EXIT_OK
            })
        }
        Command::Rules { category, format } => {
            let rules = catalog(category);
            match format {
                Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&rules).expect("catalog serializes")).map_err(io)?,
                Format::Text => {
                    for r in &rules {
                        writeln!(
                            out,
                            "{:<32} {:<16} {:<9} {:<9} {}",
                            r.rule_id,
                            r.category,
                            r.default_severity,
                            r.cwe_id.as_deref().unwrap_or("-"),
                            r.title
                        )
                        .map_err(io)?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Reward { problems, completions, format, runner, unavailable } => {
            let mut settings = settings;
            if let Some(u) = unavailable {
                settings.reward.unavailable = match u {
                    Unavailable::Zero => UnavailablePolicy::Zero,
                    Unavailable::Renormalize => UnavailablePolicy::Renormalize,
                };
            }
            let dataset = Dataset::load(&problems)?;
            let text = std::fs::read_to_string(&completions).map_err(|e| Failure::io(format!("{}: {e}", completions.display())))?;
            let engine = match runner {
                Some(cmd) => {
                    let command = RunnerCommand::parse(&cmd).ok_or_else(|| Failure::usage("--runner must not be empty"))?;
                    let pool = RunnerPool::new(command, settings.runner.pool_options());
                    Engine::new(settings, Some(Arc::new(pool) as Arc<dyn TestExecutor>))
                }
                None => Engine::from_settings(settings),
            }
            .map_err(Failure::usage)?;
            reward(&engine, &dataset, &text, format, out).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Serve { bind, problems } => {
            let dataset = match problems {
                Some(p) => Dataset::load(&p)?,
                None => Dataset::default(),
            };
            let engine = Engine::from_settings(settings).map_err(Failure::usage)?;
            let addr: std::net::SocketAddr = bind.parse().map_err(|e| Failure::usage(format!("--bind {bind}: {e}")))?;
            let runtime = tokio::runtime::Runtime::new().map_err(io)?;
            runtime.block_on(service::serve(addr, engine, dataset)).map_err(io)?;
            Ok(EXIT_OK)
        }
    }
}

fn write_report_text(report: &QualityReport, out: &mut dyn Write) -> std::io::Result<()> {
    for file in &report.per_file {
        writeln!(
            out,
            "{}  score {:.4}  W {}  findings {}",
            file.file_label,
            file.score,
            file.weighted_sum,
            file.findings.len()
        )?;
        for f in &file.findings {
            writeln!(
                out,
                "  {}:{}  {:<8} {:<30} {:<9} {}",
                f.span.start_line,
                f.span.start_col,
                f.severity,
                f.rule_id,
                f.cwe_id.as_deref().unwrap_or("-"),
                f.message
            )?;
        }
    }
    writeln!(out, "aggregate score {:.4} over {} file(s)", report.aggregate_score, report.per_file.len())?;
    writeln!(out, "config {}", report.config_fingerprint)
}

/// Groups are maximal runs of consecutive rows sharing a `group` value.
fn reward(engine: &Engine, dataset: &Dataset, text: &str, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    let mut rollouts = Vec::new();
    let mut labels: Vec<Option<String>> = Vec::new();
    let mut parse_errors: Vec<(usize, String)> = Vec::new();
    let mut order = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CompletionRow>(line) {
            Ok(row) => {
                order.push(Ok(rollouts.len()));
                labels.push(row.group);
                rollouts.push(RolloutInput {
                    rollout_id: row.rollout_id,
                    completion: row.completion,
                    problem_id: Some(row.problem_id),
                });
            }
            Err(e) => {
                order.push(Err(parse_errors.len()));
                parse_errors.push((i + 1, format!("line {}: {e}", i + 1)));
            }
        }
    }
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i].is_none() || labels[i] != labels[start] {
            if labels[start].is_some() {
                groups.push(GroupBounds { start, end: i });
            }
            start = i;
        }
    }
    let request = BatchScoreRequest { rollouts, groups, ..Default::default() };
    let response = engine.score_batch(&request, dataset).expect("groups are built disjoint");
    let mut advantage = vec![None; request.rollouts.len()];
    for g in &response.groups {
        for (k, a) in g.advantages.iter().enumerate() {
            advantage[g.start + k] = *a;
        }
    }

    let scored: Vec<&RewardBreakdown> = response.results.iter().filter_map(|r| r.breakdown.as_ref()).collect();
    let summary = RewardSummary {
        rollouts: order.len(),
        scored: scored.len(),
        errors: order.len() - scored.len(),
        correctness_unavailable: scored.iter().filter(|b| matches!(b.correctness, Correctness::Unavailable { .. })).count(),
        mean_r_total: (!scored.is_empty()).then(|| scored.iter().map(|b| b.r_total).sum::<f64>() / scored.len() as f64),
        config_fingerprint: engine.fingerprint().to_string(),
    };
    if order.is_empty() {
        return Ok(());
    }

    if format == Format::Text {
        writeln!(out, "{:<16} {:<16} {:>8} {:>9} {:>9} {:>7} {:>9}  status", "rollout", "problem", "r_format", "r_correct", "r_quality", "r_total", "advantage")?;
    }
    for entry in &order {
        let row = match entry {
            Ok(i) => {
                let result = &response.results[*i];
                RewardRow {
                    rollout_id: &result.rollout_id,
                    problem_id: request.rollouts[*i].problem_id.as_deref(),
                    breakdown: result.breakdown.as_ref(),
                    advantage: advantage[*i],
                    error: result.error.as_deref(),
                }
            }
            Err(k) => RewardRow { rollout_id: "", problem_id: None, breakdown: None, advantage: None, error: Some(&parse_errors[*k].1) },
        };
        match format {
            Format::Json => writeln!(out, "{}", serde_json::to_string(&row).expect("row serializes"))?,
            Format::Text => write_reward_text(&row, out)?,
        }
    }
    match format {
        Format::Json => writeln!(out, "{}", serde_json::json!({ "summary": summary }))?,
        Format::Text => writeln!(
            out,
            "mean r_total {}  ({} scored, {} errors, correctness unavailable for {})",
            summary.mean_r_total.map_or("-".to_string(), |m| format!("{m:.4}")),
            summary.scored,
            summary.errors,
            summary.correctness_unavailable
        )?,
    }
    Ok(())
}

fn write_reward_text(row: &RewardRow<'_>, out: &mut dyn Write) -> std::io::Result<()> {
    let id = if row.rollout_id.is_empty() { "-" } else { row.rollout_id };
    let problem = row.problem_id.unwrap_or("-");
    match (row.breakdown, row.error) {
        (Some(b), _) => {
            let status = match &b.correctness {
                Correctness::Measured => "ok".to_string(),
                Correctness::NoCode => "no code block".to_string(),
                Correctness::Unavailable { reason, .. } => format!("r_correct unavailable: {reason}"),
            };
            let adv = row.advantage.map_or("-".to_string(), |a| format!("{a:.4}"));
            writeln!(
                out,
                "{id:<16} {problem:<16} {:>8.4} {:>9.4} {:>9.4} {:>7.4} {adv:>9}  {status}",
                b.r_format, b.r_correct, b.r_quality, b.r_total
            )
        }
        (None, error) => writeln!(out, "{id:<16} {problem:<16} error: {}", error.unwrap_or("unknown")),
    }
}
