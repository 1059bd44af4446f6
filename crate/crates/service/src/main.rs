use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use webrag_core::evaluation::{auto_grade, GradeRecord, MatchMode};
use webrag_core::pipeline::{AnswerMode, RAG_STAGES};
use webrag_service::{api, App, AskResponse, Overrides, ServiceConfig, ServiceError};

#[derive(Debug, Parser)]
#[command(
    name = "webrag",
    version,
    about = "Online retrieval-augmented QA and evaluation bench"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "WEBRAG_CONFIG")]
    config: Option<PathBuf>,
    /// Fixture corpus and scripted backends; no network access.
    #[arg(long, global = true)]
    offline: bool,
    /// Seed for bootstrap resampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Extra `section.key=value` setting; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Answer one question and print the answer, sources and timings.
    Ask(AskArgs),
    /// Run a dataset through one or more conditions and store the traces.
    Eval(EvalArgs),
    /// Record grades for a run.
    Grade(GradeArgs),
    /// Print accuracy, comparison and relevance tables for a graded run.
    Report(ReportArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// List known datasets.
    Datasets,
    /// List runs in the data directory.
    Runs,
}

#[derive(Debug, Args)]
struct AskArgs {
    #[arg(long)]
    question: String,
    #[arg(long, default_value = "rag")]
    mode: AnswerMode,
    /// Answering profile; defaults to the configured one.
    #[arg(long)]
    profile: Option<String>,
    /// Print the response as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Dataset name or JSONL path.
    #[arg(long, required_unless_present = "resume")]
    dataset: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "rag,conventional")]
    modes: Vec<AnswerMode>,
    /// Answering profile; repeatable.
    #[arg(long = "profile")]
    profiles: Vec<String>,
    #[arg(long, conflicts_with = "resume")]
    run_id: Option<String>,
    /// Continue an existing run; completed traces are kept.
    #[arg(long)]
    resume: Option<String>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["auto", "import"])))]
struct GradeArgs {
    #[arg(long)]
    run: String,
    /// Grade by matching answers against the reference.
    #[arg(long)]
    auto: bool,
    /// With --auto: every clause of the reference must match.
    #[arg(long, requires = "auto")]
    strict: bool,
    /// JSONL file of grade records.
    #[arg(long)]
    import: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    run: String,
    /// Print the report lines as JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Listen address, e.g. 127.0.0.1:8750.
    #[arg(long)]
    bind: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

async fn run(cli: Cli) -> Result<(), ServiceError> {
    let bind = match &cli.command {
        Command::Serve(a) => a.bind.clone(),
        _ => None,
    };
    let overrides = Overrides {
        offline: cli.offline,
        seed: cli.seed,
        data_dir: cli.data_dir.clone(),
        bind,
        set: cli.set.clone(),
    };
    let config = ServiceConfig::load(cli.config.as_deref(), std::env::vars(), &overrides)?;
    let app = App::open(config)?;
    let mut out = std::io::stdout().lock();
    let w = |e: std::io::Error| ServiceError::Io {
        path: "<stdout>".into(),
        source: e,
    };
    match cli.command {
        Command::Ask(a) => {
            let trace = app.ask(&a.question, a.mode, a.profile.as_deref()).await?;
            let resp = AskResponse::from(&trace);
            if a.json {
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&resp).expect("serializes")
                )
                .map_err(w)?;
            } else {
                write!(out, "{}", render_answer(&resp)).map_err(w)?;
            }
        }
        Command::Eval(a) => {
            let run = match &a.resume {
                Some(id) => app
                    .workspace
                    .run(id)
                    .ok_or_else(|| ServiceError::NotFound(format!("run {id}")))?,
                None => app.create_run(
                    a.run_id.clone(),
                    a.dataset.as_deref().expect("required by clap"),
                    &a.modes,
                    &a.profiles,
                )?,
            };
            let traces = app.execute_run(&run).await?;
            let failed = traces.iter().filter(|t| !t.is_completed()).count();
            let m = run.manifest();
            writeln!(
                out,
                "run {}: {} trace(s) for {} item(s) x {} condition(s), {} failed\ntraces: {}",
                m.run_id,
                traces.len(),
                run.dataset().len(),
                m.conditions.len(),
                failed,
                run.dir().join(webrag_core::pipeline::TRACES_FILE).display()
            )
            .map_err(w)?;
        }
        Command::Grade(a) => {
            let run = app
                .workspace
                .run(&a.run)
                .ok_or_else(|| ServiceError::NotFound(format!("run {}", a.run)))?;
            let grades: Vec<GradeRecord> = if a.auto {
                let mode = if a.strict {
                    MatchMode::AutoMatchStrict
                } else {
                    MatchMode::AutoMatch
                };
                auto_grade(run.dataset(), &run.traces.traces(), mode)
            } else {
                read_grades(a.import.as_deref().expect("required by clap group"))?
            };
            app.submit_grades(Some(&a.run), &grades)?;
            let correct = grades.iter().filter(|g| g.correct == 1).count();
            writeln!(
                out,
                "run {}: recorded {} grade(s), {} correct",
                a.run,
                grades.len(),
                correct
            )
            .map_err(w)?;
        }
        Command::Report(a) => {
            let run = app
                .workspace
                .run(&a.run)
                .ok_or_else(|| ServiceError::NotFound(format!("run {}", a.run)))?;
            let report = run.report(&app.config.stats_config())?;
            if a.json {
                write!(out, "{}", report.to_jsonl()).map_err(w)?;
            } else {
                write!(out, "{}", report.render_text()).map_err(w)?;
            }
        }
        Command::Serve(_) => {
            drop(out);
            api::serve(Arc::clone(&app)).await?;
        }
        Command::Datasets => {
            for d in app.datasets.describe()? {
                writeln!(
                    out,
                    "{}\t{} items\t{}",
                    d.name,
                    d.n_items,
                    d.subspecialties.join(", ")
                )
                .map_err(w)?;
            }
        }
        Command::Runs => {
            for r in app.workspace.runs() {
                let m = r.manifest();
                writeln!(
                    out,
                    "{}\t{}\t{:?}\t{}/{}",
                    m.run_id, m.dataset, m.status, m.done, m.total
                )
                .map_err(w)?;
            }
        }
    }
    Ok(())
}

fn render_answer(r: &AskResponse) -> String {
    let mut s = format!(
        "Answer ({} mode, profile {}, trace {}):\n{}\n",
        r.mode, r.profile, r.trace_id, r.answer
    );
    if let Some(e) = &r.error {
        s.push_str(&format!("\nError: {e}\n"));
    }
    if !r.sources.is_empty() {
        s.push_str("\nSources:\n");
        for (i, src) in r.sources.iter().enumerate() {
            s.push_str(&format!("  [{}] {} <{}>\n", i + 1, src.title, src.url));
        }
    }
    if !r.stage_timings_ms.is_empty() {
        let t: Vec<String> = RAG_STAGES
            .iter()
            .filter_map(|k| r.stage_timings_ms.get(*k).map(|v| (*k, v)))
            .chain(
                r.stage_timings_ms
                    .iter()
                    .filter(|(k, _)| !RAG_STAGES.contains(&k.as_str()))
                    .map(|(k, v)| (k.as_str(), v)),
            )
            .map(|(k, v)| format!("{k} {v} ms"))
            .collect();
        s.push_str(&format!("\nTimings: {}\n", t.join(", ")));
    }
    for warning in &r.warnings {
        s.push_str(&format!("Warning: {warning}\n"));
    }
    s
}

/// Every non-blank line must be a grade record; the file is never modified.
fn read_grades(path: &Path) -> Result<Vec<GradeRecord>, ServiceError> {
    let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                ServiceError::Invalid(format!("{} line {}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}
