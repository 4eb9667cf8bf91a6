//! The `graphtod` command line: validate, generate, chat and stats.
//!
//! Exit codes: 0 success, 1 invalid graph, 2 usage error, 3 backend or
//! runtime failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::function_calls::Invoker;
use crate::graph::{
    load_graph, validate_graph, ActionTransitionGraph, LoadError, ValidationReport,
};
use crate::llm::{HttpBackend, HttpConfig, LlmBackend, ScriptTable, ScriptedBackend, API_KEY_ENV};
use crate::persona::{generate_persona, PrefSource};
use crate::prompts::TemplateSet;
use crate::scenarios;
use crate::simulation::{
    corpus_stats, BackendMeta, CorpusLine, Counts, DialogueHistory, DialogueRecord, Outcome,
    Pipeline, PrefMode, SimulationConfig, Speaker, SystemState, TurnRecord,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variables consulted between flags and the config file.
pub const BASE_URL_ENV: &str = "GRAPHTOD_BASE_URL";
pub const MODEL_ENV: &str = "GRAPHTOD_MODEL";

#[derive(Debug, Parser)]
#[command(
    name = "graphtod",
    version,
    about = "Simulate task-oriented dialogues over action transition graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a graph file and print every problem found.
    Validate {
        /// Graph JSON file.
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write a JSONL corpus of simulated dialogues.
    Generate(GenerateArgs),
    /// Play the user against the system agent in the terminal.
    Chat(ChatArgs),
    /// Summarize a JSONL corpus.
    Stats {
        /// Corpus file, one dialogue per line.
        corpus: PathBuf,
        /// Graphs to measure coverage against (default: the bundled scenarios).
        #[arg(long = "graph")]
        graphs: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BackendKind {
    Scripted,
    Http,
}

#[derive(Debug, Args)]
struct BackendArgs {
    /// Language model backend [default: scripted].
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Script table (JSON object of `template[:node][:turn]` keys) for the scripted backend.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Chat-completions base URL for the http backend.
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Request timeout in seconds.
    #[arg(long)]
    timeout: Option<u64>,
    #[arg(long)]
    retries: Option<u32>,
    /// TOML file with a [backend] table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with replacement prompt templates.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Graph file or bundled scenario name; repeat to round-robin over several.
    #[arg(long = "graph", required = true)]
    graphs: Vec<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    /// Maximum utterances per dialogue.
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(3..))]
    max_turns: u64,
    /// Consecutive unrecognized turns that end a dialogue.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    max_unrecognized: u32,
    #[arg(long, value_enum, default_value_t = PrefMode::Derived)]
    pref_mode: PrefMode,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct ChatArgs {
    /// Graph file or bundled scenario name.
    #[arg(long)]
    graph: String,
    /// Seed for the persona whose preferences drive fixture filters.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(3..))]
    max_turns: u64,
    /// Write the finished dialogue as one JSONL record.
    #[arg(long)]
    save: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

/// Keys of the optional `[backend]` table in a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackendFile {
    kind: Option<BackendKind>,
    base_url: Option<String>,
    model: Option<String>,
    timeout_s: Option<u64>,
    retries: Option<u32>,
    backoff_ms: Option<u64>,
    max_concurrency: Option<usize>,
    script: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    backend: BackendFile,
}

/// A command failure: exit code plus message for standard error.
#[derive(Debug)]
struct Failure(i32, String);

type CmdResult = Result<i32, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

/// Entry point of the binary.
pub fn run() -> i32 {
    let stdin = io::stdin();
    run_with(
        std::env::args_os(),
        &mut stdin.lock(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
        &|name| std::env::var(name).ok(),
    )
}

/// Run with explicit arguments, streams and environment.
pub fn run_with<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    env: &dyn Fn(&str) -> Option<String>,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stdout_or_stderr(&e, stdout, stderr), "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Validate { graph, format } => cmd_validate(&graph, format, stdout),
        Command::Generate(args) => cmd_generate(args, stdout, stderr, env),
        Command::Chat(args) => cmd_chat(args, stdin, stdout, env),
        Command::Stats {
            corpus,
            graphs,
            format,
        } => cmd_stats(&corpus, &graphs, format, stdout),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            code
        }
    }
}

fn stdout_or_stderr<'a>(
    e: &clap::Error,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
) -> &'a mut dyn Write {
    if e.use_stderr() {
        stderr
    } else {
        stdout
    }
}

fn io_failure(e: io::Error) -> Failure {
    Failure(EXIT_RUNTIME, e.to_string())
}

/// A graph plus the report that goes with it; parse failures become errors.
fn load_checked(
    graph_arg: &str,
) -> Result<(ActionTransitionGraph, ValidationReport), Result<ValidationReport, Failure>> {
    let path = Path::new(graph_arg);
    if !path.exists() {
        if let Some(g) = scenarios::by_name(graph_arg) {
            let report = validate_graph(&g);
            return Ok((g, report));
        }
    }
    match load_graph(path) {
        Ok(g) => {
            let report = validate_graph(&g);
            Ok((g, report))
        }
        Err(LoadError::Io { path, source }) => {
            Err(Err(usage(format!("cannot read {path}: {source}"))))
        }
        Err(LoadError::Parse(e)) => Err(Ok(ValidationReport {
            errors: e.diagnostics,
            warnings: Vec::new(),
        })),
    }
}

/// Load and require a valid graph; prints the report to `out` when invalid.
fn load_valid(graph_arg: &str, out: &mut dyn Write) -> Result<ActionTransitionGraph, Failure> {
    let report = match load_checked(graph_arg) {
        Ok((g, report)) if report.is_ok() => return Ok(g),
        Ok((_, report)) => report,
        Err(Ok(report)) => report,
        Err(Err(f)) => return Err(f),
    };
    writeln!(out, "{graph_arg}:\n{report}").map_err(io_failure)?;
    Err(Failure(
        EXIT_INVALID,
        format!("{graph_arg} is not a valid graph"),
    ))
}

fn cmd_validate(path: &Path, format: Format, out: &mut dyn Write) -> CmdResult {
    let report = match load_checked(&path.to_string_lossy()) {
        Ok((_, report)) | Err(Ok(report)) => report,
        Err(Err(f)) => return Err(f),
    };
    match format {
        Format::Text => {
            writeln!(out, "{report}").map_err(io_failure)?;
        }
        Format::Json => {
            let json = serde_json::json!({
                "valid": report.is_ok(),
                "errors": report.errors,
                "warnings": report.warnings,
            });
            writeln!(out, "{json}").map_err(io_failure)?;
        }
    }
    Ok(if report.is_ok() {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}

fn read_config(path: Option<&Path>) -> Result<BackendFile, Failure> {
    let Some(path) = path else {
        return Ok(BackendFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str::<ConfigFile>(&text)
        .map(|c| c.backend)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Resolve backend settings with precedence flags > environment > config file.
fn build_backend(
    args: &BackendArgs,
    seed: u64,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<(Box<dyn LlmBackend>, TemplateSet), Failure> {
    let file = read_config(args.config.as_deref())?;
    let templates = match &args.templates {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|e| usage(e.to_string()))?,
        None => TemplateSet::builtin(),
    };
    let kind = args.backend.or(file.kind).unwrap_or(BackendKind::Scripted);
    let backend: Box<dyn LlmBackend> = match kind {
        BackendKind::Scripted => {
            let table = match args.script.as_ref().or(file.script.as_ref()) {
                Some(path) => ScriptTable::load(path).map_err(|e| usage(e.to_string()))?,
                None => ScriptTable::new(),
            };
            Box::new(ScriptedBackend::new(table, file.seed.unwrap_or(seed)))
        }
        BackendKind::Http => {
            let api_key = env(API_KEY_ENV)
                .filter(|k| !k.is_empty())
                .ok_or_else(|| usage(format!("the http backend needs {API_KEY_ENV} to be set")))?;
            let defaults = HttpConfig::default();
            let config = HttpConfig {
                base_url: args
                    .base_url
                    .clone()
                    .or_else(|| env(BASE_URL_ENV))
                    .or(file.base_url)
                    .unwrap_or(defaults.base_url),
                model: args
                    .model
                    .clone()
                    .or_else(|| env(MODEL_ENV))
                    .or(file.model)
                    .unwrap_or(defaults.model),
                api_key: Some(api_key),
                timeout: args
                    .timeout
                    .or(file.timeout_s)
                    .map(Duration::from_secs)
                    .unwrap_or(defaults.timeout),
                retries: args.retries.or(file.retries).unwrap_or(defaults.retries),
                backoff_base: file
                    .backoff_ms
                    .map(Duration::from_millis)
                    .unwrap_or(defaults.backoff_base),
                max_concurrency: file.max_concurrency.unwrap_or(defaults.max_concurrency),
            };
            url::Url::parse(&config.base_url)
                .map_err(|e| usage(format!("bad base URL {}: {e}", config.base_url)))?;
            Box::new(HttpBackend::new(config).map_err(|e| Failure(EXIT_RUNTIME, e.to_string()))?)
        }
    };
    Ok((backend, templates))
}

fn histogram_line(histogram: &BTreeMap<Outcome, usize>) -> String {
    Outcome::ALL
        .iter()
        .map(|o| format!("{o}={}", histogram.get(o).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_generate(
    args: GenerateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    env: &dyn Fn(&str) -> Option<String>,
) -> CmdResult {
    let graphs = args
        .graphs
        .iter()
        .map(|arg| load_valid(arg, stderr))
        .collect::<Result<Vec<_>, _>>()?;
    let (backend, templates) = build_backend(&args.backend, args.seed, env)?;
    let invoker = Invoker::new();
    let pipeline = Pipeline::new(&templates, backend.as_ref(), &invoker);
    let config = SimulationConfig {
        max_turns: args.max_turns as usize,
        max_consecutive_unrecognized: args.max_unrecognized,
        pref_mode: args.pref_mode,
    };

    let mut file;
    let sink: &mut dyn Write = match &args.out {
        Some(path) => {
            file = BufWriter::new(
                File::create(path)
                    .map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?,
            );
            &mut file
        }
        None => stdout,
    };
    let n = args.count as usize;
    let refs: Vec<&ActionTransitionGraph> = graphs.iter().collect();
    let mut histogram: BTreeMap<Outcome, usize> = BTreeMap::new();
    let mut write_error = None;
    pipeline.generate_corpus_with(
        &refs,
        n,
        &config,
        args.seed,
        args.workers as usize,
        |_, record| {
            *histogram.entry(record.outcome).or_default() += 1;
            if write_error.is_none() {
                if let Err(e) = writeln!(sink, "{}", record.to_json_line()) {
                    write_error = Some(e);
                }
            }
        },
    );
    if let Some(e) = write_error {
        return Err(io_failure(e));
    }
    sink.flush().map_err(io_failure)?;

    let target = args.out.as_ref().map_or_else(
        || "standard output".to_string(),
        |p| p.display().to_string(),
    );
    writeln!(
        stderr,
        "wrote {n} dialogues to {target}: {}",
        histogram_line(&histogram)
    )
    .map_err(io_failure)?;
    let failed = histogram.get(&Outcome::BackendError).copied().unwrap_or(0);
    if failed * 2 > n {
        return Err(Failure(
            EXIT_RUNTIME,
            format!("{failed} of {n} dialogues hit backend errors"),
        ));
    }
    Ok(EXIT_OK)
}

fn cmd_chat(
    args: ChatArgs,
    stdin: &mut dyn BufRead,
    out: &mut dyn Write,
    env: &dyn Fn(&str) -> Option<String>,
) -> CmdResult {
    let g = load_valid(&args.graph, out)?;
    let (backend, templates) = build_backend(&args.backend, args.seed, env)?;
    let invoker = Invoker::new();
    let pipeline = Pipeline::new(&templates, backend.as_ref(), &invoker);
    let session = ChatSession::new(&g, pipeline, args.seed, args.max_turns as usize);
    let (record, code) = session.run(stdin, out).map_err(io_failure)?;
    if let Some(path) = &args.save {
        let mut f = File::create(path)
            .map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?;
        writeln!(f, "{}", record.to_json_line()).map_err(io_failure)?;
    }
    Ok(code)
}

/// Interactive harness around [`Pipeline::system_step`]; the human types the
/// user turns.
pub struct ChatSession<'a> {
    graph: &'a ActionTransitionGraph,
    pipeline: Pipeline<'a>,
    state: SystemState,
    record: DialogueRecord,
    max_turns: usize,
}

impl<'a> ChatSession<'a> {
    pub fn new(
        graph: &'a ActionTransitionGraph,
        pipeline: Pipeline<'a>,
        seed: u64,
        max_turns: usize,
    ) -> Self {
        let persona = generate_persona(graph, seed, PrefSource::Derived)
            .expect("derived personas never fail");
        Self {
            graph,
            pipeline,
            state: SystemState::start(graph),
            record: DialogueRecord {
                graph_name: graph.name().to_string(),
                seed,
                persona,
                utterances: DialogueHistory::new(graph.starting_utterance()),
                turns: Vec::new(),
                knowledge: Default::default(),
                outcome: Outcome::Truncated,
                backend: BackendMeta::of(pipeline.backend),
                counts: Counts::default(),
            },
            max_turns,
        }
    }

    /// Read user lines until the dialogue ends, `/quit` or end of input.
    /// Returns the record and the exit code.
    pub fn run(
        mut self,
        input: &mut dyn BufRead,
        out: &mut dyn Write,
    ) -> io::Result<(DialogueRecord, i32)> {
        writeln!(out, "System: {}", self.graph.starting_utterance())?;
        let mut code = EXIT_OK;
        let mut line = String::new();
        loop {
            if self.record.utterances.len() + 2 > self.max_turns {
                writeln!(out, "(utterance limit reached)")?;
                break;
            }
            write!(out, "> ")?;
            out.flush()?;
            line.clear();
            if input.read_line(&mut line)? == 0 {
                writeln!(out)?;
                break;
            }
            let text = line.trim();
            match text {
                "" => continue,
                "/quit" => break,
                "/state" => {
                    self.print_state(out)?;
                    continue;
                }
                "/history" => {
                    for u in self.record.utterances.utterances() {
                        writeln!(out, "{:>3} {}: {}", u.index, u.speaker.label(), u.text)?;
                    }
                    continue;
                }
                _ => {}
            }
            match self.exchange(text) {
                Ok((reply, terminal)) => {
                    writeln!(out, "System: {reply}")?;
                    if terminal {
                        self.record.outcome = Outcome::Completed;
                        break;
                    }
                }
                Err(msg) => {
                    writeln!(out, "error: {msg}")?;
                    self.record.outcome = Outcome::BackendError;
                    code = EXIT_RUNTIME;
                    break;
                }
            }
        }
        let r = &mut self.record;
        r.counts = Counts {
            turns: r.turns.len() as u32,
            mismatches: 0,
            unrecognized: r
                .turns
                .iter()
                .filter(|t| !t.detected.is_recognized())
                .count() as u32,
        };
        r.knowledge = self.state.knowledge;
        Ok((self.record, code))
    }

    fn print_state(&self, out: &mut dyn Write) -> io::Result<()> {
        let actions = self
            .graph
            .available_actions(self.state.node.as_str())
            .map(|set| {
                set.iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            })
            .unwrap_or_default();
        writeln!(out, "node: {}", self.state.node)?;
        writeln!(out, "actions: {actions}")?;
        writeln!(out, "knowledge: {}", self.state.knowledge.len())
    }

    fn exchange(&mut self, text: &str) -> Result<(String, bool), String> {
        let turn = self.record.turns.len() as u32 + 1;
        self.record
            .utterances
            .push(Speaker::User, text)
            .map_err(|e| e.to_string())?;
        let node_before = self.state.node.clone();
        let reply = self
            .pipeline
            .system_step(
                self.graph,
                &mut self.state,
                &self.record.utterances,
                &self.record.persona,
                turn,
                None,
            )
            .map_err(|e| e.to_string())?;
        let text = reply.utterance.text.clone();
        self.record
            .utterances
            .append(reply.utterance)
            .map_err(|e| e.to_string())?;
        self.record.turns.push(TurnRecord {
            turn,
            node_before,
            ground_truth_action: None,
            detected: reply.intent,
            node_after: reply.node_after,
            api_results: reply.api_results,
            mismatch: false,
        });
        Ok((text, reply.terminal))
    }
}

fn cmd_stats(path: &Path, graph_args: &[String], format: Format, out: &mut dyn Write) -> CmdResult {
    let file =
        File::open(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| usage(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = CorpusLine::from_json(&line)
            .map_err(|e| usage(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        lines.push(parsed);
    }
    let graphs = if graph_args.is_empty() {
        scenarios::all()
    } else {
        graph_args
            .iter()
            .map(|arg| load_valid(arg, out))
            .collect::<Result<Vec<_>, _>>()?
    };
    let refs: Vec<&ActionTransitionGraph> = graphs.iter().collect();
    let stats = corpus_stats(&lines, &refs);
    match format {
        Format::Json => {
            writeln!(
                out,
                "{}",
                serde_json::to_string(&stats).expect("stats serialize")
            )
            .map_err(io_failure)?;
        }
        Format::Text => {
            let rows = [
                ("dialogues", stats.dialogues.to_string()),
                ("mean turns", format!("{:.3}", stats.mean_turns)),
                ("node coverage", format!("{:.3}", stats.node_coverage)),
                ("action coverage", format!("{:.3}", stats.action_coverage)),
                (
                    "unrecognized rate",
                    format!("{:.3}", stats.unrecognized_rate),
                ),
                ("mismatch rate", format!("{:.3}", stats.mismatch_rate)),
            ];
            for (k, v) in rows {
                writeln!(out, "{k:<18} {v}").map_err(io_failure)?;
            }
            for (outcome, n) in &stats.outcome_histogram {
                writeln!(out, "{:<18} {n}", format!("  {outcome}")).map_err(io_failure)?;
            }
        }
    }
    Ok(EXIT_OK)
}
