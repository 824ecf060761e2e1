//! `evogrid`: file-based pipeline over the summarization engine.
//!
//! Stages mirror the four-stage architecture: extract messages from
//! documents, build or extend the grid, query sub-grids, plan, realize.
//! Every stage reads stdin when no input path is given and writes stdout
//! when no `--out` is given, so stages compose with shell pipes.
//!
//! Exit codes: 0 success, 1 domain error (parse/validation/eval failure),
//! 2 usage or I/O error.

use clap::{Parser, Subcommand, ValueEnum};
use evogrid::diag::{has_errors, Severity};
use evogrid::eval::{score_messages, score_relations, MatchMode};
use evogrid::evolution::{
    classify_linearity, classify_synchronicity, generate_stream, ActivityTimeline,
    LinearityVerdict, Regime, ReportStream, StreamParams, SyncVerdict,
};
use evogrid::extract::{extract_messages_logged, parse_documents, Gazetteer, TriggerLexicon};
use evogrid::grid::{build_grid, deserialize_grid, query_subgrid, serialize_grid, Grid, GridQuery};
use evogrid::message::{parse_message_stream, MessageInstance};
use evogrid::planner::{
    build_document_plan, deserialize_plan, realize, serialize_plan, TemplatePack,
};
use evogrid::spec_dsl::{
    parse_topic_spec, validate_topic_spec, DiachronicPolicy, PlannerMode, TopicSpec,
};
use evogrid::timestamp::Timestamp;
use serde::Serialize;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "evogrid",
    version,
    about = "Evolving-event summarization pipeline"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Linear,
    Nonlinear,
}

impl From<ModeArg> for PlannerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Linear => PlannerMode::Linear,
            ModeArg::Nonlinear => PlannerMode::NonLinear,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalModeArg {
    TypeOnly,
    TypeAndArgs,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a topic spec; prints diagnostics as file:line:col: severity: message
    Validate {
        /// Topic spec file (.topic)
        spec: PathBuf,
    },
    /// Extract messages from tokenized documents (JSONL) into a report stream
    Extract {
        /// Tokenized documents, one JSON object per line; stdin if omitted
        input: Option<PathBuf>,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        gazetteer: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a grid from a report stream (JSONL)
    Grid {
        /// Report stream; stdin if omitted
        input: Option<PathBuf>,
        #[arg(long)]
        spec: PathBuf,
        /// Override the synchronic window (minutes)
        #[arg(long)]
        window: Option<u32>,
        /// Override the diachronic policy: `unbounded` or `exact:<k>`
        #[arg(long)]
        distance: Option<String>,
        /// Override the planner mode recorded in the grid
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump a grid's relation edge list
    Relations {
        /// Grid document; stdin if omitted
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter a grid into a sub-grid
    Query {
        /// Grid document; stdin if omitted
        input: Option<PathBuf>,
        /// Keep messages binding any of these entity ids
        #[arg(long = "entity")]
        entities: Vec<String>,
        /// Keep messages of any of these types
        #[arg(long = "type")]
        msg_types: Vec<String>,
        /// Keep messages from any of these sources
        #[arg(long = "source")]
        sources: Vec<String>,
        /// Reference-time interval start (YYYYMMDDHHMM)
        #[arg(long)]
        from: Option<String>,
        /// Reference-time interval end (YYYYMMDDHHMM)
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a document plan from a grid
    Plan {
        /// Grid document; stdin if omitted
        input: Option<PathBuf>,
        /// Bucketing mode; defaults to the grid's own
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Realize a document plan through a template pack
    Realize {
        /// Plan document; stdin if omitted
        input: Option<PathBuf>,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify linearity and synchronicity of report streams
    Analyze {
        /// Streams file (JSONL); stdin if omitted
        #[arg(long)]
        streams: Option<PathBuf>,
        /// Explicit time unit in minutes; inferred from the minimum gap if omitted
        #[arg(long)]
        unit: Option<i64>,
        /// Publication-time alignment tolerance in minutes
        #[arg(long, default_value_t = 0)]
        tolerance: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic activity timelines and report streams
    Synth {
        #[arg(long)]
        regime: String,
        #[arg(long, default_value_t = 3)]
        sources: usize,
        #[arg(long, default_value_t = 5)]
        min_reports: usize,
        #[arg(long, default_value_t = 12)]
        max_reports: usize,
        /// Time unit in minutes
        #[arg(long, default_value_t = 10080)]
        unit: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// First activity time (YYYYMMDDHHMM)
        #[arg(long, default_value = "200301050000")]
        start: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predicted grid against a gold grid
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value = "type-and-args")]
        mode: EvalModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("evogrid: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

struct CmdError {
    code: u8,
    message: String,
}

/// Domain failure: bad content in well-formed inputs.
fn domain(message: impl Into<String>) -> CmdError {
    CmdError {
        code: 1,
        message: message.into(),
    }
}

/// Usage or I/O failure: missing/unreadable files, bad flags.
fn usage(message: impl Into<String>) -> CmdError {
    CmdError {
        code: 2,
        message: message.into(),
    }
}

// ──────────────────────────────────────────────
// File plumbing
// ──────────────────────────────────────────────

/// Resolve a path, falling back to `$EVOGRID_FIXTURES/<path>` when the file
/// does not exist as given.
fn resolve(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    if let Ok(root) = std::env::var("EVOGRID_FIXTURES") {
        let candidate = Path::new(&root).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}

fn read_file(path: &Path) -> Result<String, CmdError> {
    let resolved = resolve(path);
    std::fs::read_to_string(&resolved)
        .map_err(|e| usage(format!("reading {}: {e}", resolved.display())))
}

fn read_input(path: Option<&PathBuf>) -> Result<String, CmdError> {
    match path {
        Some(p) if p.as_os_str() != "-" => read_file(p),
        _ => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| usage(format!("reading stdin: {e}")))?;
            Ok(buf)
        }
    }
}

/// Write through a temp file in the target directory and rename into place.
fn write_output(path: Option<&PathBuf>, content: &str) -> Result<(), CmdError> {
    match path {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty());
            let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
                .map_err(|e| usage(format!("creating temp file: {e}")))?;
            std::io::Write::write_all(&mut tmp, content.as_bytes())
                .map_err(|e| usage(format!("writing {}: {e}", p.display())))?;
            tmp.persist(p)
                .map_err(|e| usage(format!("writing {}: {e}", p.display())))?;
            Ok(())
        }
    }
}

fn load_spec(path: &Path) -> Result<TopicSpec, CmdError> {
    let text = read_file(path)?;
    parse_topic_spec(&text).map_err(|e| domain(format!("{}:{e}", path.display())))
}

fn load_grid(path: Option<&PathBuf>) -> Result<Grid, CmdError> {
    let text = read_input(path)?;
    deserialize_grid(&text).map_err(|e| domain(e.to_string()))
}

// ──────────────────────────────────────────────
// Stream file format for analyze/synth
// ──────────────────────────────────────────────

#[derive(Serialize, serde::Deserialize)]
struct TimelineRecord {
    timeline: Vec<Timestamp>,
}

#[derive(Serialize, serde::Deserialize)]
struct StreamRecord {
    source: String,
    pub_times: Vec<Timestamp>,
}

fn parse_streams(text: &str) -> Result<(Option<ActivityTimeline>, Vec<ReportStream>), CmdError> {
    let mut timeline = None;
    let mut streams = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Ok(t) = serde_json::from_str::<TimelineRecord>(line) {
            timeline = Some(
                ActivityTimeline::new(t.timeline)
                    .map_err(|e| domain(format!("line {}: {e}", idx + 1)))?,
            );
            continue;
        }
        let rec: StreamRecord =
            serde_json::from_str(line).map_err(|e| domain(format!("line {}: {e}", idx + 1)))?;
        streams.push(
            ReportStream::new(rec.source, rec.pub_times)
                .map_err(|e| domain(format!("line {}: {e}", idx + 1)))?,
        );
    }
    Ok((timeline, streams))
}

// ──────────────────────────────────────────────
// Subcommands
// ──────────────────────────────────────────────

fn run(cmd: Cmd) -> Result<(), CmdError> {
    match cmd {
        Cmd::Validate { spec } => {
            let file = spec.display().to_string();
            let text = read_file(&spec)?;
            match parse_topic_spec(&text) {
                Ok(parsed) => {
                    for d in validate_topic_spec(&parsed) {
                        eprintln!("{}", d.render(&file));
                    }
                    println!("{file}: ok");
                    Ok(())
                }
                Err(e) => Err(domain(format!(
                    "{file}:{}:{}: error: {}",
                    e.line, e.col, e.msg
                ))),
            }
        }

        Cmd::Extract {
            input,
            spec,
            gazetteer,
            lexicon,
            out,
        } => {
            let spec = load_spec(&spec)?;
            let gaz = Gazetteer::parse(&read_file(&gazetteer)?)
                .map_err(|e| domain(format!("gazetteer: {e}")))?;
            let lex = TriggerLexicon::parse(&read_file(&lexicon)?)
                .map_err(|e| domain(format!("lexicon: {e}")))?;
            let gaz_diags = gaz.validate(&spec);
            let lex_diags = lex.validate(&spec);
            if has_errors(&gaz_diags) || has_errors(&lex_diags) {
                let first = gaz_diags
                    .iter()
                    .chain(lex_diags.iter())
                    .find(|d| d.severity == Severity::Error)
                    .expect("checked above");
                return Err(domain(first.message.clone()));
            }
            let docs =
                parse_documents(&read_input(input.as_ref())?).map_err(|e| domain(e.to_string()))?;
            let (messages, skipped) = extract_messages_logged(&docs, &spec, &gaz, &lex);
            for s in &skipped {
                eprintln!("skipped {}#s{}: {}", s.doc_id, s.sentence, s.reason);
            }
            write_output(out.as_ref(), &render_stream(&messages))
        }

        Cmd::Grid {
            input,
            spec,
            window,
            distance,
            mode,
            out,
        } => {
            let mut spec = load_spec(&spec)?;
            if let Some(w) = window {
                spec.config.sync_window_minutes = w;
            }
            if let Some(d) = distance {
                spec.config.diachronic_policy = parse_distance(&d)?;
            }
            if let Some(m) = mode {
                spec.config.planner_mode = m.into();
            }
            let msgs = parse_message_stream(&read_input(input.as_ref())?, &spec)
                .map_err(|e| domain(e.to_string()))?;
            let grid = build_grid(&msgs, &spec).map_err(|e| domain(e.to_string()))?;
            write_output(out.as_ref(), &serialize_grid(&grid))
        }

        Cmd::Relations { input, out } => {
            let grid = load_grid(input.as_ref())?;
            let mut doc =
                serde_json::to_string_pretty(grid.relations()).expect("relations serialize");
            doc.push('\n');
            write_output(out.as_ref(), &doc)
        }

        Cmd::Query {
            input,
            entities,
            msg_types,
            sources,
            from,
            to,
            out,
        } => {
            let grid = load_grid(input.as_ref())?;
            let mut q = GridQuery::universal();
            q.entities.extend(entities);
            q.msg_types.extend(msg_types);
            q.sources.extend(sources);
            match (from, to) {
                (None, None) => {}
                (from, to) => {
                    let lo = match from {
                        Some(s) => Timestamp::parse(&s).map_err(|e| usage(e.to_string()))?,
                        None => Timestamp::from_minutes(i64::MIN / 2),
                    };
                    let hi = match to {
                        Some(s) => Timestamp::parse(&s).map_err(|e| usage(e.to_string()))?,
                        None => Timestamp::from_minutes(i64::MAX / 2),
                    };
                    q.ref_interval = Some((lo, hi));
                }
            }
            let sub = query_subgrid(&grid, &q);
            write_output(out.as_ref(), &serialize_grid(&sub))
        }

        Cmd::Plan { input, mode, out } => {
            let grid = load_grid(input.as_ref())?;
            let mode = mode
                .map(PlannerMode::from)
                .unwrap_or(grid.topic.planner_mode);
            let plan = build_document_plan(&grid, mode);
            write_output(out.as_ref(), &serialize_plan(&plan))
        }

        Cmd::Realize {
            input,
            templates,
            out,
        } => {
            let pack =
                TemplatePack::parse(&read_file(&templates)?).map_err(|e| domain(e.to_string()))?;
            let plan = deserialize_plan(&read_input(input.as_ref())?).map_err(domain)?;
            let text = realize(&plan, &pack).map_err(|e| domain(e.to_string()))?;
            write_output(out.as_ref(), &text)
        }

        Cmd::Analyze {
            streams,
            unit,
            tolerance,
            out,
        } => {
            let (timeline, streams) = parse_streams(&read_input(streams.as_ref())?)?;
            let timeline = match timeline {
                Some(t) => t,
                None => {
                    // fall back to the union of distinct publication times
                    let mut times: Vec<Timestamp> = streams
                        .iter()
                        .flat_map(|s| s.times().iter().copied())
                        .collect();
                    times.sort();
                    times.dedup();
                    ActivityTimeline::new(times).map_err(|e| domain(e.to_string()))?
                }
            };
            let linearity =
                classify_linearity(&timeline, unit).map_err(|e| domain(e.to_string()))?;
            let synchronicity =
                classify_synchronicity(&streams, tolerance).map_err(|e| domain(e.to_string()))?;
            let verdict_line = format!(
                "{}, {}",
                if linearity.is_linear() {
                    "Linear"
                } else {
                    "NonLinear"
                },
                match synchronicity {
                    SyncVerdict::Synchronous => "Synchronous",
                    SyncVerdict::Asynchronous { .. } => "Asynchronous",
                }
            );
            #[derive(Serialize)]
            struct Detail {
                verdict: String,
                linearity: LinearityVerdict,
                synchronicity: SyncVerdict,
            }
            let detail = Detail {
                verdict: verdict_line.clone(),
                linearity,
                synchronicity,
            };
            let mut body = verdict_line;
            body.push('\n');
            body.push_str(&serde_json::to_string_pretty(&detail).expect("detail serializes"));
            body.push('\n');
            write_output(out.as_ref(), &body)
        }

        Cmd::Synth {
            regime,
            sources,
            min_reports,
            max_reports,
            unit,
            seed,
            start,
            out,
        } => {
            let regime: Regime = regime.parse().map_err(usage)?;
            let params = StreamParams {
                sources,
                min_reports,
                max_reports,
                time_unit_minutes: unit,
                start: Timestamp::parse(&start).map_err(|e| usage(e.to_string()))?,
            };
            let (timeline, streams) =
                generate_stream(regime, &params, seed).map_err(|e| domain(e.to_string()))?;
            let mut body = serde_json::to_string(&TimelineRecord {
                timeline: timeline.times().to_vec(),
            })
            .expect("timeline serializes");
            body.push('\n');
            for s in &streams {
                body.push_str(
                    &serde_json::to_string(&StreamRecord {
                        source: s.source.clone(),
                        pub_times: s.times().to_vec(),
                    })
                    .expect("stream serializes"),
                );
                body.push('\n');
            }
            write_output(out.as_ref(), &body)
        }

        Cmd::Eval {
            pred,
            gold,
            mode,
            out,
        } => {
            let pred = load_grid(Some(&pred))?;
            let gold = load_grid(Some(&gold))?;
            if pred.topic.name != gold.topic.name {
                return Err(domain(format!(
                    "topic mismatch: predicted grid is {:?}, gold grid is {:?}",
                    pred.topic.name, gold.topic.name
                )));
            }
            let mode = match mode {
                EvalModeArg::TypeOnly => MatchMode::TypeOnly,
                EvalModeArg::TypeAndArgs => MatchMode::TypeAndArgs,
            };
            let pred_msgs: Vec<MessageInstance> = pred.messages().cloned().collect();
            let gold_msgs: Vec<MessageInstance> = gold.messages().cloned().collect();
            let messages = score_messages(&pred_msgs, &gold_msgs, mode);
            let relations = score_relations(&pred, &gold);
            eprintln!("{}", messages.table("messages"));
            eprintln!("{}", relations.table("relations"));
            #[derive(Serialize)]
            struct Report {
                messages: evogrid::eval::ScoreReport,
                relations: evogrid::eval::ScoreReport,
            }
            let mut body = serde_json::to_string_pretty(&Report {
                messages,
                relations,
            })
            .expect("report serializes");
            body.push('\n');
            write_output(out.as_ref(), &body)
        }
    }
}

fn parse_distance(text: &str) -> Result<DiachronicPolicy, CmdError> {
    if text == "unbounded" {
        return Ok(DiachronicPolicy::Unbounded);
    }
    if let Some(k) = text.strip_prefix("exact:") {
        let k: u32 = k
            .parse()
            .map_err(|_| usage(format!("bad distance {text:?}")))?;
        if k == 0 {
            return Err(usage("exact distance must be at least 1"));
        }
        return Ok(DiachronicPolicy::ExactDistance(k));
    }
    Err(usage(format!(
        "bad distance {text:?}; expected unbounded or exact:<k>"
    )))
}

/// Render messages in the report-stream format, grouped back into one
/// document record per (doc_id, source, pub_time).
fn render_stream(messages: &[MessageInstance]) -> String {
    use std::collections::BTreeMap;

    #[derive(Serialize)]
    struct MsgOut<'a> {
        id: &'a str,
        #[serde(rename = "type")]
        msg_type: &'a str,
        bindings: &'a BTreeMap<String, evogrid::message::BoundValue>,
        #[serde(skip_serializing_if = "Option::is_none")]
        sentence: Option<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        temporal: Option<evogrid::message::TemporalExpression>,
    }
    #[derive(Serialize)]
    struct DocOut<'a> {
        doc_id: &'a str,
        source: &'a str,
        pub_time: Timestamp,
        messages: Vec<MsgOut<'a>>,
    }

    let mut docs: BTreeMap<(&str, &str, i64), Vec<&MessageInstance>> = BTreeMap::new();
    for m in messages {
        docs.entry((m.doc_id.as_str(), m.source.as_str(), m.pub_time.minutes()))
            .or_default()
            .push(m);
    }
    let mut out = String::new();
    for ((doc_id, source, _), msgs) in docs {
        let record = DocOut {
            doc_id,
            source,
            pub_time: msgs[0].pub_time,
            messages: msgs
                .iter()
                .map(|m| MsgOut {
                    id: &m.id,
                    msg_type: &m.msg_type,
                    bindings: &m.bindings,
                    sentence: m.sentence,
                    temporal: (m.ref_time != m.pub_time).then(|| {
                        evogrid::message::TemporalExpression::MinuteOffset {
                            minutes: m.ref_time.minutes() - m.pub_time.minutes(),
                        }
                    }),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}
