use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use chated_api::{build_state, AppState, HttpChatTarget, ServerConfig};
use chated_core::chat::{render_sources, SessionId};
use chated_core::eval::{compare_report, load_scores, run_context_script, ChatTarget, ContextScript};
use chated_core::ingest::{acquire_file, acquire_url, AcquireOptions, DocId};
use chated_core::store::{CourseId, Store};

use crate::{Cli, Command, CourseCommand, EvalCommand, GlobalArgs, OutputFormat, ProviderChoice};

/// Resolves settings as flag, then `CHATED_*` variable, then default.
fn config(global: &GlobalArgs, extra: &[(&str, Option<String>)]) -> Result<ServerConfig> {
    let mut flags: HashMap<&str, String> = HashMap::new();
    let mut set = |k, v: Option<String>| {
        if let Some(v) = v {
            flags.insert(k, v);
        }
    };
    set("CHATED_DATA_DIR", global.data_dir.as_ref().map(|p| p.display().to_string()));
    set(
        "CHATED_PROVIDER",
        global.provider.map(|p| match p {
            ProviderChoice::Mock => "mock".to_string(),
            ProviderChoice::Remote => "remote".to_string(),
        }),
    );
    set("CHATED_PROVIDER_ENDPOINT", global.provider_endpoint.clone());
    set("CHATED_PROVIDER_KEY_ENV", global.provider_key_env.clone());
    set("CHATED_EMBED_ENDPOINT", global.embed_endpoint.clone());
    for (k, v) in extra {
        set(k, v.clone());
    }
    Ok(ServerConfig::from_lookup(|k| {
        flags.get(k).cloned().or_else(|| std::env::var(k).ok())
    })?)
}

fn open(global: &GlobalArgs) -> Result<AppState> {
    let cfg = config(global, &[])?;
    Ok(build_state(&cfg)?)
}

/// Accepts a course id or an exact, unambiguous course name.
fn resolve_course(store: &Store, selector: &str) -> Result<CourseId> {
    let id = CourseId::new(selector);
    if id.is_path_safe() && store.config(&id).is_ok() {
        return Ok(id);
    }
    let named: Vec<CourseId> = store
        .list_courses()
        .into_iter()
        .filter(|c| c.name == selector)
        .map(|c| c.course_id)
        .collect();
    match named.len() {
        1 => Ok(named.into_iter().next().expect("one match")),
        0 => bail!("unknown course {selector}"),
        n => bail!("{n} courses are named {selector:?}; pass the course id instead"),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn is_json_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let format = cli.global.output();
    match cli.command {
        Command::Course(CourseCommand::Create { name }) => {
            let state = open(&cli.global)?;
            let store = state.engine.store();
            let id = store.create_course(&name)?;
            match format {
                OutputFormat::Json => {
                    let summary = store.list_courses().into_iter().find(|c| c.course_id == id);
                    print_json(&summary)?;
                }
                OutputFormat::Text => println!("{id}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Course(CourseCommand::List) => {
            let state = open(&cli.global)?;
            let courses = state.engine.store().list_courses();
            match format {
                OutputFormat::Json => print_json(&courses)?,
                OutputFormat::Text => {
                    for c in courses {
                        println!("{}\t{}\t{} documents\t{} chunks", c.course_id, c.name, c.document_count, c.chunk_count);
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest { course, files, urls } => ingest(&cli.global, format, &course, files, urls),
        Command::Ask {
            course,
            question,
            session,
        } => ask(&cli.global, format, &course, &question, session),
        Command::Serve { port, bind } => {
            let cfg = config(
                &cli.global,
                &[("CHATED_PORT", port.map(|p| p.to_string())), ("CHATED_BIND", bind)],
            )?;
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(chated_api::serve(cfg))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval(EvalCommand::Context {
            course,
            script,
            out,
            api,
        }) => eval_context(&cli.global, format, &course, &script, out, api),
        Command::Eval(EvalCommand::Rubric { scores, baseline, out }) => {
            let primary = load_scores(&scores).with_context(|| format!("reading {}", scores.display()))?;
            let base = match &baseline {
                Some(p) => Some(load_scores(p).with_context(|| format!("reading {}", p.display()))?),
                None => None,
            };
            let report = compare_report(&primary, base.as_deref())?;
            let text = if is_json_path(&out) {
                report.render_json()
            } else {
                report.render_markdown()
            };
            write_or_print(Some(&out), &text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

enum Source {
    File(PathBuf),
    Url(String),
}

#[derive(Serialize)]
struct IngestOutcome {
    source: String,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    doc_id: Option<DocId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chunk_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    page_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn ingest(global: &GlobalArgs, format: OutputFormat, course: &str, files: Vec<PathBuf>, urls: Vec<String>) -> Result<ExitCode> {
    if files.is_empty() && urls.is_empty() {
        eprintln!("error: give at least one file or --url");
        return Ok(ExitCode::from(2));
    }
    let state = open(global)?;
    let store = state.engine.store();
    let id = resolve_course(store, course)?;
    let opts = AcquireOptions::default();

    let sources = files
        .into_iter()
        .map(Source::File)
        .chain(urls.into_iter().map(Source::Url));

    let mut outcomes = Vec::new();
    for src in sources {
        let (source, acquired) = match src {
            Source::File(f) => (f.display().to_string(), acquire_file(&f, &opts)),
            Source::Url(u) => {
                let r = acquire_url(&u, &opts);
                (u, r)
            }
        };
        let result = acquired
            .map_err(anyhow::Error::from)
            .and_then(|raw| store.ingest(&id, &raw).map_err(anyhow::Error::from));
        let outcome = match result {
            Ok(meta) => IngestOutcome {
                source,
                ok: true,
                doc_id: Some(meta.doc_id),
                chunk_count: Some(meta.chunk_count),
                page_count: Some(meta.page_count),
                error: None,
            },
            Err(e) => IngestOutcome {
                source,
                ok: false,
                doc_id: None,
                chunk_count: None,
                page_count: None,
                error: Some(format!("{e:#}")),
            },
        };
        if format == OutputFormat::Text {
            match (&outcome.doc_id, &outcome.error) {
                (Some(doc), _) => println!(
                    "ok\t{}\tdoc_id={doc}\tchunks={}",
                    outcome.source,
                    outcome.chunk_count.unwrap_or(0)
                ),
                (None, Some(err)) => println!("failed\t{}\t{err}", outcome.source),
                (None, None) => {}
            }
        }
        outcomes.push(outcome);
    }
    if format == OutputFormat::Json {
        print_json(&outcomes)?;
    }
    Ok(if outcomes.iter().all(|o| o.ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn ask(global: &GlobalArgs, format: OutputFormat, course: &str, question: &str, session: Option<String>) -> Result<ExitCode> {
    let state = open(global)?;
    let engine = &state.engine;
    let store = engine.store();
    let id = resolve_course(store, course)?;
    let sid = match session {
        Some(s) => {
            let sid = SessionId::new(s);
            let owner = store.session_course(&sid)?;
            if owner != id {
                bail!("session {sid} belongs to course {owner}, not {id}");
            }
            sid
        }
        None => engine.start_session(&id)?,
    };
    let message = engine.answer(&sid, question)?;
    eprintln!("session: {sid}");
    match format {
        OutputFormat::Json => print_json(&message)?,
        OutputFormat::Text => {
            println!("{}", message.text);
            if !message.citations.is_empty() {
                println!("\n{}", render_sources(&message.citations));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn eval_context(
    global: &GlobalArgs,
    format: OutputFormat,
    course: &str,
    script_path: &Path,
    out: Option<PathBuf>,
    api: Option<String>,
) -> Result<ExitCode> {
    let mut script = ContextScript::load(script_path)?;
    let report = match api {
        Some(base) => {
            script.course_id = CourseId::new(course);
            let target = HttpChatTarget::new(base);
            run_context_script(&script, &target as &dyn ChatTarget)?
        }
        None => {
            let state = open(global)?;
            script.course_id = resolve_course(state.engine.store(), course)?;
            run_context_script(&script, state.engine.as_ref())?
        }
    };
    let json = match &out {
        Some(p) => is_json_path(p),
        None => format == OutputFormat::Json,
    };
    let text = if json {
        report.render_json()
    } else {
        report.render_markdown()
    };
    write_or_print(out.as_deref(), &text)?;

    let expected = script.repetitions as usize * script.steps.len();
    let failures: Vec<&str> = report
        .repetitions
        .iter()
        .filter_map(|r| r.error.as_deref())
        .collect();
    for f in &failures {
        eprintln!("error: {f}");
    }
    Ok(if failures.is_empty() && report.total_turns() == expected {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
