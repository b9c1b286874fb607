mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Course-scoped question answering over uploaded course materials.
#[derive(Debug, Parser)]
#[command(name = "chated", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags override `CHATED_*` environment variables, which override defaults.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Store root [env: CHATED_DATA_DIR] [default: ./chated-data]
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Language model provider [env: CHATED_PROVIDER] [default: mock]
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderChoice>,
    /// Chat-completion endpoint for the remote provider [env: CHATED_PROVIDER_ENDPOINT]
    #[arg(long, global = true)]
    pub provider_endpoint: Option<String>,
    /// Name of the environment variable holding the provider key [env: CHATED_PROVIDER_KEY_ENV]
    #[arg(long, global = true)]
    pub provider_key_env: Option<String>,
    /// Embedding service endpoint; the built-in embedder is used when unset [env: CHATED_EMBED_ENDPOINT]
    #[arg(long, global = true)]
    pub embed_endpoint: Option<String>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Shorthand for --format json
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderChoice {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create or list courses
    #[command(subcommand)]
    Course(CourseCommand),
    /// Add files or URLs to a course
    Ingest {
        /// Course id or exact course name
        #[arg(long)]
        course: String,
        /// Files to ingest
        files: Vec<PathBuf>,
        /// URLs to fetch and ingest; repeatable
        #[arg(long = "url")]
        urls: Vec<String>,
    },
    /// Ask one question; the session id is printed on stderr
    Ask {
        #[arg(long)]
        course: String,
        question: String,
        /// Continue an existing session
        #[arg(long)]
        session: Option<String>,
    },
    /// Run the HTTP service
    Serve {
        /// [env: CHATED_PORT] [default: 8095]
        #[arg(long)]
        port: Option<u16>,
        /// [env: CHATED_BIND] [default: 127.0.0.1]
        #[arg(long)]
        bind: Option<String>,
    },
    /// Evaluation protocols
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Subcommand)]
pub enum CourseCommand {
    Create { name: String },
    List,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Run a scripted multi-turn conversation and report context signals
    Context {
        #[arg(long)]
        course: String,
        #[arg(long)]
        script: PathBuf,
        /// Write the report here instead of stdout; `.json` selects JSON
        #[arg(long)]
        out: Option<PathBuf>,
        /// Talk to a running server instead of the local store
        #[arg(long)]
        api: Option<String>,
    },
    /// Aggregate rubric scores into criterion means
    Rubric {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// `.json` selects JSON, anything else Markdown
        #[arg(long)]
        out: PathBuf,
    },
}

impl GlobalArgs {
    pub fn output(&self) -> OutputFormat {
        if self.json {
            OutputFormat::Json
        } else {
            self.format
        }
    }
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
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
