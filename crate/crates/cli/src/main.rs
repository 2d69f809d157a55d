use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use otr_core::demos::{run_demo, ClockMode, DemoName};
use otr_core::export::{observe, print_tree, to_chrome};
use otr_core::Trace;

/// Inspect, export and serve typed execution traces.
#[derive(Debug, Parser)]
#[command(name = "otr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct TraceArgs {
    /// Binary trace file.
    trace: PathBuf,
    /// Schema sidecar; defaults to the trace path with `.trace` replaced by `.schema.json`.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the call tree with decoded arguments and results.
    Tree {
        #[command(flatten)]
        input: TraceArgs,
        /// Elide frames nested deeper than this many levels.
        #[arg(long)]
        max_depth: Option<usize>,
    },
    /// List every call of one function, in call order.
    Calls {
        #[command(flatten)]
        input: TraceArgs,
        /// Function name as registered in the schema.
        function: String,
        /// Print each distinct line once.
        #[arg(long)]
        unique: bool,
    },
    /// Write the trace in Chrome trace-event JSON.
    ExportChrome {
        #[command(flatten)]
        input: TraceArgs,
        /// Output file; standard output when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Use event indices as timestamps.
        #[arg(long)]
        logical_time: bool,
    },
    /// Serve the JSON API (and optionally static assets) for one trace.
    Serve {
        #[command(flatten)]
        input: TraceArgs,
        #[arg(long, default_value_t = otr_server::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory of static files served beside the API.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Run a bundled instrumented program and write its trace and schema.
    Demo {
        /// depth, ambiguity or exception.
        name: DemoName,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Stamp events with their index instead of elapsed microseconds.
        #[arg(long)]
        logical_time: bool,
    },
}

fn load(input: &TraceArgs) -> Result<Trace> {
    let trace = Trace::load(&input.trace, input.schema.as_deref())
        .with_context(|| format!("cannot load {}", input.trace.display()))?;
    if trace.truncation.is_truncated() {
        eprintln!(
            "warning: {} is truncated ({} open frames{})",
            input.trace.display(),
            trace.truncation.open_frames,
            if trace.truncation.partial_event {
                ", partial final event dropped"
            } else {
                ""
            }
        );
    }
    Ok(trace)
}

fn write_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tree { input, max_depth } => write_stdout(&print_tree(&load(&input)?, max_depth)),
        Command::Calls {
            input,
            function,
            unique,
        } => {
            let lines = observe(&load(&input)?, &function, unique)?;
            write_stdout(&lines.iter().map(|l| format!("{l}\n")).collect::<String>())
        }
        Command::ExportChrome {
            input,
            output,
            logical_time,
        } => {
            let json = to_chrome(&load(&input)?, logical_time).to_json_string();
            match output {
                Some(path) => {
                    fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))
                }
                None => write_stdout(&json),
            }
        }
        Command::Serve {
            input,
            port,
            host,
            assets,
        } => {
            let trace = load(&input)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(SocketAddr::new(host, port))
                    .await
                    .with_context(|| format!("cannot listen on {host}:{port}"))?;
                println!("listening on http://{}", listener.local_addr()?);
                otr_server::serve_on(listener, trace, assets).await?;
                Ok(())
            })
        }
        Command::Demo {
            name,
            out,
            logical_time,
        } => {
            let clock = if logical_time {
                ClockMode::Logical
            } else {
                ClockMode::Monotonic
            };
            let (trace, schema) = run_demo(name, clock)?.write_to(&out)?;
            println!("{}\n{}", display(&trace), display(&schema));
            Ok(())
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
