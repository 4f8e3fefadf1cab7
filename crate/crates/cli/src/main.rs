//! `tracelink`: discovery, augmentation, enactment and trace analysis over a
//! model-driven workspace.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "tracelink",
    version,
    about = "Traced model transformation chains and their analysis"
)]
struct Cli {
    /// Workspace root directory.
    #[arg(short = 'C', long, global = true, env = "TRACELINK_WORKSPACE", default_value = ".")]
    workspace: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone, Copy)]
struct FormatArg {
    /// Output format of the report.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan a workspace and write its megamodel.json.
    Discover {
        /// Workspace to scan; defaults to the selected workspace.
        dir: Option<PathBuf>,
    },
    /// Inspect the megamodel.
    Mgm {
        #[command(subcommand)]
        action: MgmCommand,
    },
    /// Write the trace-augmented form of an M2M transformation.
    AugmentM2m {
        file: PathBuf,
        /// Output path; defaults to `<stem>.aug.m2m` beside the input.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write the trace-augmented form of an M2C template.
    AugmentM2c {
        file: PathBuf,
        /// Output path; defaults to `<stem>.aug.m2c` beside the input.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run an M2M transformation outside any process.
    RunM2m {
        file: PathBuf,
        /// Input model bound to a source alias, as `alias=model`.
        #[arg(long = "in", value_name = "ALIAS=MODEL", required = true)]
        inputs: Vec<String>,
        /// Path of the output model.
        #[arg(long)]
        out: PathBuf,
        /// Run the transformation as written, without collecting a trace.
        #[arg(long)]
        no_augment: bool,
    },
    /// Run an M2C template outside any process.
    RunM2c {
        file: PathBuf,
        /// Model the template runs over.
        #[arg(long = "in", value_name = "MODEL")]
        input: PathBuf,
        /// Directory of the generated file.
        #[arg(long)]
        out: PathBuf,
        /// Render the template as written, without collecting a trace.
        #[arg(long)]
        no_augment: bool,
    },
    /// Enact a process model over the workspace.
    Enact {
        process: PathBuf,
        /// Model bound to an externally fed input pin, as `pin=model` or
        /// `Action.pin=model`.
        #[arg(long = "bind", value_name = "PIN=MODEL")]
        bindings: Vec<String>,
        /// Run the transformations as written, without collecting traces.
        #[arg(long)]
        no_augment: bool,
        /// Run the actions of a stage on separate threads.
        #[arg(long)]
        parallel: bool,
    },
    /// Everything derived from a model element.
    Impact {
        model: String,
        path: String,
        #[command(flatten)]
        format: FormatArg,
    },
    /// The model elements a location of a generated file was derived from.
    Origin {
        file: String,
        /// `line:col`, 1-based, or `@byte`, 0-based.
        location: String,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Export the global trace map.
    Gtm {
        #[command(subcommand)]
        action: GtmCommand,
    },
    /// Inspect trace models.
    Trace {
        #[command(subcommand)]
        action: TraceCommand,
    },
}

#[derive(Subcommand, Debug)]
enum MgmCommand {
    /// Print the registered resources.
    Show {
        #[command(flatten)]
        format: FormatArg,
    },
    /// Print the megamodel as a Graphviz graph.
    Dot,
}

#[derive(Subcommand, Debug)]
enum GtmCommand {
    /// Print the global trace map as a Graphviz graph.
    Dot {
        /// Restrict the graph to the neighbourhood of a node, given as
        /// `model:path` or `file:line:col`.
        #[arg(long)]
        around: Option<String>,
        /// Number of edges kept around the anchor.
        #[arg(long, default_value_t = 1, requires = "around")]
        radius: usize,
    },
}

#[derive(Subcommand, Debug)]
enum TraceCommand {
    /// Print the links of a trace model.
    Show {
        file: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// A reader closing stdout early, as `head` does, is not an error.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<std::io::Error>()
        .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}
