//! `wlrbg`: synthesize data, decompose frame sequences, evaluate and compare.

mod commands;
mod methods;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use wlrbg::{Error, Method};

#[derive(Parser)]
#[command(name = "wlrbg", version, about = "Weighted low-rank background/foreground decomposition")]
struct Cli {
    /// Worker threads for the parallel stages.
    #[arg(long, global = true, env = "WLRBG_THREADS")]
    threads: Option<usize>,

    /// Print every default parameter as JSON and exit.
    #[arg(long)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

fn method_arg(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic sequence, its masks and a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "param", value_name = "KEY=VALUE", value_parser = params::parse_kv)]
        params: Vec<(String, String)>,
    },
    /// Split a dataset into background and foreground.
    Decompose {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = method_arg)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "param", value_name = "KEY=VALUE", value_parser = params::parse_kv)]
        params: Vec<(String, String)>,
    },
    /// Score a decomposition against the dataset masks.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory of `decompose`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several methods on one dataset and tabulate time and quality.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "method", value_parser = method_arg)]
        methods: Vec<Method>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_SOLVER: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_config_error() {
                EXIT_CONFIG
            } else if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_SOLVER
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_SOLVER
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if cli.print_defaults {
        println!("{}", serde_json::to_string_pretty(&methods::defaults_json())?);
        return Ok(());
    }
    match cli.command {
        None => {
            Cli::command().print_help()?;
            Err(Error::Config("no subcommand given".into()).into())
        }
        Some(Command::Synth { out, seed, params }) => commands::synth(&out, seed, &params),
        Some(Command::Decompose {
            manifest,
            method,
            out,
            seed,
            params,
        }) => commands::decompose(&manifest, method, &out, seed, &params),
        Some(Command::Evaluate { manifest, run, out }) => commands::evaluate_run(&manifest, &run, &out),
        Some(Command::Compare {
            manifest,
            methods,
            out,
            seed,
        }) => commands::compare(&manifest, &methods, &out, seed),
    }
}

/// Error chain on one line, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    let mut last = out.clone();
    for cause in err.chain().skip(1) {
        let s = cause.to_string();
        if !last.contains(&s) {
            out.push_str(": ");
            out.push_str(&s);
        }
        last = s;
    }
    out
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
