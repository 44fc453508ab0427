use clap::{Parser, Subcommand, ValueEnum};
use iwasawa::cli::{emit_report, parse_config, run_tasks, Format};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "iwasawa", version, about = "Exact experiments in truncated Iwasawa algebras")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the tasks of a JSON config and emit a report.
    Run {
        config: PathBuf,
        /// Only run tasks with this name (repeatable).
        #[arg(long = "task")]
        tasks: Vec<String>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: OutFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Jsonl,
    Table,
}

fn main() -> ExitCode {
    let Cmd::Run { config, tasks, jobs, seed, out, format } = Cli::parse().cmd;
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = match run_tasks(&cfg, &tasks) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let fmt = match format {
        OutFormat::Jsonl => Format::Jsonl,
        OutFormat::Table => Format::Table,
    };
    let text = emit_report(&report, fmt);
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    if report.any_failed() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
