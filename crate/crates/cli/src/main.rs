use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chamberflow_cli::{parse_config, run, Command, Failure, THREADS_ENV};
use clap::Parser;

/// Cross sections, boundary maps and transfer operators for Schottky
/// surfaces and their products.
///
/// Exit codes: 0 success, 1 validation failure, 2 numerical failure, 3 usage error.
#[derive(Debug, Parser)]
#[command(name = "chamberflow", version)]
struct Cli {
    /// JSON group configuration; `-` reads standard input.
    #[arg(long, global = true, default_value = "-")]
    config: String,
    /// Write data here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn read_config(path: &str) -> Result<String, Failure> {
    let mut text = String::new();
    let res = if path == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| Failure::Usage(format!("cannot read config {path}: {e}")))?;
    Ok(text)
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    let config = parse_config(&read_config(&cli.config)?).map_err(|e| Failure::Usage(e.to_string()))?;
    let output = run(&cli.command, &config)?;
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &output.data),
        None => std::io::stdout().lock().write_all(output.data.as_bytes()),
    };
    written.map_err(|e| Failure::Usage(format!("cannot write output: {e}")))?;
    Ok(output.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => {
            if code == 1 {
                eprintln!("validation failed");
            }
            ExitCode::from(code as u8)
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
