use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use unbiased_mc::harness::{
    convergence_trace, run_sweep, sweep_csv, trace_csv, write_path_diagnostics, ExperimentConfig, THREADS_ENV,
};
use unbiased_mc::Error;

#[derive(Parser)]
#[command(name = "unbiased-mc", version, about = "Unbiased Monte Carlo experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Sweep CSV destination; overrides `output` in the config. `-` is stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to $UNBIASED_MC_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_ENGINE: u8 = 3;

fn write_file(path: &PathBuf, text: &str) -> Result<(), Error> {
    if path.as_os_str() == "-" {
        std::io::stdout().write_all(text.as_bytes())?;
        return Ok(());
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config {
                key: Some(THREADS_ENV.into()),
                message: format!("expected a thread count, got `{v}`"),
            }),
        Err(_) => Ok(None),
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, threads: Option<usize>) -> Result<bool, Error> {
    let cfg = ExperimentConfig::from_file(&config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config {
        key: Some("threads".into()),
        message: e.to_string(),
    })?;
    pool.install(|| {
        let rows = run_sweep(&cfg);
        let ok = rows.iter().all(|r| r.outcome.is_ok());
        let dest = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("-"));
        write_file(&dest, &sweep_csv(&rows))?;
        if let Some(path) = &cfg.trace_output {
            write_file(path, &trace_csv(&convergence_trace(&cfg)?))?;
        }
        if let Some(path) = &cfg.diagnostics {
            let f = File::create(path).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            write_path_diagnostics(&cfg, &mut w)?;
            w.flush()?;
        }
        Ok(ok)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { config, out, threads } = cli.command;
    match run(config, out, threads) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_ENGINE),
        Err(e) => {
            eprintln!("unbiased-mc: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_ENGINE })
        }
    }
}
