use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use feddg_core::diagnostics::{tv_analytic, TvQuery};

use crate::analyze::{
    collect_runs, gap_table, group_runs, heterogeneity_table, ood_table, GAP_TABLE_FILE, HETEROGENEITY_TABLE_FILE,
    OOD_TABLE_FILE,
};
use crate::config::{read_json, ExperimentConfig};
use crate::error::CliError;
use crate::experiment::{read_results, run_experiment, write_outputs};
use crate::sweep::{run_sweep, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "feddg", version, about = "Federated domain-generalization simulator")]
struct Cli {
    /// Worker threads for client training (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every point of a sweep config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `base.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Derived tables from run or sweep directories, and TV distance queries.
    Analyze {
        /// Run or sweep directory.
        dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Table::Ood)]
        table: Table,
        /// Centralized run to compare `dir` against.
        #[arg(long, value_name = "CENTRALIZED_DIR")]
        gap: Option<PathBuf>,
        #[arg(long, num_args = 2, value_names = ["T1", "T2"], allow_negative_numbers = true)]
        tv_dirac: Option<Vec<f64>>,
        #[arg(long, num_args = 3, value_names = ["T1", "T2", "ALPHA"], allow_negative_numbers = true)]
        tv_uniform: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Table {
    Ood,
    Heterogeneity,
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn cmd_run(config: &Path, out: Option<PathBuf>, seed: Option<u64>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: ExperimentConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let result = run_experiment(&cfg)?;
    write_outputs(&cfg.output_dir, &cfg, &result)?;
    let s = &result.final_summary;
    let _ = writeln!(
        stdout,
        "{} {}: id {:.4} ood {:.4} grad_sq_norm {:.4} -> {}",
        result.strategy,
        result.augmentation,
        s.id_accuracy,
        s.ood_accuracy,
        s.grad_sq_norm_mean,
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>, seed: Option<u64>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut sweep: SweepConfig = read_json(config)?;
    if let Some(seed) = seed {
        sweep.base.seed = seed;
    }
    let out = out.unwrap_or_else(|| sweep.base.output_dir.clone());
    let outcome = run_sweep(&sweep, &out)?;
    let total = outcome.results.len();
    let failed = outcome.failures();
    let _ = writeln!(
        stdout,
        "{} of {total} points succeeded -> {}",
        total - failed,
        out.display()
    );
    if failed > 0 {
        return Err(CliError::PartialSweep { failed, total });
    }
    Ok(())
}

fn cmd_analyze(
    dir: Option<PathBuf>,
    table: Table,
    gap: Option<PathBuf>,
    tv_dirac: Option<Vec<f64>>,
    tv_uniform: Option<Vec<f64>>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let queries = tv_dirac
        .map(|v| TvQuery::DiracPair { t1: v[0], t2: v[1] })
        .into_iter()
        .chain(tv_uniform.map(|v| TvQuery::UniformPair {
            t1: v[0],
            t2: v[1],
            alpha: v[2],
        }));
    let mut answered = false;
    for q in queries {
        let value = tv_analytic(&q).map_err(|e| CliError::Config(e.to_string()))?;
        let _ = writeln!(stdout, "{value}");
        answered = true;
    }
    let Some(dir) = dir else {
        return if answered {
            Ok(())
        } else {
            Err(CliError::Config(
                "analyze needs a results directory or a --tv-* query".into(),
            ))
        };
    };
    if let Some(central) = gap {
        let (_, text) = gap_table(&read_results(&dir)?, &read_results(&central)?)?;
        write_text(&dir.join(GAP_TABLE_FILE), &text)?;
        let _ = write!(stdout, "{text}");
        return Ok(());
    }
    let rows = group_runs(&collect_runs(&dir)?)?;
    let ood = ood_table(&rows)?;
    let het = heterogeneity_table(&rows)?;
    write_text(&dir.join(OOD_TABLE_FILE), &ood)?;
    write_text(&dir.join(HETEROGENEITY_TABLE_FILE), &het)?;
    let _ = write!(
        stdout,
        "{}",
        match table {
            Table::Ood => ood,
            Table::Heterogeneity => het,
        }
    );
    Ok(())
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Run { config, out, seed } => cmd_run(&config, out, seed, stdout),
        Command::Sweep { config, out, seed } => cmd_sweep(&config, out, seed, stdout),
        Command::Analyze {
            dir,
            table,
            gap,
            tv_dirac,
            tv_uniform,
        } => cmd_analyze(dir, table, gap, tv_dirac, tv_uniform, stdout),
    }
}

/// Parses `args` and runs the command; returns the process exit code
/// (0 success, 2 config error, 3 runtime error, 4 partial sweep failure).
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let mut out = Vec::new();
    let outcome = match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, &mut out)),
            Err(e) => Err(CliError::Config(format!("--threads: {e}"))),
        },
        None => dispatch(cli.command, &mut out),
    };
    let _ = stdout.write_all(&out);
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "feddg: {e}");
            e.exit_code()
        }
    }
}
