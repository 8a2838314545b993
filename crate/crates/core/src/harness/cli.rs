//! `henonlab` command line.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 computational
//! error.

use std::ffi::OsString;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::commands;
use crate::harness::config::ExperimentConfig;
use crate::harness::output::Written;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "henonlab", version, about = "Random dynamics of complex Hénon maps")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Experiment config, or `-` for stdin.
    #[arg(long)]
    config: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Escape verdicts and Green values on a 2-plane slice (PGM + CSV).
    RenderJulia(RunArgs),
    /// Forward or backward Green function at listed points.
    Green(RunArgs),
    /// Top Lyapunov exponent over a grid.
    Lyapunov(RunArgs),
    /// Attracting minimal sets.
    Minsets(RunArgs),
    /// Basin probabilities T_L over a grid.
    Tl(RunArgs),
    /// Convergence rate of the transition operator.
    Mop(RunArgs),
    /// Weight derivative of T_L, Neumann series against finite differences.
    Dtl(RunArgs),
    /// Noise-family sweep and bifurcation intervals.
    Bifurcate(RunArgs),
    /// Escape census over (point, sequence) pairs.
    EscapeStats(RunArgs),
    /// Built-in structural checks.
    Selftest,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let text = if args.config == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Error::config("/", format!("cannot read stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(&args.config).map_err(|e| Error::config("/", format!("cannot read {}: {e}", args.config)))?
    };
    let mut cfg = ExperimentConfig::from_json_str(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

type Runner = fn(&ExperimentConfig, &Path) -> Result<Written>;

fn runner(cmd: &Command) -> Option<(Runner, &RunArgs)> {
    Some(match cmd {
        Command::RenderJulia(a) => (commands::render_julia as Runner, a),
        Command::Green(a) => (commands::green, a),
        Command::Lyapunov(a) => (commands::lyapunov, a),
        Command::Minsets(a) => (commands::minsets, a),
        Command::Tl(a) => (commands::tl, a),
        Command::Mop(a) => (commands::mop, a),
        Command::Dtl(a) => (commands::dtl, a),
        Command::Bifurcate(a) => (commands::bifurcate, a),
        Command::EscapeStats(a) => (commands::escape_census, a),
        Command::Selftest => return None,
    })
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_COMPUTE
    }
}

fn dispatch(cli: Cli) -> i32 {
    let Some((run, args)) = runner(&cli.command) else {
        let results = commands::selftest();
        let mut ok = true;
        for (name, pass) in &results {
            println!("{} {name}", if *pass { "PASS" } else { "FAIL" });
            ok &= pass;
        }
        return if ok { EXIT_OK } else { EXIT_COMPUTE };
    };
    let cfg = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match run(&cfg, &args.out) {
        Ok(written) => {
            for p in &written.0 {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `argv`, runs the subcommand on a pool of `--threads` workers and
/// returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_CONFIG;
        }
        pool = pool.num_threads(n);
    }
    match pool.build() {
        Ok(pool) => pool.install(|| dispatch(cli)),
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            EXIT_COMPUTE
        }
    }
}
