use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};
use halfrange_cli::{run, Invocation, Mode};

/// Solves half-range boundary value problems described by a TOML config.
#[derive(Parser)]
#[command(version, group(ArgGroup::new("mode").args(["solve", "check", "compare"])))]
struct Args {
    /// Solve and write the solution CSV (default).
    #[arg(long)]
    solve: bool,
    /// Run admissibility checks, the decomposition and the contractions only.
    #[arg(long)]
    check: bool,
    /// Solve and compare against the space-time finite-difference oracle.
    #[arg(long)]
    compare: bool,
    /// Treat admissibility failures as fatal.
    #[arg(long)]
    strict: bool,
    /// Eigendecomposition cache directory; overrides [cache] dir.
    #[arg(long, value_name = "PATH")]
    cache_dir: Option<PathBuf>,
    /// Run configuration.
    config: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mode = if args.check {
        Mode::Check
    } else if args.compare {
        Mode::Compare
    } else {
        Mode::Solve
    };
    let code = run(&Invocation {
        config: args.config,
        mode,
        strict: args.strict,
        cache_dir: args.cache_dir,
    });
    ExitCode::from(code as u8)
}
