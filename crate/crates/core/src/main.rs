use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pim_core::harness::{run_case, sweep, write_csv, Coupling, ResultRow, RunConfig, TRule, WeightSource};
use pim_core::kernel::Profile;
use pim_core::manifolds::{Case, SampleMode};

/// Point integral method solver for the Neumann Poisson problem on sampled
/// manifolds, with convergence sweeps.
#[derive(Parser)]
#[command(name = "pim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case at one resolution and write a single CSV row.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        /// Bandwidth: a number, `empirical`, `theory` or `c,alpha`.
        #[arg(long, default_value = "empirical")]
        t: String,
    },
    /// Run a convergence sweep over several resolutions and fit rates.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated point counts.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        n: Vec<usize>,
        /// `empirical`, `theory` or `c,alpha` for t = c·h^alpha.
        #[arg(long, default_value = "empirical", conflicts_with = "t")]
        coupling: String,
        /// Explicit comma-separated bandwidths, one per n (or one for all).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        t: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct Common {
    /// interval | circle | sphere | disk
    #[arg(long)]
    case: Case,
    /// wendland_c2 | truncated_gaussian
    #[arg(long, default_value = "wendland_c2")]
    kernel: Profile,
    /// exact | uniform | voronoi
    #[arg(long, default_value = "exact")]
    weights: WeightSource,
    /// grid | random
    #[arg(long, default_value = "grid")]
    mode: SampleMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Defaults to 10·n.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Evaluation grid size for error norms; defaults to 16·n.
    #[arg(long)]
    n_eval: Option<usize>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self, ns: Vec<usize>, t_rule: TRule) -> RunConfig {
        RunConfig {
            case: self.case,
            ns,
            t_rule,
            profile: self.kernel,
            mode: self.mode,
            seed: self.seed,
            tol: self.tol,
            max_iter: self.max_iter,
            weights: self.weights,
            n_eval: self.n_eval,
        }
    }
}

fn parse_t(arg: &str) -> Result<TRule> {
    if let Ok(t) = arg.parse::<f64>() {
        return Ok(TRule::Explicit(vec![t]));
    }
    Ok(TRule::Coupled(arg.parse::<Coupling>()?))
}

fn emit(rows: &[ResultRow], out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            write_csv(rows, &mut w)?;
            w.flush()?;
        }
        None => write_csv(rows, io::stdout().lock())?,
    }
    Ok(())
}

fn summarize(rows: &[ResultRow]) {
    for r in rows {
        eprintln!(
            "{} n={} kernel={} h={:.4e} t={:.4e} L2={:.4e} H1={:.4e} iters={} converged={}{}",
            r.case,
            r.n,
            r.profile,
            r.h,
            r.t,
            r.l2,
            r.h1,
            r.iterations,
            r.converged,
            r.h_mc.map(|m| format!(" h_mc={m:.4e}")).unwrap_or_default()
        );
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { common, n, t } => {
            let config = common.config(vec![n], parse_t(&t)?);
            let row = run_case(&config, 0)?;
            summarize(std::slice::from_ref(&row));
            emit(std::slice::from_ref(&row), common.out.as_ref())?;
        }
        Command::Sweep { common, n, coupling, t } => {
            if n.len() < 3 {
                bail!("a sweep needs at least three n values, got {}", n.len());
            }
            let rule = match t {
                Some(ts) => TRule::Explicit(ts),
                None => TRule::Coupled(coupling.parse()?),
            };
            let result = sweep(&common.config(n, rule))?;
            summarize(&result.rows);
            let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            eprintln!(
                "fitted slopes vs h: Linf={} L2={} H1={}",
                fmt(result.slopes.linf),
                fmt(result.slopes.l2),
                fmt(result.slopes.h1)
            );
            emit(&result.rows, common.out.as_ref())?;
        }
    }
    Ok(())
}
