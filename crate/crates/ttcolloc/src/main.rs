use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use ttcolloc::experiment::{
    compare_report, run_experiment, write_compare_csv, write_csv, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "ttcolloc",
    about = "Space-time Chebyshev collocation for nonlinear convection-diffusion, \
             full-grid and tensor-train solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a key=value config file and/or flag overrides.
    Run(RunArgs),
    /// Join result CSVs on (experiment, N) and report speedups/error ratios.
    Compare { paths: Vec<PathBuf> },
}

#[derive(Args)]
struct RunArgs {
    /// Config file path (positional; `--config` also accepted).
    config_path: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// exp1 | manufactured | burgers
    #[arg(long)]
    experiment: Option<String>,
    /// Comma list of fullgrid | tt-fixed-eps | tt-step-trunc
    #[arg(long)]
    solver: Option<String>,
    /// Comma list of collocation point counts per dimension
    #[arg(long, short = 'N')]
    n: Option<String>,
    #[arg(long)]
    eps_tt: Option<f64>,
    #[arg(long)]
    eps_cross: Option<f64>,
    #[arg(long)]
    tol_res: Option<f64>,
    #[arg(long)]
    tol_update: Option<f64>,
    #[arg(long)]
    max_newton: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dispatch independent (N, solver) cells across threads
    #[arg(long)]
    parallel: bool,
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let path = args.config.as_ref().or(args.config_path.as_ref());
    let mut text = match path {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    // flag overrides reuse the key=value machinery
    let mut push = |key: &str, value: String| {
        text.push_str(&format!("\n{key} = {value}"));
    };
    if let Some(v) = &args.experiment {
        push("experiment", v.clone());
    }
    if let Some(v) = &args.solver {
        push("solver", v.clone());
    }
    if let Some(v) = &args.n {
        push("N", v.clone());
    }
    if let Some(v) = args.eps_tt {
        push("eps_tt", v.to_string());
    }
    if let Some(v) = args.eps_cross {
        push("eps_cross", v.to_string());
    }
    if let Some(v) = args.tol_res {
        push("tol_res", v.to_string());
    }
    if let Some(v) = args.tol_update {
        push("tol_update", v.to_string());
    }
    if let Some(v) = args.max_newton {
        push("max_newton", v.to_string());
    }
    if let Some(v) = args.seed {
        push("seed", v.to_string());
    }
    if let Some(v) = &args.out {
        push("out", v.display().to_string());
    }
    let mut cfg = RunConfig::parse(&text).context("invalid configuration")?;
    cfg.parallel = args.parallel;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = build_config(&args)?;
            let rows = run_experiment(&cfg);
            match &cfg.out {
                Some(path) => {
                    let file = std::fs::File::create(path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    write_csv(&rows, file)?;
                    eprintln!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
            if rows.iter().any(|r| !r.is_ok()) {
                std::process::exit(2);
            }
            Ok(())
        }
        Command::Compare { paths } => {
            anyhow::ensure!(!paths.is_empty(), "compare needs at least one CSV path");
            let rows = compare_report(&paths)?;
            write_compare_csv(&rows, std::io::stdout().lock())?;
            Ok(())
        }
    }
}
