use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cusp_core::cli::{plan, run, PrecisionMode, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "cusp", version, about = "Billiards with flat-point cusps: simulation and limit-law diagnostics")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; built-in defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corner-series arithmetic; `standard` switches to extended precision
    /// only for long series.
    #[arg(long, global = true, value_parser = ["standard", "extended"])]
    precision: Option<String>,
    /// Print the resolved config and planned outputs, then exit.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Boundary pieces and cusp summary.
    Table,
    /// Collision sequences of μ-random orbits.
    Simulate,
    /// Returns to the base set with induced sums.
    Induce,
    /// Corner series of launches into one cusp.
    CornerSeries,
    /// Scaled Birkhoff sums against the stable limit.
    StableCheck,
    /// Tails of return times into one cusp.
    TailCheck,
    /// Correlation decay along orbits.
    CorrDecay,
    /// Point-process counts of large returns.
    PpCheck,
    /// M1 and J1 distances between W_n and its linearization.
    Paths,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Table => "table",
            Command::Simulate => "simulate",
            Command::Induce => "induce",
            Command::CornerSeries => "corner-series",
            Command::StableCheck => "stable-check",
            Command::TailCheck => "tail-check",
            Command::CorrDecay => "corr-decay",
            Command::PpCheck => "pp-check",
            Command::Paths => "paths",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(args: &Args) -> cusp_core::error::Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(p) = &args.precision {
        cfg.precision = if p == "extended" { PrecisionMode::Extended } else { PrecisionMode::Standard };
    }
    let cfg = cfg.resolve(args.command.name())?;
    if args.dry_run {
        println!("# manifest {}", cfg.manifest_hash()?);
        print!("{}", cfg.to_toml()?);
        println!("# outputs under {}:", cfg.output_dir.display());
        for f in plan(&cfg) {
            println!("#   {f}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    if let Some(w) = args.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| cusp_core::error::Error::Config(e.to_string()))?;
    }
    let out = run(&cfg)?;
    for p in out.write(&cfg, &cfg.output_dir)? {
        println!("wrote {}", p.display());
    }
    for line in &out.report {
        println!("{line}");
    }
    if out.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &out.failures {
            eprintln!("validation failure: {f}");
        }
        Ok(ExitCode::from(1))
    }
}
