use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphlimit::harness::{
    exit_code, parse_config, run_bench, run_converge, run_graphlimit, run_meanfield, run_simulate,
    RunReport, Scenario,
};
use graphlimit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "graphlimit",
    version,
    about = "Pairwise-competition opinion dynamics studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Particle simulations with invariant monitoring.
    Simulate(Common),
    /// Direct continuum solves, cross-checked against Picard iteration.
    Graphlimit(Common),
    /// Convergence of embedded particle solutions to the continuum reference.
    Converge(Common),
    /// Wasserstein-1 distance between empirical and continuum measures.
    Meanfield(Common),
    /// Timing of the factorized and brute-force mass rates.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file; every section is one scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only this scenario (a section of the config, or a built-in name).
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, env = "GRAPHLIMIT_OUT", default_value = "out")]
    out: PathBuf,
    /// Seed overriding the scenario's own.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, env = "GRAPHLIMIT_THREADS")]
    threads: Option<usize>,
}

fn load(common: &Common, default: &str) -> Result<Vec<Scenario>> {
    let mut scenarios = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config(None, format!("cannot read {}: {e}", path.display())))?;
            let all = parse_config(&text)?;
            match &common.scenario {
                Some(name) => {
                    let chosen: Vec<Scenario> =
                        all.into_iter().filter(|s| &s.name == name).collect();
                    if chosen.is_empty() {
                        return Err(Error::config(
                            None,
                            format!("no scenario '{name}' in {}", path.display()),
                        ));
                    }
                    chosen
                }
                None => all,
            }
        }
        None => {
            let name = common.scenario.as_deref().unwrap_or(default);
            vec![Scenario::builtin(name).ok_or_else(|| {
                Error::config(None, format!("unknown built-in scenario '{name}'"))
            })?]
        }
    };
    if let Some(seed) = common.seed {
        for s in &mut scenarios {
            s.seed = seed;
        }
    }
    Ok(scenarios)
}

fn run(command: &Command, common: &Common) -> Result<Vec<RunReport>> {
    let default = if matches!(command, Command::Bench(_)) {
        "stress-cubic"
    } else {
        "canonical-1d"
    };
    let out: &Path = &common.out;
    load(common, default)?
        .iter()
        .map(|s| match command {
            Command::Simulate(_) => run_simulate(s, Some(out)),
            Command::Graphlimit(_) => run_graphlimit(s, Some(out)),
            Command::Converge(_) => run_converge(s, Some(out)).map(|(r, _)| r),
            Command::Meanfield(_) => run_meanfield(s, Some(out)),
            Command::Bench(_) => run_bench(s, Some(out)),
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Simulate(c)
        | Command::Graphlimit(c)
        | Command::Converge(c)
        | Command::Meanfield(c)
        | Command::Bench(c) => c,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| run(&cli.command, common)) {
        Ok(reports) => {
            let mut failed = false;
            for r in &reports {
                for f in &r.files {
                    println!("{}: wrote {}", r.scenario, f.display());
                }
                if r.violations.is_empty() {
                    println!("{}: ok", r.scenario);
                } else {
                    failed = true;
                    for v in &r.violations {
                        eprintln!("{}: violation: {v}", r.scenario);
                    }
                }
            }
            ExitCode::from(if failed { 1 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
