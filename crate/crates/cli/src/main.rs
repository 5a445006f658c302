mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ganlab::verify::{format_table, Suite};
use rayon::prelude::*;

use config::{load, Job};
use run::{run_job, Outcome};

const DEFAULT_OUTPUT: &str = "ganlab-runs";

#[derive(Parser)]
#[command(
    name = "ganlab",
    version,
    about = "Seeded GAN, f-GAN, WGAN, CycleGAN and VAE experiments on toy distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiment files and write one directory per run.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Runs to execute in parallel.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        /// Output root; falls back to the file's `output`, then GANLAB_OUTPUT,
        /// then ./ganlab-runs.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Replaces the seed of every run.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run a property suite and print its table.
    Verify {
        /// conjugates, divergences, gradients, transport or all
        suite: String,
    },
}

fn output_root(cli: Option<&Path>, job: &Job) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = &job.output {
        return PathBuf::from(p);
    }
    match std::env::var_os("GANLAB_OUTPUT") {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from(DEFAULT_OUTPUT),
    }
}

fn cmd_run(configs: &[PathBuf], jobs: u16, output: Option<&Path>, seed: Option<u64>) -> u8 {
    let mut all = Vec::new();
    for path in configs {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: reading {}: {e}", path.display());
                return 2;
            }
        };
        match load(path, &text, seed) {
            Ok(js) => all.extend(js),
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        }
    }
    let mut targets = std::collections::BTreeSet::new();
    for job in &all {
        let dir = output_root(output, job).join(&job.name);
        if !targets.insert(dir.clone()) {
            eprintln!("error: two runs write to {}", dir.display());
            return 2;
        }
    }

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs as usize)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let results: Vec<_> = pool.install(|| {
        all.par_iter()
            .map(|job| run_job(job, &output_root(output, job)))
            .collect()
    });

    let mut worst = Outcome::Ok;
    for r in results {
        match &r.outcome {
            Outcome::Ok => println!("ok      {}  {}  ({})", r.name, r.dir.display(), r.summary),
            Outcome::Failed(m) => {
                if r.summary.is_empty() {
                    eprintln!("failed  {}: {m}", r.name);
                } else {
                    eprintln!(
                        "failed  {}  {}  ({}): {m}",
                        r.name,
                        r.dir.display(),
                        r.summary
                    );
                }
            }
            Outcome::Invalid(m) => eprintln!("invalid {}: {m}", r.name),
            Outcome::Aborted(m) => eprintln!("aborted {}: {m}", r.name),
        }
        worst = worst.max(r.outcome);
    }
    worst.code()
}

fn cmd_verify(name: &str) -> u8 {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        match Suite::from_name(name) {
            Some(s) => vec![s],
            None => {
                eprintln!("error: unknown suite {name:?}; expected conjugates, divergences, gradients, transport or all");
                return 2;
            }
        }
    };
    let mut ok = true;
    for s in suites {
        match s.run() {
            Ok(checks) => {
                println!("{}", s.name());
                print!("{}", format_table(&checks));
                let failed = checks.iter().filter(|c| !c.passed()).count();
                println!("{} of {} passed\n", checks.len() - failed, checks.len());
                ok &= failed == 0;
            }
            Err(e) => {
                eprintln!("{}: {e}", s.name());
                ok = false;
            }
        }
    }
    if ok {
        0
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run {
            configs,
            jobs,
            output,
            seed_override,
        } => cmd_run(configs, *jobs, output.as_deref(), *seed_override),
        Command::Verify { suite } => cmd_verify(suite),
    };
    ExitCode::from(code)
}
