use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ssle_core::collision::GroupCtx;
use ssle_core::oracle::{explore_soundness, GroupSpec};
use ssle_core::params::GroupSizes;
use ssle_harness::check::run_checks;
use ssle_harness::experiment::{write_csv_header, write_csv_rows};
use ssle_harness::{run_experiment, RunSettings};

#[derive(Parser)]
#[command(
    name = "ssle",
    version,
    about = "Self-stabilizing ranking and leader election simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario for a number of seeded trials.
    Run(RunFlags),
    /// Run a scenario over the cartesian product of n and r lists.
    Sweep(SweepFlags),
    /// Exhaustive collision-detection search on a shrunk group.
    SoundnessBfs(BfsFlags),
    /// Short monitored runs of every scenario and the shrunk search.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args, Default)]
struct RunFlags {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// clean-triggered, fully-dormant, correct-ranked, duplicate-ranks:K,
    /// corrupted-messages:K, mixed-generations[:S], uniform-random, custom:FILE
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Interaction budget per trial.
    #[arg(long)]
    horizon: Option<u64>,
    /// Interactions the leader must hold to count as stabilized.
    #[arg(long)]
    confirm_window: Option<u64>,
    /// true-random or synthetic-coins
    #[arg(long)]
    rng_mode: Option<String>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a JSON-lines event trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run every trial to the horizon.
    #[arg(long)]
    full_horizon: bool,
}

#[derive(Args)]
struct SweepFlags {
    #[command(flatten)]
    run: RunFlags,
    /// Comma-separated population sizes.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Comma-separated values of r.
    #[arg(long, value_delimiter = ',')]
    r_list: Option<Vec<usize>>,
}

#[derive(Args)]
struct BfsFlags {
    #[arg(long, default_value_t = 2)]
    group_size: usize,
    #[arg(long, default_value_t = 2)]
    ids_per_rank: u32,
    #[arg(long, default_value_t = 2)]
    sig_space: u32,
    #[arg(long, default_value_t = 2)]
    sig_refresh: u32,
    /// Give the first two agents the same rank.
    #[arg(long)]
    plant_duplicate: bool,
    /// Maximum number of distinct states to visit.
    #[arg(long, default_value_t = 10_000_000)]
    budget: usize,
}

impl RunFlags {
    fn settings(
        self,
        n_list: Option<Vec<usize>>,
        r_list: Option<Vec<usize>>,
    ) -> Result<RunSettings> {
        let file = match &self.config {
            Some(p) => RunSettings::load(p)?,
            None => RunSettings::default(),
        };
        Ok(file.overlay(RunSettings {
            n: self.n,
            r: self.r,
            scenario: self.scenario,
            trials: self.trials,
            seed: self.seed,
            horizon: self.horizon,
            confirm_window: self.confirm_window,
            rng_mode: self.rng_mode,
            out: self.out,
            trace: self.trace,
            full_horizon: self.full_horizon.then_some(true),
            n_list,
            r_list,
        }))
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_pairs(s: &RunSettings, pairs: &[(usize, usize)]) -> Result<()> {
    let mut out = sink(&s.out)?;
    write_csv_header(&mut out)?;
    let mut trace = match &s.trace {
        Some(p) => Some(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => None,
    };
    for &(n, r) in pairs {
        let e = s.experiment(n, r)?;
        let rec = run_experiment(&e)?;
        write_csv_rows(&rec, &mut out)?;
        if let Some(t) = trace.as_mut() {
            for line in &rec.events {
                writeln!(t, "{line}")?;
            }
        }
        eprintln!(
            "{} n={n} r={r}: {}/{} stabilized, median {:?}",
            rec.scenario,
            rec.summary.stabilized,
            rec.summary.trials,
            rec.summary.median_stabilization
        );
    }
    out.flush()?;
    if let Some(mut t) = trace {
        t.flush()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(f) => {
            let s = f.settings(None, None)?;
            let e = s.single()?;
            run_pairs(&s, &[(e.params.n, e.params.r)])
        }
        Command::Sweep(f) => {
            let s = f.run.settings(f.n_list, f.r_list)?;
            let pairs = s.sweep_pairs()?;
            if pairs.is_empty() {
                bail!("sweep has no (n, r) pairs with 1 <= r <= n/2");
            }
            run_pairs(&s, &pairs)
        }
        Command::SoundnessBfs(f) => {
            if f.group_size == 0 {
                bail!("group size must be positive");
            }
            let mut ranks: Vec<usize> = (1..=f.group_size).collect();
            if f.plant_duplicate && ranks.len() >= 2 {
                ranks[1] = ranks[0];
            }
            let spec = GroupSpec {
                ctx: GroupCtx::new(
                    1..f.group_size + 1,
                    GroupSizes {
                        sig_space: f.sig_space,
                        ids_per_rank: f.ids_per_rank,
                        sig_refresh: f.sig_refresh,
                    },
                ),
                ranks,
            };
            let report = explore_soundness(&spec, f.budget);
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Command::Check { seed } => {
            let lines = run_checks(seed);
            let mut failed = 0;
            for l in &lines {
                println!(
                    "{} {}: {}",
                    if l.pass { "PASS" } else { "FAIL" },
                    l.name,
                    l.detail
                );
                failed += usize::from(!l.pass);
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", lines.len());
            }
            Ok(())
        }
    }
}
