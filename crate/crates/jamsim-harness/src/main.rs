use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jamsim::jammer::{plan_jam, InvalidateMode, JamGeometry};
use jamsim::OfdmConfig;
use jamsim_harness::export::{export_results, export_snapshot};
use jamsim_harness::sweep::{sweep_mdr_dr, sweep_overcrowding, sweep_pd_vs_cfo, sweep_pd_vs_jsr, SweepOptions};
use jamsim_harness::{run_snapshot, HarnessError, Scenario, SweepResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "jamsim", version, about = "OFDM radar deceptive-jamming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; the built-in reference scene when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write per-trial outcomes to trials.csv.
    #[arg(long)]
    raw: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Spacing {
    #[value(name = "312k")]
    Wide,
    #[value(name = "78k")]
    Narrow,
}

impl Spacing {
    fn apply(self, cfg: &mut OfdmConfig) {
        let preset = match self {
            Spacing::Wide => OfdmConfig::wide_spacing(),
            Spacing::Narrow => OfdmConfig::default(),
        };
        cfg.q = preset.q;
        cfg.q_cp = preset.q_cp;
        cfg.pri_symbols = preset.pri_symbols;
    }

    fn label(self) -> &'static str {
        match self {
            Spacing::Wide => "312k",
            Spacing::Narrow => "78k",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// One measurement: RDM, detections, sync decision and truth table.
    Snapshot {
        #[command(flatten)]
        common: Common,
    },
    /// Detection probability against CFO difference (ppm).
    SweepCfo {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "312k")]
        spacing: Spacing,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0])]
        values: Vec<f64>,
    },
    /// Detection probability against JSR (dB) in one CFO region.
    SweepJsr {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "high")]
        region: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [-10.0, -5.0, 0.0, 5.0, 10.0, 12.0, 15.0])]
        values: Vec<f64>,
    },
    /// Missed-detection rate of real targets and detection rate of artificial ones, all regions.
    SweepMdrDr {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0])]
        values: Vec<f64>,
    },
    /// Detection count against the number of real scatterers and the false-alarm rate.
    SweepOvercrowd {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 5])]
        values: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-6, 1e-8])]
        pfa: Vec<f64>,
    },
}

fn load(common: &Common) -> Result<Scenario, HarnessError> {
    let s = match &common.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::reference(),
    };
    s.validate()?;
    Ok(s)
}

/// A preceding attack that cannot be launched after hearing the announcement is rejected up front.
fn check_feasible(s: &Scenario, seed: u64) -> Result<(), HarnessError> {
    let Some(strategy) = &s.jammer else { return Ok(()) };
    if strategy.invalidate_mode != InvalidateMode::PrecedingB1 {
        return Ok(());
    }
    let geom = JamGeometry::from_topology(&s.topology()?, s.ofdm.f_c);
    plan_jam(&s.ofdm, strategy, &geom, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(())
}

fn options(c: &Common) -> SweepOptions {
    SweepOptions { trials: c.trials, base_seed: c.seed, workers: c.workers }
}

fn finish(result: &SweepResult, out: &Path, raw: bool) -> Result<(), HarnessError> {
    for p in export_results(result, out, raw)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Snapshot { common } => {
            let s = load(&common)?;
            check_feasible(&s, common.seed)?;
            let snap = run_snapshot(&s, common.seed)?;
            for p in export_snapshot(&snap, &common.out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::SweepCfo { common, spacing, values } => {
            let mut s = load(&common)?;
            spacing.apply(&mut s.ofdm);
            s.validate()?;
            check_feasible(&s, common.seed)?;
            finish(&sweep_pd_vs_cfo(&s, spacing.label(), &values, &options(&common))?, &common.out, common.raw)
        }
        Command::SweepJsr { common, region, values } => {
            let s = load(&common)?;
            check_feasible(&s, common.seed)?;
            finish(&sweep_pd_vs_jsr(&s, &region, &values, &options(&common))?, &common.out, common.raw)
        }
        Command::SweepMdrDr { common, values } => {
            let s = load(&common)?;
            check_feasible(&s, common.seed)?;
            finish(&sweep_mdr_dr(&s, &values, &options(&common))?, &common.out, common.raw)
        }
        Command::SweepOvercrowd { common, values, pfa } => {
            let s = load(&common)?;
            finish(&sweep_overcrowding(&s, &values, &pfa, &options(&common))?, &common.out, common.raw)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
