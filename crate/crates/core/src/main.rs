use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mamnav::config::PrintMode;
use mamnav::runner::{self, RunOptions};
use mamnav::Result;

#[derive(Parser)]
#[command(name = "mamnav", version, about = "Coupled navigation and printing simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode and write trajectory.csv, events.jsonl, summary.json.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run both print modes over consecutive seeds and tabulate.
    Compare {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Fit deposition gains to measured part dimensions.
    Calibrate {
        scenario: PathBuf,
        measurements: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Load and check a scenario and its g-code without running.
    Validate {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted override, e.g. `--set controller.d_slow=0.8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Gains file produced by `calibrate`.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Continuous,
    PauseResume,
}

impl Common {
    fn options(&self, mode: Option<ModeArg>) -> Result<RunOptions> {
        Ok(RunOptions {
            mode: mode.map(|m| match m {
                ModeArg::Continuous => PrintMode::Continuous,
                ModeArg::PauseResume => PrintMode::PauseResume,
            }),
            seed: self.seed,
            overrides: self.set.iter().map(|s| runner::parse_override(s)).collect::<Result<_>>()?,
            calibration: self.calibration.clone(),
        })
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Run { scenario, common, mode, out } => {
            let ep = runner::cmd_run(&scenario, &common.options(mode)?, out.as_deref())?;
            print!("{}", ep.summary_json()?);
            Ok(if ep.summary.timed_out { runner::EXIT_TIMEOUT } else { runner::EXIT_OK })
        }
        Cmd::Compare { scenario, common, repeats, out } => {
            let report = runner::cmd_compare(&scenario, &common.options(None)?, repeats)?;
            if let Some(dir) = &out {
                report.write(dir)?;
            }
            print!("{}", report.to_table());
            Ok(if report.any_timeout() { runner::EXIT_TIMEOUT } else { runner::EXIT_OK })
        }
        Cmd::Calibrate { scenario, measurements, common, out } => {
            let cal = runner::cmd_calibrate(&scenario, &measurements, &common.options(None)?, out.as_deref())?;
            let d = cal.mean_deviation;
            println!("mean deviation (mm): x {:+.4} y {:+.4} z {:+.4}", d[0], d[1], d[2]);
            let g = &cal.gains;
            println!("gains: g_x {:.6e} g_y {:.6e} g_z {:.6e}  id {}", g.g_x, g.g_y, g.g_z, cal.id);
            Ok(runner::EXIT_OK)
        }
        Cmd::Validate { scenario, common } => {
            let sc = runner::cmd_validate(&scenario, &common.options(None)?)?;
            println!("ok: {} ({} obstacles, {} bumps)", scenario.display(), sc.map.obstacles.len(), sc.map.bumps.len());
            Ok(runner::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
