//! Library side of the command-line tool: every subcommand is a plain
//! function here, and `main` only parses flags and maps errors to exit
//! codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PrintMode;
use crate::error::{Error, Result};
use crate::sim::{calibrate_gains, load_measurements, run_episode, Calibration, EpisodeResult, EpisodeSummary};
use crate::world::{load_scenario_with_overrides, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_TIMEOUT: i32 = 4;
pub const EXIT_DEGENERATE: i32 = 5;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::Validation(_)
        | Error::State { .. }
        | Error::Io { .. }
        | Error::Json(_)
        | Error::Csv(_) => EXIT_VALIDATION,
        Error::DegenerateCalibration(_) => EXIT_DEGENERATE,
        Error::PointInsidePolytope | Error::ReferenceInsideObstacle { .. } | Error::MalformedEventStream(_) => {
            EXIT_RUNTIME
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub mode: Option<PrintMode>,
    pub seed: Option<u64>,
    /// Dotted `key=value` overrides applied before validation.
    pub overrides: Vec<(String, String)>,
    /// Relative to the working directory, unlike paths inside the file.
    pub calibration: Option<PathBuf>,
}

/// Splits `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::validation(format!("override {text:?} is not key=value"))),
    }
}

pub fn load_with_options(path: &Path, opts: &RunOptions) -> Result<Scenario> {
    let mut sc = load_scenario_with_overrides(path, &opts.overrides)?;
    if let Some(m) = opts.mode {
        sc.mode = m;
    }
    if let Some(s) = opts.seed {
        sc.rng_seed = s;
    }
    if let Some(c) = &opts.calibration {
        sc.sim.calibration = Some(c.clone());
    }
    sc.validate()?;
    Ok(sc)
}

pub fn cmd_validate(path: &Path, opts: &RunOptions) -> Result<Scenario> {
    let sc = load_with_options(path, opts)?;
    crate::sim::load_program(&sc)?;
    Ok(sc)
}

/// Runs one episode; writes its three artifacts when `out` is given.
pub fn cmd_run(path: &Path, opts: &RunOptions, out: Option<&Path>) -> Result<EpisodeResult> {
    let sc = load_with_options(path, opts)?;
    let ep = run_episode(&sc)?;
    if let Some(dir) = out {
        ep.write_outputs(dir)?;
    }
    Ok(ep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAggregate {
    pub mode: PrintMode,
    pub episodes: usize,
    pub mean_dimensions: [f64; 3],
    pub mean_deviations: [f64; 3],
    pub mean_completion_time: f64,
    pub mean_pause_count: f64,
    pub timeouts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub base_seed: u64,
    pub repeats: usize,
    pub design_target: [f64; 3],
    pub continuous: ModeAggregate,
    pub pause_resume: ModeAggregate,
    /// `(|dev_A| − |dev_B|) / |dev_A| × 100` per axis.
    pub improvement_percent: [f64; 3],
    pub episodes: Vec<EpisodeSummary>,
}

fn aggregate(mode: PrintMode, eps: &[&EpisodeSummary]) -> ModeAggregate {
    let n = eps.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeSummary) -> f64| eps.iter().map(|e| f(e)).sum::<f64>() / n;
    ModeAggregate {
        mode,
        episodes: eps.len(),
        mean_dimensions: std::array::from_fn(|i| mean(&|e| e.final_dimensions[i])),
        mean_deviations: std::array::from_fn(|i| mean(&|e| e.deviations[i])),
        mean_completion_time: mean(&|e| e.completion_time),
        mean_pause_count: mean(&|e| e.print_events.pause_count as f64),
        timeouts: eps.iter().filter(|e| e.timed_out).count(),
    }
}

pub fn improvement_percent(dev_a: [f64; 3], dev_b: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| (dev_a[i].abs() - dev_b[i].abs()) / dev_a[i].abs() * 100.0)
}

/// `repeats` episodes per mode with seeds `seed, seed+1, …`, run in
/// parallel and aggregated in a fixed order.
pub fn cmd_compare(path: &Path, opts: &RunOptions, repeats: usize) -> Result<RunReport> {
    if repeats < 1 {
        return Err(Error::validation("--repeats must be >= 1"));
    }
    let base = load_with_options(path, opts)?;
    let jobs: Vec<(PrintMode, u64)> = [PrintMode::Continuous, PrintMode::PauseResume]
        .into_iter()
        .flat_map(|m| (0..repeats as u64).map(move |i| (m, base.rng_seed + i)))
        .collect();
    let results: Vec<EpisodeSummary> = jobs
        .par_iter()
        .map(|(mode, seed)| {
            let mut sc = base.clone();
            sc.mode = *mode;
            sc.rng_seed = *seed;
            run_episode(&sc).map(|e| e.summary)
        })
        .collect::<Result<_>>()?;
    let pick = |m: PrintMode| results.iter().filter(|e| e.mode == m).collect::<Vec<_>>();
    let a = aggregate(PrintMode::Continuous, &pick(PrintMode::Continuous));
    let b = aggregate(PrintMode::PauseResume, &pick(PrintMode::PauseResume));
    Ok(RunReport {
        scenario: path.display().to_string(),
        base_seed: base.rng_seed,
        repeats,
        design_target: results[0].nominal_dimensions,
        improvement_percent: improvement_percent(a.mean_deviations, b.mean_deviations),
        continuous: a,
        pause_resume: b,
        episodes: results,
    })
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Plain-text comparison table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, label: &str, v: [f64; 3], signed: bool| {
            let f = |x: f64| if signed { format!("{x:+.2}") } else { format!("{x:.2}") };
            let _ = writeln!(s, "{label:<22}{:>9}{:>9}{:>9}", f(v[0]), f(v[1]), f(v[2]));
        };
        let _ = writeln!(s, "{:<22}{:>9}{:>9}{:>9}", "", "X (mm)", "Y (mm)", "Z (mm)");
        row(&mut s, "Design target", self.design_target, false);
        row(&mut s, "Case A (avg)", self.continuous.mean_dimensions, false);
        row(&mut s, "Case B (avg)", self.pause_resume.mean_dimensions, false);
        row(&mut s, "Deviation A", self.continuous.mean_deviations, true);
        row(&mut s, "Deviation B", self.pause_resume.mean_deviations, true);
        let p = self.improvement_percent;
        let _ = writeln!(s, "{:<22}{:>8.0}%{:>8.0}%{:>8.0}%", "Improvement", p[0], p[1], p[2]);
        let _ = writeln!(
            s,
            "episodes per mode: {}; pauses per episode: A {:.1}, B {:.1}",
            self.repeats, self.continuous.mean_pause_count, self.pause_resume.mean_pause_count
        );
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("report.json", self.to_json()?), ("report.txt", self.to_table())] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    pub fn any_timeout(&self) -> bool {
        self.continuous.timeouts + self.pause_resume.timeouts > 0
    }
}

/// Fits gains on a continuous-mode run of the scenario and writes them.
pub fn cmd_calibrate(path: &Path, measurements: &Path, opts: &RunOptions, out: Option<&Path>) -> Result<Calibration> {
    let rows = load_measurements(measurements)?;
    let mut opts = opts.clone();
    opts.mode = Some(PrintMode::Continuous);
    opts.calibration = None;
    let mut sc = load_with_options(path, &opts)?;
    sc.sim.calibration = None;
    let cal = calibrate_gains(&rows, &sc)?;
    if let Some(p) = out {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        cal.save(p)?;
    }
    Ok(cal)
}
