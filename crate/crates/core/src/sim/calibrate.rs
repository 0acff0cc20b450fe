use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::episode::{hex, load_program, run_episode_with};
use super::quality::Gains;
use crate::config::PrintMode;
use crate::error::{Error, Result};
use crate::world::Scenario;

/// Smallest disturbance integral from which gains are identifiable.
pub const MIN_INTEGRAL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub gains: Gains,
    pub disturbance_integral: f64,
    pub signed_integral: f64,
    /// Mean measured deviation the gains reproduce, mm.
    pub mean_deviation: [f64; 3],
    pub samples: usize,
    pub seed: u64,
    /// Content hash of the fields above.
    pub id: String,
}

impl Calibration {
    fn compute_id(&self) -> String {
        let body = serde_json::json!({
            "gains": self.gains,
            "disturbance_integral": self.disturbance_integral,
            "signed_integral": self.signed_integral,
            "mean_deviation": self.mean_deviation,
            "samples": self.samples,
            "seed": self.seed,
        });
        hex(&Sha256::digest(body.to_string().as_bytes()))[..16].to_string()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cal: Calibration = serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        if cal.id != cal.compute_id() {
            return Err(Error::validation(format!("{}: calibration id does not match its contents", path.display())));
        }
        Ok(cal)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Deserialize)]
struct MeasurementRow {
    #[allow(dead_code)]
    sample: String,
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
}

/// Reads `sample,x_mm,y_mm,z_mm` rows.
pub fn load_measurements(path: impl AsRef<Path>) -> Result<Vec<[f64; 3]>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse { source_name: path.display().to_string(), line: None, message: format!("{other:?}") },
    })?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<MeasurementRow>() {
        let r = row.map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: e.position().map(|p| p.line() as usize),
            message: e.to_string(),
        })?;
        out.push([r.x_mm, r.y_mm, r.z_mm]);
    }
    if out.is_empty() {
        return Err(Error::validation(format!("{}: no measurement rows", path.display())));
    }
    Ok(out)
}

/// Mean measured deviation from `nominal + baseline`.
pub fn mean_deviation(measurements: &[[f64; 3]], nominal: [f64; 3], baseline: [f64; 3]) -> [f64; 3] {
    let n = measurements.len() as f64;
    std::array::from_fn(|i| measurements.iter().map(|m| m[i]).sum::<f64>() / n - nominal[i] - baseline[i])
}

/// Closed-form gains: X and Y against the absolute integral, Z against the
/// signed one (the Z error carries a sign).
pub fn gains_from_integrals(deviation: [f64; 3], integral: f64, signed_integral: f64) -> Result<Gains> {
    if !(integral >= MIN_INTEGRAL) {
        return Err(Error::DegenerateCalibration(integral));
    }
    if !(signed_integral.abs() >= MIN_INTEGRAL) {
        return Err(Error::DegenerateCalibration(signed_integral));
    }
    Ok(Gains { g_x: deviation[0] / integral, g_y: deviation[1] / integral, g_z: deviation[2] / signed_integral })
}

/// Runs one continuous-mode episode and fits the gains to the measurements.
pub fn calibrate_gains(measurements: &[[f64; 3]], scenario: &Scenario) -> Result<Calibration> {
    if measurements.is_empty() {
        return Err(Error::validation("calibration needs at least one measurement row"));
    }
    if scenario.mode != PrintMode::Continuous {
        return Err(Error::validation("calibration requires a continuous-mode scenario"));
    }
    let program = load_program(scenario)?;
    let ep = run_episode_with(scenario, &program, &Gains::default(), None)?;
    let dev = mean_deviation(measurements, ep.summary.nominal_dimensions, scenario.sim.baseline_error);
    let gains = gains_from_integrals(dev, ep.summary.disturbance_integral, ep.summary.signed_integral)?;
    let mut cal = Calibration {
        gains,
        disturbance_integral: ep.summary.disturbance_integral,
        signed_integral: ep.summary.signed_integral,
        mean_deviation: dev,
        samples: measurements.len(),
        seed: scenario.rng_seed,
        id: String::new(),
    };
    cal.id = cal.compute_id();
    Ok(cal)
}
