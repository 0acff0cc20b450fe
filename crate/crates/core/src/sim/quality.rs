use serde::{Deserialize, Serialize};

/// Disturbance-to-error gains, mm per (m/s²·s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub g_x: f64,
    pub g_y: f64,
    pub g_z: f64,
}

impl Default for Gains {
    /// Unit gains; real use loads a calibration.
    fn default() -> Self {
        Gains { g_x: 1.0, g_y: 1.0, g_z: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityState {
    /// mm.
    pub accumulated_error: [f64; 3],
    pub extruding: bool,
    /// ∫|a_z| dt over extruding time.
    pub disturbance_integral: f64,
    /// ∫a_z dt over extruding time.
    pub signed_integral: f64,
}

pub fn deposition_update(q: &QualityState, extruding: bool, a_z: f64, dt: f64, gains: &Gains) -> QualityState {
    let mut out = *q;
    out.extruding = extruding;
    if extruding {
        out.accumulated_error[0] += gains.g_x * a_z.abs() * dt;
        out.accumulated_error[1] += gains.g_y * a_z.abs() * dt;
        out.accumulated_error[2] += gains.g_z * a_z * dt;
        out.disturbance_integral += a_z.abs() * dt;
        out.signed_integral += a_z * dt;
    }
    out
}
