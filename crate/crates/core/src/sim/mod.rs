//! Deterministic plant, sensors, localization, deposition model and the
//! closed-loop episode that ties every module together.

mod calibrate;
mod episode;
mod lidar;
mod localize;
mod plant;
mod quality;

pub use calibrate::{
    calibrate_gains, gains_from_integrals, load_measurements, mean_deviation, Calibration, MIN_INTEGRAL,
};
pub use episode::{
    load_program, run_episode, run_episode_with, EpisodeResult, EpisodeSummary, EventRecord, TickRecord,
};
pub use lidar::{add_range_noise, distance_processor, raycast_lidar, LidarScan};
pub use localize::{localize, LocalizationNoise, NoiseStream, PoseEstimate};
pub use plant::{adapt_command, bump_response, command_adapter, step_plant, PlantParams, PlantState};
pub use quality::{deposition_update, Gains, QualityState};
