use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PlantState;
use crate::world::{wrap_angle, Vec2};

/// The single seeded random stream of an episode. Counts draws so logs can
/// show that two runs consumed identical sequences.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    draws: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream { rng: ChaCha8Rng::seed_from_u64(seed), draws: 0 }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.draws += 1;
        StandardNormal.sample(&mut self.rng)
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationNoise {
    pub sigma_pos: f64,
    /// Radians.
    pub sigma_heading: f64,
    pub sigma_vel: f64,
}

impl Default for LocalizationNoise {
    fn default() -> Self {
        LocalizationNoise { sigma_pos: 0.005, sigma_heading: 0.5f64.to_radians(), sigma_vel: 0.002 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub position: Vec2,
    pub heading: f64,
    pub velocity: Vec2,
}

impl PoseEstimate {
    pub fn state4(&self) -> [f64; 4] {
        [self.position.x, self.position.y, self.velocity.x, self.velocity.y]
    }
}

/// Truth plus zero-mean Gaussian noise. Always draws five samples so the
/// stream position does not depend on the configured sigmas.
pub fn localize(plant: &PlantState, noise: &LocalizationNoise, stream: &mut NoiseStream) -> PoseEstimate {
    let n: [f64; 5] = std::array::from_fn(|_| stream.standard_normal());
    let v = plant.velocity();
    PoseEstimate {
        position: plant.position + Vec2::new(n[0], n[1]) * noise.sigma_pos,
        heading: wrap_angle(plant.heading + n[2] * noise.sigma_heading),
        velocity: v + Vec2::new(n[3], n[4]) * noise.sigma_vel,
    }
}
