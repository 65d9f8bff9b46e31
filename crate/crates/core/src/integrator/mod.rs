//! Measurement integration into the wavelet map.
//!
//! [`integrate_recursive`] walks the octree top-down, classifying each
//! partition against the beams that can reach it, and stops refining as soon
//! as one value represents the whole partition to within the configured
//! log-odds tolerance. [`integrate_naive`] evaluates the inverse model at
//! every cell of the update resolution and is the reference it is checked
//! against. [`integrate_rays`] is a conventional ray-casting baseline.

mod beams;
mod naive;
mod rays;
mod recursive;

use std::ops::AddAssign;

use thiserror::Error;

use crate::exec::Exec;
use crate::observation::{Observation, ObservationError};
use crate::tree::{MapError, WaveletOctree};

pub use naive::integrate_naive;
pub use rays::{integrate_rays, voxel_traversal};
pub use recursive::integrate_recursive;

/// Cached maxima within this distance of the lower clamp count as saturated.
pub const SATURATION_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegratorMode {
    /// Full beam model with adaptive-resolution updates.
    #[default]
    Beams,
    /// Ray casting at the finest update resolution.
    Rays,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Largest log-odds error tolerated when one value stands in for a whole
    /// partition. Zero disables early termination.
    pub epsilon_thresh: f64,
    /// Width of the finest cells updates are computed at, meters. Must be
    /// the map's minimum cell width times a power of two.
    pub max_update_resolution: f64,
    /// Skip free-space updates in regions already at the lower clamp.
    pub skip_saturated: bool,
    /// Skip occupied updates in regions already at the upper clamp.
    pub skip_saturated_occupied: bool,
    pub mode: IntegratorMode,
    pub exec: Exec,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            epsilon_thresh: 0.1,
            max_update_resolution: 0.05,
            skip_saturated: true,
            skip_saturated_occupied: false,
            mode: IntegratorMode::Beams,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntegrationStats {
    pub nodes_visited: u64,
    /// Partitions coarser than the update resolution that received a single
    /// value.
    pub terminated_early: u64,
    pub skipped_saturated: u64,
    /// Partitions that received a nonzero-capable value.
    pub blocks_updated: u64,
    pub unobserved: u64,
    /// The observation does not reach the map at all.
    pub outside_map: bool,
}

impl AddAssign for IntegrationStats {
    fn add_assign(&mut self, other: Self) {
        self.nodes_visited += other.nodes_visited;
        self.terminated_early += other.terminated_early;
        self.skipped_saturated += other.skipped_saturated;
        self.blocks_updated += other.blocks_updated;
        self.unobserved += other.unobserved;
        self.outside_map |= other.outside_map;
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error("update resolution {resolution} m is not the map's cell width {cell} m times a power of two")]
    Resolution { resolution: f64, cell: f64 },
    #[error("epsilon threshold must be finite and non-negative, got {0}")]
    Epsilon(f64),
}

/// Depth of the update resolution in `map`.
pub(crate) fn update_depth(map: &WaveletOctree, config: &IntegratorConfig) -> Result<u8, IntegrateError> {
    if !(config.epsilon_thresh >= 0.0 && config.epsilon_thresh.is_finite()) {
        return Err(IntegrateError::Epsilon(config.epsilon_thresh));
    }
    map.config()
        .depth_for_width(config.max_update_resolution)
        .ok_or(IntegrateError::Resolution {
            resolution: config.max_update_resolution,
            cell: map.config().min_cell_width,
        })
}

/// Integrates one observation with the method selected by `config.mode`.
pub fn integrate(
    map: &mut WaveletOctree,
    observation: &Observation,
    config: &IntegratorConfig,
) -> Result<IntegrationStats, IntegrateError> {
    match config.mode {
        IntegratorMode::Beams => integrate_recursive(map, observation, config),
        IntegratorMode::Rays => integrate_rays(map, observation, config),
    }
}

/// Integrates observations from several sensors in order. All inputs are
/// validated before the map is touched.
pub fn integrate_multi_sensor(
    map: &mut WaveletOctree,
    inputs: &[(&Observation, &IntegratorConfig)],
) -> Result<IntegrationStats, IntegrateError> {
    for (obs, cfg) in inputs {
        obs.validate()?;
        update_depth(map, cfg)?;
    }
    let mut total = IntegrationStats::default();
    for (obs, cfg) in inputs {
        total += integrate(map, obs, cfg)?;
    }
    Ok(total)
}
