//! Inverse sensor model for a single beam.
//!
//! The surface position along the beam and the lateral beam footprint are
//! both blurred by the same compact quadratic kernel `q` on `[-3, 3]` (unit
//! variance) scaled by `sigma_r` and `sigma_theta` respectively. With
//! normalized offsets `v = (x_r - z_r) / sigma_r` and `w = x_theta / sigma_theta`
//! the occupancy probability separates into
//!
//! ```text
//! s(v, w) = 1/2 + B(v) * A(w)
//! B(v)    = Q(v) - Q(v - 3) / 2 - 1/2
//! A(w)    = Q(w + 3) - Q(w - 3)
//! ```
//!
//! where `Q` is the kernel's cumulative distribution.

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{BeamIndex, PartitionProjection, ProjectionModel, SensorCoords};

/// Kernel density on `[-3, 3]`.
pub fn kernel(t: f64) -> f64 {
    let a = t.abs();
    if a >= 3.0 {
        0.0
    } else if a >= 1.0 {
        (3.0 - a) * (3.0 - a) / 16.0
    } else {
        (3.0 - t * t) / 8.0
    }
}

/// Cumulative distribution of [`kernel`].
pub fn kernel_cdf(t: f64) -> f64 {
    if t <= -3.0 {
        0.0
    } else if t <= -1.0 {
        (3.0 + t).powi(3) / 48.0
    } else if t < 1.0 {
        0.5 + (9.0 * t - t * t * t) / 24.0
    } else if t < 3.0 {
        1.0 - (3.0 - t).powi(3) / 48.0
    } else {
        1.0
    }
}

/// Range profile, in `[-1/2, 1/2]`; zero for `v >= 6`.
pub fn range_profile(v: f64) -> f64 {
    kernel_cdf(v) - 0.5 * kernel_cdf(v - 3.0) - 0.5
}

/// Lateral weight, in `[0, 1]`; zero for `|w| >= 6`.
pub fn lateral_weight(w: f64) -> f64 {
    kernel_cdf(w + 3.0) - kernel_cdf(w - 3.0)
}

/// Occupancy probability at normalized offsets from a hit.
pub fn occupancy_probability(v: f64, w: f64) -> f64 {
    0.5 + range_profile(v) * lateral_weight(w)
}

/// Largest slope of `occupancy_probability` along `v`.
pub const MAX_RANGE_SLOPE: f64 = 3.0 / 8.0;
/// Largest slope of `occupancy_probability` along `w`.
pub const MAX_LATERAL_SLOPE: f64 = 3.0 / 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid beam model parameter: {0}")]
    InvalidParameter(String),
}

/// Range noise as a function of the measured range coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeNoise {
    /// `sigma_r = kappa` (meters).
    Constant(f64),
    /// `sigma_r = kappa * z^2` (kappa in 1/m).
    Quadratic(f64),
}

impl RangeNoise {
    pub fn sigma(&self, z: f64) -> f64 {
        match *self {
            RangeNoise::Constant(k) => k,
            RangeNoise::Quadratic(k) => k * z * z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamModelParams {
    /// Lateral beam spread, radians (normalized image units for pinhole).
    pub sigma_theta: f64,
    pub range_noise: RangeNoise,
    /// Clamp applied to per-measurement log-odds updates.
    pub update_lo: f64,
    pub update_hi: f64,
    /// Probabilities are clamped to `[floor, 1 - floor]` before the log-odds
    /// transform.
    pub probability_floor: f64,
    /// Treat no-return beams as free space up to the maximum range.
    pub miss_as_free: bool,
}

impl Default for BeamModelParams {
    fn default() -> Self {
        Self {
            sigma_theta: 0.2_f64.to_radians(),
            range_noise: RangeNoise::Constant(0.03),
            update_lo: -4.0,
            update_hi: 4.0,
            probability_floor: 1e-4,
            miss_as_free: false,
        }
    }
}

impl BeamModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: &str| Err(ModelError::InvalidParameter(s.to_string()));
        if !(self.sigma_theta > 0.0 && self.sigma_theta.is_finite()) {
            return bad("sigma_theta must be positive");
        }
        let k = match self.range_noise {
            RangeNoise::Constant(k) | RangeNoise::Quadratic(k) => k,
        };
        if !(k > 0.0 && k.is_finite()) {
            return bad("range noise coefficient must be positive");
        }
        if !(self.update_lo < 0.0 && self.update_hi > 0.0) {
            return bad("update clamp must satisfy lo < 0 < hi");
        }
        if !(self.probability_floor > 0.0 && self.probability_floor < 0.5) {
            return bad("probability floor must be in (0, 0.5)");
        }
        Ok(())
    }

    pub fn sigma_r(&self, z: f64) -> f64 {
        self.range_noise.sigma(z)
    }

    /// Log-odds of a probability, floored and clamped.
    pub fn logodds(&self, s: f64) -> f64 {
        let p = s.clamp(self.probability_floor, 1.0 - self.probability_floor);
        (p / (1.0 - p)).ln().clamp(self.update_lo, self.update_hi)
    }

    /// Largest log-odds deviation from `logodds(s_center)` over all
    /// probabilities within `eps` of `s_center`.
    pub fn logodds_deviation(&self, s_center: f64, eps: f64) -> f64 {
        if !eps.is_finite() {
            return f64::INFINITY;
        }
        let at = self.logodds(s_center);
        (self.logodds(s_center + eps) - at).abs().max((at - self.logodds(s_center - eps)).abs())
    }

    /// Range-coordinate extent over which a beam changes occupancy.
    pub fn extent(&self, kind: BeamKind) -> Option<BeamExtent> {
        match kind {
            BeamKind::Invalid => None,
            BeamKind::Miss { max_range } => self.miss_as_free.then_some(BeamExtent {
                free_until: max_range,
                active_until: max_range,
                hit_range: None,
            }),
            BeamKind::Hit { z } => {
                let sigma = self.sigma_r(z);
                Some(BeamExtent {
                    free_until: z - 3.0 * sigma,
                    active_until: z + 6.0 * sigma,
                    hit_range: Some(z),
                })
            }
        }
    }
}

/// Interpretation of one range reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamKind {
    /// No usable reading; the beam never changes the map.
    Invalid,
    /// Surface hit at range coordinate `z`.
    Hit { z: f64 },
    /// No return within the sensor's maximum range.
    Miss { max_range: f64 },
}

impl BeamKind {
    /// Classifies a raw reading: NaN or below the minimum range is invalid,
    /// beyond the maximum range (including +inf) is a miss.
    pub fn from_reading(z: f64, projection: &ProjectionModel) -> Self {
        if z.is_nan() || z < projection.min_range {
            BeamKind::Invalid
        } else if z > projection.max_range {
            BeamKind::Miss {
                max_range: projection.max_range,
            }
        } else {
            BeamKind::Hit { z }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamMeasurement {
    pub z_r: f64,
    pub beam: BeamIndex,
    /// Unit direction in the sensor frame.
    pub direction: Vector3<f64>,
    pub kind: BeamKind,
}

impl BeamMeasurement {
    pub fn new(z_r: f64, beam: BeamIndex, projection: &ProjectionModel) -> Self {
        Self {
            z_r,
            beam,
            direction: projection.beam_direction(beam),
            kind: BeamKind::from_reading(z_r, projection),
        }
    }
}

/// Where along the range coordinate a beam's update is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamExtent {
    /// Below this the update is at its free-space value for a given `theta`.
    pub free_until: f64,
    /// At or beyond this the update is zero.
    pub active_until: f64,
    pub hit_range: Option<f64>,
}

/// Occupancy probability of a point given its nearest beam.
pub fn inverse_model(x: &SensorCoords, beam: &BeamMeasurement, params: &BeamModelParams) -> f64 {
    let w = x.theta / params.sigma_theta;
    match beam.kind {
        BeamKind::Invalid => 0.5,
        BeamKind::Miss { max_range } => {
            if params.miss_as_free && x.r < max_range {
                0.5 - 0.5 * lateral_weight(w)
            } else {
                0.5
            }
        }
        BeamKind::Hit { z } => occupancy_probability((x.r - z) / params.sigma_r(z), w),
    }
}

pub fn inverse_model_logodds(x: &SensorCoords, beam: &BeamMeasurement, params: &BeamModelParams) -> f64 {
    params.logodds(inverse_model(x, beam, params))
}

/// Aggregate of the beams that can influence a partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSummary {
    pub hits: u32,
    pub misses: u32,
    pub inactive: u32,
    pub min_free_until: f64,
    pub max_active_until: f64,
    pub max_hit_range: f64,
}

impl Default for BeamSummary {
    fn default() -> Self {
        Self {
            hits: 0,
            misses: 0,
            inactive: 0,
            min_free_until: f64::INFINITY,
            max_active_until: f64::NEG_INFINITY,
            max_hit_range: f64::NEG_INFINITY,
        }
    }
}

impl BeamSummary {
    pub fn of_beam(extent: Option<BeamExtent>) -> Self {
        match extent {
            None => Self {
                inactive: 1,
                ..Self::default()
            },
            Some(e) => Self {
                hits: e.hit_range.is_some() as u32,
                misses: e.hit_range.is_none() as u32,
                inactive: 0,
                min_free_until: e.free_until,
                max_active_until: e.active_until,
                max_hit_range: e.hit_range.unwrap_or(f64::NEG_INFINITY),
            },
        }
    }

    pub fn from_beams(beams: &[BeamMeasurement], params: &BeamModelParams) -> Self {
        beams
            .iter()
            .fold(Self::default(), |acc, b| acc.merge(&Self::of_beam(params.extent(b.kind))))
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            hits: self.hits + other.hits,
            misses: self.misses + other.misses,
            inactive: self.inactive + other.inactive,
            min_free_until: self.min_free_until.min(other.min_free_until),
            max_active_until: self.max_active_until.max(other.max_active_until),
            max_hit_range: self.max_hit_range.max(other.max_hit_range),
        }
    }

    pub fn active(&self) -> u32 {
        self.hits + self.misses
    }

    pub fn total(&self) -> u32 {
        self.active() + self.inactive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateType {
    /// No point of the partition receives a nonzero update.
    FullyUnobserved,
    /// Some point may receive a positive update.
    PossiblyOccupied,
    /// Updates are zero or negative everywhere.
    FreeOrUnobserved,
}

/// Classifies a partition from its projection and the beams within reach of
/// it. The classification is conservative: a partition is only reported
/// unobserved or free when that holds for every point inside it.
pub fn classify_update(projection: &PartitionProjection, beams: &BeamSummary) -> UpdateType {
    if projection.behind_sensor || beams.active() == 0 {
        return UpdateType::FullyUnobserved;
    }
    if projection.straddles_origin {
        return if beams.hits > 0 {
            UpdateType::PossiblyOccupied
        } else {
            UpdateType::FreeOrUnobserved
        };
    }
    if projection.r_min >= beams.max_active_until {
        return UpdateType::FullyUnobserved;
    }
    if projection.r_max <= beams.min_free_until || beams.hits == 0 {
        return UpdateType::FreeOrUnobserved;
    }
    UpdateType::PossiblyOccupied
}

/// Bound on `|s(p) - s(center)|` over the partition, or infinity when the
/// update is not smooth enough inside it to be approximated by one value.
pub fn epsilon_max(
    projection: &PartitionProjection,
    update: UpdateType,
    beams: &BeamSummary,
    params: &BeamModelParams,
) -> f64 {
    if projection.straddles_origin || !projection.v_htheta.is_finite() {
        return f64::INFINITY;
    }
    let lateral = MAX_LATERAL_SLOPE * projection.v_htheta / params.sigma_theta;
    match update {
        UpdateType::FullyUnobserved => 0.0,
        UpdateType::FreeOrUnobserved => {
            // Every beam in reach must be in its flat free region; otherwise
            // the window mixes beams with different profiles.
            let homogeneous = beams.inactive == 0 && projection.r_max <= beams.min_free_until;
            if homogeneous {
                lateral
            } else {
                f64::INFINITY
            }
        }
        UpdateType::PossiblyOccupied => {
            if beams.total() != 1 || beams.hits != 1 {
                return f64::INFINITY;
            }
            let range = MAX_RANGE_SLOPE * projection.v_hr / params.sigma_r(beams.max_hit_range);
            if projection.independent_extents {
                range + lateral
            } else {
                range.max(lateral)
            }
        }
    }
}
