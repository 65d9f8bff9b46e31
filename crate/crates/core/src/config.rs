//! TOML-facing descriptions of projections, beam models and maps. Physical
//! quantities are written with explicit units (see [`crate::units`]).
//!
//! ```toml
//! [projection]
//! kind = "spherical"
//! azimuth_min = "-180 deg"
//! azimuth_max = "179.65 deg"
//! elevation_min = "-15 deg"
//! elevation_max = "15 deg"
//! width = 1024
//! height = 32
//! min_range = "0.2 m"
//! max_range = "20 m"
//!
//! [model]
//! sigma_theta = "0.2 deg"
//! sigma_r = "3 cm"            # or sigma_r_quadratic = "0.002 1/m"
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam_model::{BeamModelParams, RangeNoise};
use crate::geometry::{ProjectionKind, ProjectionModel};
use crate::tree::MapConfig;
use crate::units::{Angle, InverseLength, Length, Position};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProjectionSpec {
    Spherical {
        azimuth_min: Angle,
        azimuth_max: Angle,
        elevation_min: Angle,
        elevation_max: Angle,
        width: u32,
        height: u32,
        min_range: Length,
        max_range: Length,
    },
    Pinhole {
        /// Focal lengths and principal point in pixels.
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        min_range: Length,
        max_range: Length,
    },
}

impl ProjectionSpec {
    pub fn to_model(&self) -> Result<ProjectionModel, SpecError> {
        let model = match *self {
            ProjectionSpec::Spherical {
                azimuth_min,
                azimuth_max,
                elevation_min,
                elevation_max,
                width,
                height,
                min_range,
                max_range,
            } => ProjectionModel {
                kind: ProjectionKind::Spherical {
                    azimuth_min: azimuth_min.0,
                    azimuth_max: azimuth_max.0,
                    elevation_min: elevation_min.0,
                    elevation_max: elevation_max.0,
                    width,
                    height,
                },
                min_range: min_range.0,
                max_range: max_range.0,
            },
            ProjectionSpec::Pinhole {
                fx,
                fy,
                cx,
                cy,
                width,
                height,
                min_range,
                max_range,
            } => ProjectionModel {
                kind: ProjectionKind::Pinhole {
                    fx,
                    fy,
                    cx,
                    cy,
                    width,
                    height,
                },
                min_range: min_range.0,
                max_range: max_range.0,
            },
        };
        model.validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
        Ok(model)
    }

    pub fn from_model(model: &ProjectionModel) -> Self {
        let (min_range, max_range) = (Length(model.min_range), Length(model.max_range));
        match model.kind {
            ProjectionKind::Spherical {
                azimuth_min,
                azimuth_max,
                elevation_min,
                elevation_max,
                width,
                height,
            } => ProjectionSpec::Spherical {
                azimuth_min: Angle(azimuth_min),
                azimuth_max: Angle(azimuth_max),
                elevation_min: Angle(elevation_min),
                elevation_max: Angle(elevation_max),
                width,
                height,
                min_range,
                max_range,
            },
            ProjectionKind::Pinhole {
                fx,
                fy,
                cx,
                cy,
                width,
                height,
            } => ProjectionSpec::Pinhole {
                fx,
                fy,
                cx,
                cy,
                width,
                height,
                min_range,
                max_range,
            },
        }
    }
}

fn default_lo() -> f64 {
    -4.0
}
fn default_hi() -> f64 {
    4.0
}
fn default_floor() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub sigma_theta: Angle,
    /// Constant range deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_r: Option<Length>,
    /// Range deviation growing with the square of the range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_r_quadratic: Option<InverseLength>,
    #[serde(default = "default_lo")]
    pub update_lo: f64,
    #[serde(default = "default_hi")]
    pub update_hi: f64,
    #[serde(default = "default_floor")]
    pub probability_floor: f64,
    #[serde(default)]
    pub miss_as_free: bool,
}

fn range_noise(sigma_r: Option<Length>, quadratic: Option<InverseLength>) -> Result<RangeNoise, SpecError> {
    match (sigma_r, quadratic) {
        (Some(k), None) => Ok(RangeNoise::Constant(k.0)),
        (None, Some(k)) => Ok(RangeNoise::Quadratic(k.0)),
        _ => Err(SpecError::Invalid(
            "exactly one of sigma_r and sigma_r_quadratic must be given".into(),
        )),
    }
}

impl ModelSpec {
    pub fn to_params(&self) -> Result<BeamModelParams, SpecError> {
        let params = BeamModelParams {
            sigma_theta: self.sigma_theta.0,
            range_noise: range_noise(self.sigma_r, self.sigma_r_quadratic)?,
            update_lo: self.update_lo,
            update_hi: self.update_hi,
            probability_floor: self.probability_floor,
            miss_as_free: self.miss_as_free,
        };
        params.validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
        Ok(params)
    }

    pub fn from_params(params: &BeamModelParams) -> Self {
        let (sigma_r, sigma_r_quadratic) = match params.range_noise {
            RangeNoise::Constant(k) => (Some(Length(k)), None),
            RangeNoise::Quadratic(k) => (None, Some(InverseLength(k))),
        };
        Self {
            sigma_theta: Angle(params.sigma_theta),
            sigma_r,
            sigma_r_quadratic,
            update_lo: params.update_lo,
            update_hi: params.update_hi,
            probability_floor: params.probability_floor,
            miss_as_free: params.miss_as_free,
        }
    }
}

/// Simulated noise; zero deviations are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpecFile {
    pub sigma_theta: Angle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_r: Option<Length>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_r_quadratic: Option<InverseLength>,
}

impl NoiseSpecFile {
    pub fn to_noise(&self, seed: u64) -> Result<crate::sim::NoiseSpec, SpecError> {
        let noise = match (self.sigma_r, self.sigma_r_quadratic) {
            (None, None) => RangeNoise::Constant(0.0),
            (a, b) => range_noise(a, b)?,
        };
        let k = match noise {
            RangeNoise::Constant(k) | RangeNoise::Quadratic(k) => k,
        };
        if !(self.sigma_theta.0 >= 0.0 && k >= 0.0) {
            return Err(SpecError::Invalid("noise deviations must be non-negative".into()));
        }
        Ok(crate::sim::NoiseSpec {
            sigma_theta: self.sigma_theta.0,
            range_noise: noise,
            seed,
        })
    }
}

fn default_clamp_lo() -> f32 {
    -2.0
}
fn default_clamp_hi() -> f32 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub min_cell_width: Length,
    /// Minimum corner of the mapped cube.
    pub origin: Position,
    pub tree_height: u8,
    #[serde(default = "default_clamp_lo")]
    pub clamp_lo: f32,
    #[serde(default = "default_clamp_hi")]
    pub clamp_hi: f32,
    #[serde(default)]
    pub prune_threshold: f32,
}

impl MapSpec {
    pub fn to_config(&self) -> Result<MapConfig, SpecError> {
        let config = MapConfig {
            min_cell_width: self.min_cell_width.0,
            origin: self.origin.0,
            tree_height: self.tree_height,
            clamp_lo: self.clamp_lo,
            clamp_hi: self.clamp_hi,
            prune_threshold: self.prune_threshold,
        };
        config.validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Deserialize, Serialize)]
    struct Wrapper {
        projection: ProjectionSpec,
        model: ModelSpec,
    }

    #[test]
    fn specs_round_trip_through_toml() {
        let text = r#"
            [projection]
            kind = "pinhole"
            fx = 500.0
            fy = 500.0
            cx = 319.5
            cy = 239.5
            width = 640
            height = 480
            min_range = "10 cm"
            max_range = "8 m"

            [model]
            sigma_theta = "1 mrad"
            sigma_r_quadratic = "0.002 1/m"
        "#;
        let w: Wrapper = toml::from_str(text).unwrap();
        let proj = w.projection.to_model().unwrap();
        let params = w.model.to_params().unwrap();
        assert_eq!(proj.min_range, 0.1);
        assert_eq!(params.range_noise, RangeNoise::Quadratic(0.002));
        let back: Wrapper = toml::from_str(&toml::to_string(&Wrapper {
            projection: ProjectionSpec::from_model(&proj),
            model: ModelSpec::from_params(&params),
        })
        .unwrap())
        .unwrap();
        assert_eq!(back.projection.to_model().unwrap(), proj);
        assert_eq!(back.model.to_params().unwrap(), params);
    }

    #[test]
    fn model_needs_exactly_one_range_law() {
        let both = ModelSpec {
            sigma_theta: Angle(0.01),
            sigma_r: Some(Length(0.03)),
            sigma_r_quadratic: Some(InverseLength(0.001)),
            update_lo: -4.0,
            update_hi: 4.0,
            probability_floor: 1e-4,
            miss_as_free: false,
        };
        assert!(both.to_params().is_err());
        assert!(ModelSpec { sigma_r_quadratic: None, ..both.clone() }.to_params().is_ok());
        assert!(ModelSpec { sigma_r: None, sigma_r_quadratic: None, ..both }.to_params().is_err());
    }
}
