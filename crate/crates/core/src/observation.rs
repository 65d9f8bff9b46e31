use nalgebra::Vector3;
use thiserror::Error;

use crate::beam_model::{BeamModelParams, ModelError};
use crate::geometry::{BeamIndex, GeometryError, Pose, ProjectionModel};

/// Raw range data of one frame.
///
/// Image values are range coordinates in meters (range for spherical
/// sensors, depth for pinhole cameras), row-major. `NaN` marks an invalid
/// reading and `+inf` (or anything beyond the maximum range) a beam with no
/// return.
#[derive(Debug, Clone, PartialEq)]
pub enum RangeData {
    Image { width: u32, height: u32, ranges: Vec<f32> },
    /// Sensor-frame end points of returns.
    Points(Vec<[f32; 3]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub timestamp: f64,
    pub pose: Pose,
    pub projection: ProjectionModel,
    pub data: RangeData,
    pub model: BeamModelParams,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("range image is {got_w}x{got_h} but the projection expects {want_w}x{want_h}")]
    ImageShape { got_w: u32, got_h: u32, want_w: u32, want_h: u32 },
    #[error("range image holds {got} values, expected {want}")]
    ImageLength { got: usize, want: usize },
    #[error("pose or timestamp is not finite")]
    NonFinitePose,
}

impl Observation {
    pub fn validate(&self) -> Result<(), ObservationError> {
        self.projection.validate()?;
        self.model.validate()?;
        if !self.timestamp.is_finite()
            || !self.pose.translation.iter().all(|x| x.is_finite())
            || !self.pose.rotation.coords.iter().all(|x| x.is_finite())
        {
            return Err(ObservationError::NonFinitePose);
        }
        if let RangeData::Image { width, height, ranges } = &self.data {
            let (want_w, want_h) = (self.projection.width(), self.projection.height());
            if (*width, *height) != (want_w, want_h) {
                return Err(ObservationError::ImageShape {
                    got_w: *width,
                    got_h: *height,
                    want_w,
                    want_h,
                });
            }
            let want = *width as usize * *height as usize;
            if ranges.len() != want {
                return Err(ObservationError::ImageLength { got: ranges.len(), want });
            }
        }
        Ok(())
    }

    /// Range image on the projection's beam grid. Point lists are binned onto
    /// their nearest beam, keeping the closest return; beams without any
    /// point are invalid.
    pub fn range_image(&self) -> Vec<f64> {
        match &self.data {
            RangeData::Image { ranges, .. } => ranges.iter().map(|&r| r as f64).collect(),
            RangeData::Points(points) => {
                let width = self.projection.width() as usize;
                let mut image = vec![f64::NAN; self.projection.num_beams()];
                for p in points {
                    let local = Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64);
                    if let Some(c) = self.projection.project(&local) {
                        let slot = &mut image[c.beam.row as usize * width + c.beam.col as usize];
                        if slot.is_nan() || c.r < *slot {
                            *slot = c.r;
                        }
                    }
                }
                image
            }
        }
    }

    /// World-frame end points of all valid hits.
    pub fn hit_points(&self) -> Vec<Vector3<f64>> {
        let image = self.range_image();
        let width = self.projection.width();
        image
            .iter()
            .enumerate()
            .filter(|(_, &z)| z >= self.projection.min_range && z <= self.projection.max_range)
            .map(|(i, &z)| {
                let beam = BeamIndex {
                    col: (i % width as usize) as u32,
                    row: (i / width as usize) as u32,
                };
                self.pose.to_world(&self.projection.beam_endpoint(beam, z))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ProjectionKind;

    fn projection() -> ProjectionModel {
        ProjectionModel {
            kind: ProjectionKind::Pinhole {
                fx: 10.0,
                fy: 10.0,
                cx: 1.5,
                cy: 1.0,
                width: 4,
                height: 3,
            },
            min_range: 0.1,
            max_range: 10.0,
        }
    }

    #[test]
    fn points_bin_to_nearest_beam_keeping_closest() {
        let obs = Observation {
            timestamp: 0.0,
            pose: Pose::identity(),
            projection: projection(),
            data: RangeData::Points(vec![[0.0, 0.0, 2.0], [0.005, 0.0, 1.0], [0.0, 0.0, -1.0]]),
            model: BeamModelParams::default(),
        };
        obs.validate().unwrap();
        let image = obs.range_image();
        // u = 10 * 0 / 2 + 1.5 rounds to column 2, v = 1 -> row 1.
        assert_eq!(image[4 + 2], 1.0);
        assert_eq!(image.iter().filter(|v| !v.is_nan()).count(), 1);
        assert_eq!(obs.hit_points().len(), 1);
    }

    #[test]
    fn image_shape_is_checked() {
        let obs = Observation {
            timestamp: 0.0,
            pose: Pose::identity(),
            projection: projection(),
            data: RangeData::Image {
                width: 3,
                height: 4,
                ranges: vec![1.0; 12],
            },
            model: BeamModelParams::default(),
        };
        assert!(matches!(obs.validate(), Err(ObservationError::ImageShape { .. })));
    }
}
