use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::geometry::Pose;

/// Sensor paths for simulated logs. Yaw is measured about the world z axis,
/// pitch tilts the sensor's x axis up (negative looks down).
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Circle around `center` at its height, looking towards the center.
    Orbit {
        center: Vector3<f64>,
        radius: f64,
        pitch: f64,
        frames: usize,
        frame_period: f64,
    },
    /// Piecewise-linear path through waypoints (position, yaw), sampled at
    /// equal arc length.
    Waypoints {
        points: Vec<(Vector3<f64>, f64)>,
        pitch: f64,
        frames: usize,
        frame_period: f64,
    },
}

impl Trajectory {
    /// Timestamped poses along the path.
    pub fn poses(&self) -> Vec<(f64, Pose)> {
        match self {
            Trajectory::Orbit {
                center,
                radius,
                pitch,
                frames,
                frame_period,
            } => (0..*frames)
                .map(|i| {
                    let phi = TAU * i as f64 / *frames as f64;
                    let position = center + Vector3::new(radius * phi.cos(), radius * phi.sin(), 0.0);
                    let yaw = phi + std::f64::consts::PI;
                    (i as f64 * frame_period, Pose::from_position_ypr(position, yaw, -pitch, 0.0))
                })
                .collect(),
            Trajectory::Waypoints {
                points,
                pitch,
                frames,
                frame_period,
            } => {
                if points.is_empty() {
                    return Vec::new();
                }
                let lengths: Vec<f64> = points.windows(2).map(|w| (w[1].0 - w[0].0).norm()).collect();
                let total: f64 = lengths.iter().sum();
                (0..*frames)
                    .map(|i| {
                        let s = if *frames > 1 { total * i as f64 / (*frames - 1) as f64 } else { 0.0 };
                        let (mut seg, mut acc) = (0, 0.0);
                        while seg < lengths.len() && acc + lengths[seg] < s {
                            acc += lengths[seg];
                            seg += 1;
                        }
                        let (position, yaw) = if seg >= lengths.len() {
                            *points.last().unwrap()
                        } else {
                            let f = if lengths[seg] > 0.0 { (s - acc) / lengths[seg] } else { 0.0 };
                            let (a, b) = (points[seg], points[seg + 1]);
                            (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f)
                        };
                        (i as f64 * frame_period, Pose::from_position_ypr(position, yaw, -pitch, 0.0))
                    })
                    .collect()
            }
        }
    }
}
