//! Synthetic scenes built from solid primitives, exact ray casting against
//! them, and noisy range rendering.

mod scene_file;
mod trajectory;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::beam_model::{BeamModelParams, RangeNoise};
use crate::exec::Exec;
use crate::geometry::{BeamIndex, Pose, ProjectionKind, ProjectionModel};
use crate::observation::{Observation, RangeData};

pub use scene_file::{parse_scene, SceneFileError};
pub use trajectory::Trajectory;

/// A convex solid.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Cuboid {
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    /// Capped cylinder whose axis is the local z axis.
    Cylinder {
        center: Vector3<f64>,
        radius: f64,
        half_height: f64,
        rotation: UnitQuaternion<f64>,
    },
    /// Half space below the plane through `point`; `normal` points out of the
    /// solid.
    Plane { point: Vector3<f64>, normal: Vector3<f64> },
}

/// Parameter interval `[t_in, t_out]` of a ray inside a convex solid.
type Span = Option<(f64, f64)>;

fn slab(origin: f64, dir: f64, lo: f64, hi: f64) -> Span {
    if dir == 0.0 {
        return (origin >= lo && origin <= hi).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let (a, b) = ((lo - origin) / dir, (hi - origin) / dir);
    Some((a.min(b), a.max(b)))
}

fn intersect(a: Span, b: Span) -> Span {
    let ((a0, a1), (b0, b1)) = (a?, b?);
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    (lo <= hi).then_some((lo, hi))
}

/// Span of a ray inside the infinite cylinder `x^2 + y^2 <= r^2`.
fn disk_span(o: Vector2<f64>, d: Vector2<f64>, radius: f64) -> Span {
    let a = d.norm_squared();
    let c = o.norm_squared() - radius * radius;
    if a == 0.0 {
        return (c <= 0.0).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let b = o.dot(&d);
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    Some(((-b - root) / a, (-b + root) / a))
}

impl Primitive {
    fn ray_span(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Span {
        match self {
            Primitive::Cuboid {
                center,
                half_extents,
                rotation,
            } => {
                let o = rotation.inverse_transform_vector(&(origin - center));
                let d = rotation.inverse_transform_vector(dir);
                (0..3).try_fold((f64::NEG_INFINITY, f64::INFINITY), |acc, k| {
                    intersect(Some(acc), slab(o[k], d[k], -half_extents[k], half_extents[k]))
                })
            }
            Primitive::Sphere { center, radius } => {
                let o = origin - center;
                let (a, b, c) = (dir.norm_squared(), o.dot(dir), o.norm_squared() - radius * radius);
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                Some(((-b - root) / a, (-b + root) / a))
            }
            Primitive::Cylinder {
                center,
                radius,
                half_height,
                rotation,
            } => {
                let o = rotation.inverse_transform_vector(&(origin - center));
                let d = rotation.inverse_transform_vector(dir);
                intersect(
                    disk_span(o.xy(), d.xy(), *radius),
                    slab(o.z, d.z, -half_height, *half_height),
                )
            }
            Primitive::Plane { point, normal } => {
                let n = normal.normalize();
                let s0 = n.dot(&(origin - point));
                let k = n.dot(dir);
                if k == 0.0 {
                    (s0 <= 0.0).then_some((f64::NEG_INFINITY, f64::INFINITY))
                } else if k < 0.0 {
                    Some((-s0 / k, f64::INFINITY))
                } else {
                    Some((f64::NEG_INFINITY, -s0 / k))
                }
            }
        }
    }

    /// Exact signed distance (negative inside).
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Primitive::Cuboid {
                center,
                half_extents,
                rotation,
            } => {
                let q = rotation.inverse_transform_vector(&(p - center)).abs() - half_extents;
                q.map(|x| x.max(0.0)).norm() + q.max().min(0.0)
            }
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
            Primitive::Cylinder {
                center,
                radius,
                half_height,
                rotation,
            } => {
                let l = rotation.inverse_transform_vector(&(p - center));
                let d = Vector2::new(l.xy().norm() - radius, l.z.abs() - half_height);
                d.map(|x| x.max(0.0)).norm() + d.max().min(0.0)
            }
            Primitive::Plane { point, normal } => normal.normalize().dot(&(p - point)),
        }
    }

    /// Conservative axis-aligned bounds; planes are unbounded.
    pub fn aabb(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let rotated = |center: &Vector3<f64>, half: Vector3<f64>, rotation: &UnitQuaternion<f64>| {
            let m = rotation.to_rotation_matrix();
            let extent = m.matrix().abs() * half;
            (center - extent, center + extent)
        };
        match self {
            Primitive::Cuboid {
                center,
                half_extents,
                rotation,
            } => Some(rotated(center, *half_extents, rotation)),
            Primitive::Sphere { center, radius } => Some((center.add_scalar(-radius), center.add_scalar(*radius))),
            Primitive::Cylinder {
                center,
                radius,
                half_height,
                rotation,
            } => Some(rotated(center, Vector3::new(*radius, *radius, *half_height), rotation)),
            Primitive::Plane { .. } => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene has no primitives")]
    Empty,
    #[error("scene bounds are empty or not finite")]
    Bounds,
    #[error("primitive {index} is degenerate: {reason}")]
    Degenerate { index: usize, reason: String },
    #[error("primitive {index} lies entirely outside the scene bounds")]
    OutsideBounds { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bounds_min: Vector3<f64>,
    pub bounds_max: Vector3<f64>,
    pub primitives: Vec<Primitive>,
}

const DESK_FLAT: &str = include_str!("../../assets/desk_flat.toml");
const THIN_POLES: &str = include_str!("../../assets/thin_poles.toml");

impl Scene {
    pub fn new(bounds_min: Vector3<f64>, bounds_max: Vector3<f64>, primitives: Vec<Primitive>) -> Result<Self, SceneError> {
        let scene = Self {
            bounds_min,
            bounds_max,
            primitives,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// The canonical indoor test scene shipped with the crate.
    pub fn desk_flat() -> Self {
        parse_scene(DESK_FLAT).expect("bundled scene parses")
    }

    /// A few centimeter-scale poles standing on a floor.
    pub fn thin_poles() -> Self {
        parse_scene(THIN_POLES).expect("bundled scene parses")
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.primitives.is_empty() {
            return Err(SceneError::Empty);
        }
        let finite = self.bounds_min.iter().chain(self.bounds_max.iter()).all(|x| x.is_finite());
        if !finite || (0..3).any(|k| self.bounds_max[k] <= self.bounds_min[k]) {
            return Err(SceneError::Bounds);
        }
        for (index, p) in self.primitives.iter().enumerate() {
            let degenerate = |reason: &str| SceneError::Degenerate {
                index,
                reason: reason.to_string(),
            };
            match p {
                Primitive::Cuboid { half_extents, .. } if !(half_extents.min() > 0.0) => {
                    return Err(degenerate("half extents must be positive"))
                }
                Primitive::Sphere { radius, .. } if !(*radius > 0.0) => return Err(degenerate("radius must be positive")),
                Primitive::Cylinder {
                    radius, half_height, ..
                } if !(*radius > 0.0 && *half_height > 0.0) => {
                    return Err(degenerate("radius and half height must be positive"))
                }
                Primitive::Plane { normal, .. } if !(normal.norm() > 0.0) => {
                    return Err(degenerate("normal must be nonzero"))
                }
                _ => {}
            }
            let inside = match p.aabb() {
                Some((lo, hi)) => (0..3).all(|k| hi[k] >= self.bounds_min[k] && lo[k] <= self.bounds_max[k]),
                None => {
                    // A plane crosses the box when the box corners are not
                    // all on one side.
                    let corners = (0..8).map(|o| {
                        Vector3::from_fn(|k, _| if o >> k & 1 == 1 { self.bounds_max[k] } else { self.bounds_min[k] })
                    });
                    let d: Vec<f64> = corners.map(|c| p.signed_distance(&c)).collect();
                    d.iter().any(|&x| x <= 0.0) && d.iter().any(|&x| x >= 0.0)
                }
            };
            if !inside {
                return Err(SceneError::OutsideBounds { index });
            }
        }
        Ok(())
    }

    /// Distance along the unit direction `dir` to the first surface entered,
    /// or `None` if nothing is hit within `max_range`. A ray starting inside
    /// a solid hits at distance zero.
    pub fn cast_ray(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, max_range: f64) -> Option<f64> {
        self.primitives
            .iter()
            .filter_map(|p| {
                let (t_in, t_out) = p.ray_span(origin, dir)?;
                let t = t_in.max(0.0);
                (t <= t_out).then_some(t)
            })
            .filter(|&t| t <= max_range)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    /// Signed distance to the union of all primitives (negative inside).
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.primitives
            .iter()
            .map(|q| q.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.bounds_min[k] && p[k] <= self.bounds_max[k])
    }
}

/// Simulated sensor noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation of the beam direction error (theta units).
    pub sigma_theta: f64,
    /// Range noise law; a zero coefficient disables range noise.
    pub range_noise: RangeNoise,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            sigma_theta: 0.0,
            range_noise: RangeNoise::Constant(0.0),
            seed: 0,
        }
    }
}

fn perturbed_direction(projection: &ProjectionModel, beam: BeamIndex, sigma: f64, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let d = projection.beam_direction(beam);
    if sigma == 0.0 {
        return d;
    }
    let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
    match projection.kind {
        ProjectionKind::Pinhole { fx, fy, cx, cy, .. } => Vector3::new(
            (beam.col as f64 - cx) / fx + sigma * a,
            (beam.row as f64 - cy) / fy + sigma * b,
            1.0,
        )
        .normalize(),
        ProjectionKind::Spherical { .. } => {
            let helper = if d.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
            let e1 = d.cross(&helper).normalize();
            let e2 = d.cross(&e1);
            let offset = e1 * (sigma * a) + e2 * (sigma * b);
            let angle = offset.norm();
            if angle == 0.0 {
                d
            } else {
                d * angle.cos() + offset / angle * angle.sin()
            }
        }
    }
}

/// Renders a range image of `scene` from `pose`. Each beam draws its noise
/// from its own stream of the seeded generator, so results do not depend on
/// the execution policy.
pub fn render_observation(
    scene: &Scene,
    pose: &Pose,
    projection: &ProjectionModel,
    noise: &NoiseSpec,
    model: &BeamModelParams,
    exec: Exec,
) -> Observation {
    let width = projection.width();
    let origin = pose.translation;
    let ranges = exec.map_range(projection.num_beams(), |i| {
        let beam = BeamIndex {
            col: i as u32 % width,
            row: i as u32 / width,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(i as u64);
        let dir = perturbed_direction(projection, beam, noise.sigma_theta, &mut rng);
        let dir_world = pose.rotation * dir;
        let limit = projection.max_range / projection.range_along(&dir, 1.0).max(1e-12);
        match scene.cast_ray(&origin, &dir_world, limit) {
            None => f32::INFINITY,
            Some(t) => {
                let r = projection.range_along(&dir, t);
                let sigma = noise.range_noise.sigma(r);
                let e: f64 = StandardNormal.sample(&mut rng);
                let noisy = r + sigma * e;
                if noisy < projection.min_range {
                    f32::NAN
                } else if noisy > projection.max_range {
                    f32::INFINITY
                } else {
                    noisy as f32
                }
            }
        }
    });
    Observation {
        timestamp: 0.0,
        pose: *pose,
        projection: *projection,
        data: RangeData::Image {
            width,
            height: projection.height(),
            ranges,
        },
        model: *model,
    }
}
